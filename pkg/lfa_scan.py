import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List

from experiment_config import ExperimentConfig
from lfa import DEFAULT_SEARCHES, EXPECTED_SMOOTHING, optimize_params, smoothing_factor
from relaxation import RelaxScheme
from results import LfaRow

logger = logging.getLogger(__name__)


def scan_scheme(scheme_value: str, search_resolution: int, resolution: int) -> LfaRow:
    scheme = RelaxScheme.parse(scheme_value)
    search = dataclasses.replace(DEFAULT_SEARCHES[scheme], resolution=search_resolution)
    result = optimize_params(scheme, search)
    # node sampling reaches the boundary of the high-frequency set, where the baseline maxima sit
    sampling = "node" if resolution % 4 == 0 else "cell"
    mu = smoothing_factor(scheme, result.params, resolution=resolution, sampling=sampling).mu
    params = {name: getattr(result.params, name) for name in search.axes}
    return LfaRow(scheme=scheme.value, params=params, mu=mu, expected=EXPECTED_SMOOTHING[scheme],
                  evaluations=result.evaluations, resolution=resolution)


class LfaScan(object):
    """
    Grid search of the optimal smoothing factor for a list of schemes.

    Args:
        config: validated experiment config; ``schemes`` empty means all schemes
        logger: optional logger (default: module logger)
    """

    def __init__(self, config: ExperimentConfig, logger=None):
        self.config = config
        self.logger = logger or logging.getLogger(__name__)

    @property
    def schemes(self) -> List[RelaxScheme]:
        return list(self.config.schemes) or list(RelaxScheme)

    def run(self) -> List[LfaRow]:
        config = self.config
        schemes = [scheme.value for scheme in self.schemes]
        self.logger.info(f"[LFA] scanning {', '.join(schemes)} (search resolution "
                         f"{config.search_resolution}, final resolution {config.resolution})")
        arguments = ([config.search_resolution] * len(schemes), [config.resolution] * len(schemes))
        if config.workers > 1 and len(schemes) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as executor:
                rows = list(executor.map(scan_scheme, schemes, *arguments))
        else:
            rows = list(map(scan_scheme, schemes, *arguments))
        rows.sort(key=LfaRow.sort_key)
        for row in rows:
            self.logger.info(f"[LFA] {row.scheme}: mu*={row.mu:.6f} (expected {row.expected:.6f}) at {row.params}")
        return rows
