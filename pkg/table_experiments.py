import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List

from experiment_config import ExperimentConfig, expand_seeds
from lfa import smoothing_factor
from mac_discretization import DivergenceError, GridSpec
from multigrid import CycleKind, CycleSpec, measure_rho
from relaxation import RelaxParams, RelaxScheme
from results import STATUS_DIVERGED, ResultRow

logger = logging.getLogger(__name__)


def run_measurement(task: Dict[str, Any]) -> ResultRow:
    """Measure one (scheme, kind, n, nu) combination; module level so worker processes can import it."""
    scheme = RelaxScheme.parse(task["scheme"])
    kind = CycleKind.parse(task["kind"])
    row = ResultRow(scheme=scheme.value, kind=kind.value, n=task["n"], nu=task["nu"], seed=task["seed"],
                    prediction=task.get("prediction"), expected=task.get("expected"))
    spec = CycleSpec.split(task["nu"], kind, scheme, RelaxParams(**task["params"]),
                           restriction=task.get("restriction", "standard"))
    try:
        measurement = measure_rho(spec, GridSpec(task["n"]), k_max=task["k_max"], seed=task["seed"],
                                  renormalize=task.get("renormalize", False))
    except DivergenceError as e:
        logger.error(f"[Tables] {row!r} diverged: {e}")
        row.status = STATUS_DIVERGED
        row.message = str(e)
        return row
    row.rho = measurement.rho
    row.k_eff = measurement.k_eff
    row.wall_time = measurement.wall_time
    return row


class TableExperiment(object):
    """
    Runs every (kind, n, nu) combination of a config and collects sorted rows.

    Args:
        config: validated experiment config
        logger: optional logger (default: module logger)
    """

    def __init__(self, config: ExperimentConfig, logger=None):
        self.config = config
        self.logger = logger or logging.getLogger(__name__)

    def tasks(self) -> List[Dict[str, Any]]:
        config = self.config
        mu = smoothing_factor(config.scheme, config.params, resolution=config.resolution).mu
        combinations = [(kind, n, nu) for kind, n in config.runs for nu in config.nus]
        seeds = expand_seeds(config.seed, len(combinations))
        tasks = []
        for (kind, n, nu), seed in zip(combinations, seeds):
            tasks.append({
                "scheme": config.scheme.value,
                "params": config.params.as_dict(),
                "kind": kind.value,
                "n": n,
                "nu": nu,
                "seed": seed,
                "k_max": config.k_max,
                "restriction": config.restriction.value,
                "renormalize": config.renormalize,
                "prediction": mu ** nu,
                "expected": config.expected(kind, n, nu),
            })
        return tasks

    def run(self) -> List[ResultRow]:
        tasks = self.tasks()
        self.logger.info(f"[Tables] {len(tasks)} runs of {self.config.scheme.value} "
                         f"with {self.config.params.as_dict()} on {self.config.workers} worker(s)")
        if self.config.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as executor:
                rows = list(executor.map(run_measurement, tasks))
        else:
            rows = [run_measurement(task) for task in tasks]
        rows.sort(key=ResultRow.sort_key)

        diverged = [row for row in rows if row.diverged]
        if diverged:
            self.logger.warning(f"[Tables] {len(diverged)} of {len(rows)} runs diverged")
        return rows
