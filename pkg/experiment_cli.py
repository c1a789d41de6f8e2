"""
Command-line front end.

Usage:
    python experiment_cli.py tables --table table1 --out table1.csv
    python experiment_cli.py lfa-scan --schemes QDR,QSigmaUzawa
    python experiment_cli.py verify --quick
    python experiment_cli.py solve --scheme QIBSR --grid-sizes 128 --kinds W --nus 2

Exit status: 0 on success, 1 on a usage error, 2 when a run diverged or an
acceptance criterion failed.
"""

import logging
import math
import sys
import time
from os import environ
from typing import List, Optional

import numpy as np

from acceptance import AcceptanceSuite
from experiment_config import LOG_LEVEL_ENV, ConfigError, ExperimentConfig, load_config
from lfa import smoothing_factor
from lfa_scan import LfaScan
from mac_discretization import GridSpec, StaggeredField, StokesError, apply_stokes, residual
from multigrid import CycleSpec, MultigridCycle
from report_builder import ReportBuilder
from results import CriterionResult, LfaRow, ResultRow, SolveResult
from table_experiments import TableExperiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def manufactured_solution(grid: GridSpec) -> StaggeredField:
    """Smooth periodic mean-free (u, v, p) sampled at the staggered locations."""
    parts = []
    for name, (kx, ky, phase) in zip("uvp", ((1, 2, 0.0), (2, 1, 0.5), (1, 1, 0.25))):
        x, y = grid.coordinates(name)
        x, y = x * grid.h, y * grid.h
        parts.append(np.sin(2 * np.pi * (kx * x + phase)) * np.cos(2 * np.pi * ky * y))
    return StaggeredField(*parts).mean_free()


def run_solve(config: ExperimentConfig, logger=None) -> SolveResult:
    """Cycle on L x = L x* from x = 0 until the relative defect drops below ``config.tolerance``."""
    logger = logger or logging.getLogger(__name__)
    kind, n = config.runs[0]
    nu = config.nus[0]
    grid = GridSpec(n)
    spec = CycleSpec.split(nu, kind, config.scheme, config.params, restriction=config.restriction)
    runner = MultigridCycle(spec, logger=logger)

    exact = manufactured_solution(grid)
    b = apply_stokes(grid, exact)
    x = StaggeredField.zeros(grid)
    initial = residual(grid, b, x).norm()
    start = time.perf_counter()
    history, relative = [], 1.0
    for k in range(1, config.k_max + 1):
        x = runner(grid, b, x)
        relative = residual(grid, b, x).norm() / initial
        history.append(relative)
        logger.info(f"[Solve] cycle {k}: relative defect {relative:.3e}")
        if relative < config.tolerance:
            break
    iterations = len(history)
    rate = math.exp(math.log(max(relative, np.finfo(float).tiny)) / iterations)
    return SolveResult(scheme=config.scheme.value, kind=kind.value, n=n, nu=nu, iterations=iterations,
                       relative_defect=relative, error=(x - exact).norm() / exact.norm(), average_rate=rate,
                       converged=relative < config.tolerance, wall_time=time.perf_counter() - start,
                       history=history)


class ExperimentRunner(object):
    """Dispatches one validated config to its subcommand and emits the reports."""

    def __init__(self, config: ExperimentConfig, reporter: Optional[ReportBuilder] = None, logger=None):
        self.config = config
        self.logger = logger or logging.getLogger(__name__)
        self.reporter = reporter or ReportBuilder(logger=self.logger)

    def run(self) -> int:
        handlers = {
            "tables": self.tables,
            "lfa-scan": self.lfa_scan,
            "verify": self.verify,
            "solve": self.solve,
        }
        if self.config.command not in handlers:
            raise ConfigError(f"Incorrect value for command: {self.config.command}. "
                              f"Must be one of {', '.join(handlers)}", "command")
        return handlers[self.config.command]()

    def _emit(self, title: str, rows, columns: List[str], description: str, footer: Optional[str] = None):
        print(self.reporter.console_table(title, rows, columns, footer=footer))
        if self.config.out:
            self.reporter.write_csv(rows, columns, self.config.out)
        if self.config.html:
            text = self.reporter.summary_markdown(title, description,
                                                  [{"title": title, "rows": rows, "columns": columns,
                                                    "note": footer}])
            self.reporter.write_html(title, text, self.config.html)

    def tables(self) -> int:
        config = self.config
        rows = TableExperiment(config, logger=self.logger).run()
        mu = smoothing_factor(config.scheme, config.params, resolution=config.resolution).mu
        diverged = [row for row in rows if row.diverged]
        footer = f"mu_opt = {mu:.4f}; {len(diverged)} of {len(rows)} runs diverged"
        title = f"{config.scheme.value} {config.params.as_dict()}" + (f" [{config.table}]" if config.table else "")
        self._emit(title, rows, ResultRow.COLUMNS,
                   "Measured multigrid convergence factors against the LFA prediction mu^nu.", footer)
        return EXIT_FAILURE if diverged else EXIT_OK

    def lfa_scan(self) -> int:
        rows = LfaScan(self.config, logger=self.logger).run()
        self._emit("Optimal smoothing factors", rows, LfaRow.COLUMNS,
                   "Grid-searched optimal smoothing factors and their analytic values.")
        return EXIT_OK

    def verify(self) -> int:
        results = AcceptanceSuite(self.config, logger=self.logger).run()
        failed = [result for result in results if not result.passed]
        footer = f"{len(results) - len(failed)} of {len(results)} criteria passed or skipped"
        self._emit("Acceptance criteria", results, CriterionResult.COLUMNS,
                   "Acceptance gate results.", footer)
        return EXIT_FAILURE if failed else EXIT_OK

    def solve(self) -> int:
        result = run_solve(self.config, logger=self.logger)
        self._emit("Manufactured solve", [result], SolveResult.COLUMNS,
                   "One solve of a manufactured periodic problem.")
        return EXIT_OK if result.converged else EXIT_FAILURE


def configure_logging(level: str = "INFO"):
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, str(level).upper(), logging.INFO))


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(environ.get(LOG_LEVEL_ENV, "INFO"))
    try:
        config = load_config(argv)
        configure_logging(config.log_level)
        logger.debug(f"[CLI] config: {config}")
        return ExperimentRunner(config).run()
    except ConfigError as e:
        field = f" (field: {e.field})" if e.field else ""
        logger.error(f"[CLI] usage error{field}: {e}")
        return EXIT_USAGE
    except StokesError as e:
        logger.exception(f"[CLI] {type(e).__name__}: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"[CLI] unexpected error: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
