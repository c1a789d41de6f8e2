"""
Experiment configuration.

Values are layered, lowest precedence first:
    1. DEFAULTS below
    2. the ``task_parameters`` environment variable (a Python-literal list of
       {"name": ..., "default": ...} dicts)
    3. an INI file (``--config``), section ``--section`` or the subcommand name
    4. command-line flags

A ``table`` key (table1, table2, table3) selects a built-in run plan; any
scheme, preset, grid size or kind given explicitly still wins over the plan.
"""

import argparse
import ast
import configparser
import itertools
import logging
from dataclasses import dataclass, field
from os import environ
from typing import Any, Dict, List, Optional, Tuple

from mac_discretization import StokesError
from lfa import MIN_RESOLUTION
from multigrid import CycleKind, RestrictionConvention
from relaxation import RelaxParams, RelaxScheme, default_params, resolve_preset

logger = logging.getLogger(__name__)

PARAM_KEYS = ("omega", "alpha", "sigma", "omega_j")
LOG_LEVEL_ENV = "MGSTOKES_LOG_LEVEL"
SEED_MASK = (1 << 64) - 1

DEFAULTS: Dict[str, Any] = {
    "scheme": "QDR",
    "preset": None,
    "table": None,
    "grid_sizes": "32",
    "kinds": "TwoGrid",
    "nus": "1, 2, 3, 4",
    "seed": 0,
    "k_max": 100,
    "out": None,
    "html": None,
    "resolution": 256,
    "search_resolution": 32,
    "schemes": None,
    "workers": 1,
    "restriction": "standard",
    "renormalize": False,
    "quick": False,
    "tolerance": 1e-10,
    "log_level": "INFO",
}

# (kind, n) pairs and the measured factors they are compared against, one per nu = 1..4
TABLE_PLANS: Dict[str, Dict[str, Any]] = {
    "table1": {
        "scheme": "QDR",
        "preset": "qdr",
        "expected": {
            ("TwoGrid", 32): (0.328, 0.109, 0.038, 0.028),
            ("TwoGrid", 64): (0.326, 0.108, 0.038, 0.030),
            ("V", 128): (0.324, 0.108, 0.053, 0.041),
            ("V", 256): (0.324, 0.108, 0.053, 0.041),
        },
    },
    "table2": {
        "scheme": "QIBSR",
        "preset": "qibsr",
        "expected": {
            ("TwoGrid", 32): (0.323, 0.110, 0.037, 0.027),
            ("TwoGrid", 64): (0.326, 0.109, 0.037, 0.027),
            ("V", 128): (0.326, 0.127, 0.081, 0.062),
            ("V", 256): (0.326, 0.178, 0.105, 0.080),
            ("W", 128): (0.326, 0.109, 0.037, 0.027),
            ("W", 256): (0.326, 0.109, 0.037, 0.027),
        },
    },
    "table3": {
        "scheme": "QSigmaUzawa",
        "preset": "quzawa",
        "expected": {
            ("TwoGrid", 32): (0.562, 0.322, 0.187, 0.108),
            ("TwoGrid", 64): (0.559, 0.321, 0.186, 0.107),
            ("V", 128): (0.558, 0.668, 0.401, 0.236),
            ("V", 256): (0.744, 0.932, 0.541, 0.303),
            ("W", 128): (0.558, 0.321, 0.186, 0.106),
            ("W", 256): (0.558, 0.321, 0.186, 0.107),
        },
    },
}


class ConfigError(StokesError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


def get_task_param_default(param_name: str, default=None):
    try:
        raw = environ.get("task_parameters", "[]")
        task_parameters = ast.literal_eval(raw)
    except Exception as e:
        logger.warning(f"[Config] failed to parse task parameters: {e}")
        task_parameters = []

    for param in task_parameters:
        if param.get("name") == param_name:
            return param.get("default")
    return default


def splitmix64(state: int) -> Tuple[int, int]:
    """One splitmix64 step: returns (next state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & SEED_MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & SEED_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & SEED_MASK
    return state, z ^ (z >> 31)


def expand_seeds(seed: int, count: int) -> List[int]:
    """Per-run seeds: the first ``count`` splitmix64 outputs starting from ``seed``."""
    seeds, state = [], seed & SEED_MASK
    for _ in range(count):
        state, value = splitmix64(state)
        seeds.append(value)
    return seeds


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


def _split(value) -> List[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(item).strip() for item in value if str(item).strip()]
    return [item.strip() for item in str(value).split(",") if item.strip()]


def _as_int(value, name: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}", name)


def _as_float(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}", name)


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "yes", "true", "on")


def _as_int_list(value, name: str) -> List[int]:
    return [_as_int(item, name) for item in _split(value)]


@dataclass
class ExperimentConfig:
    command: str
    scheme: RelaxScheme
    params: RelaxParams
    preset: Optional[str] = None
    table: Optional[str] = None
    runs: List[Tuple[CycleKind, int]] = field(default_factory=list)
    nus: List[int] = field(default_factory=lambda: [1, 2, 3, 4])
    seed: int = 0
    k_max: int = 100
    out: Optional[str] = None
    html: Optional[str] = None
    resolution: int = 256
    search_resolution: int = 32
    schemes: List[RelaxScheme] = field(default_factory=list)
    workers: int = 1
    restriction: RestrictionConvention = RestrictionConvention.STANDARD
    renormalize: bool = False
    quick: bool = False
    tolerance: float = 1e-10
    log_level: str = "INFO"

    @property
    def grid_sizes(self) -> List[int]:
        return sorted({n for _, n in self.runs})

    @property
    def kinds(self) -> List[CycleKind]:
        return list(dict.fromkeys(kind for kind, _ in self.runs))

    def expected(self, kind: CycleKind, n: int, nu: int) -> Optional[float]:
        """Reference factor for this run when a table plan is active."""
        if not self.table:
            return None
        values = TABLE_PLANS[self.table]["expected"].get((kind.value, n))
        if values is None or not 1 <= nu <= len(values):
            return None
        return values[nu - 1]

    @classmethod
    def from_mapping(cls, command: str, raw: Dict[str, Any], explicit=frozenset()) -> "ExperimentConfig":
        """
        Validate a merged key/value mapping.

        Args:
            command: subcommand name
            raw: merged configuration values (strings or typed values)
            explicit: keys set above the DEFAULTS layer

        Raises:
            ConfigError: on the first invalid field
        """
        table = raw.get("table") or None
        plan = None
        if table:
            table = str(table).strip().lower()
            if table not in TABLE_PLANS:
                raise ConfigError(f"Unknown table: {table}. Must be one of {', '.join(TABLE_PLANS)}", "table")
            plan = TABLE_PLANS[table]

        scheme, params, preset = cls._resolve_scheme(raw, plan, explicit)

        if plan is not None and not ({"grid_sizes", "kinds"} & set(explicit)):
            runs = [(CycleKind.parse(kind), n) for kind, n in plan["expected"]]
        else:
            grid_sizes = _as_int_list(raw.get("grid_sizes"), "grid_sizes")
            if not grid_sizes:
                raise ConfigError("grid_sizes must list at least one grid size", "grid_sizes")
            try:
                kinds = [CycleKind.parse(kind) for kind in _split(raw.get("kinds"))]
            except ValueError as e:
                raise ConfigError(str(e), "kinds")
            if not kinds:
                raise ConfigError("kinds must list at least one cycle kind", "kinds")
            runs = list(itertools.product(kinds, grid_sizes))
        for _, n in runs:
            if n < 8 or not _is_power_of_two(n):
                raise ConfigError(f"grid size {n} must be a power of two >= 8", "grid_sizes")

        nus = _as_int_list(raw.get("nus"), "nus")
        if not nus or any(nu < 1 for nu in nus):
            raise ConfigError(f"nus must be a non-empty list of positive integers, got {raw.get('nus')!r}", "nus")

        seed = _as_int(raw.get("seed"), "seed")
        if not 0 <= seed <= SEED_MASK:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}", "seed")

        config = cls(
            command=command,
            scheme=scheme,
            params=params,
            preset=preset,
            table=table,
            runs=runs,
            nus=nus,
            seed=seed,
            k_max=_as_int(raw.get("k_max"), "k_max"),
            out=raw.get("out") or None,
            html=raw.get("html") or None,
            resolution=_as_int(raw.get("resolution"), "resolution"),
            search_resolution=_as_int(raw.get("search_resolution"), "search_resolution"),
            schemes=cls._resolve_schemes(raw.get("schemes")),
            workers=_as_int(raw.get("workers"), "workers"),
            renormalize=_as_bool(raw.get("renormalize")),
            quick=_as_bool(raw.get("quick")),
            tolerance=_as_float(raw.get("tolerance"), "tolerance"),
            log_level=str(raw.get("log_level") or "INFO").upper(),
        )
        try:
            config.restriction = RestrictionConvention.parse(raw.get("restriction") or "standard")
        except ValueError as e:
            raise ConfigError(str(e), "restriction")

        minimums = (("k_max", 1), ("resolution", MIN_RESOLUTION), ("search_resolution", MIN_RESOLUTION),
                    ("workers", 1))
        for name, minimum in minimums:
            if getattr(config, name) < minimum:
                raise ConfigError(f"{name} must be >= {minimum}, got {getattr(config, name)}", name)
        if not 0 < config.tolerance < 1:
            raise ConfigError(f"tolerance must lie in (0, 1), got {config.tolerance}", "tolerance")
        return config

    @staticmethod
    def _resolve_scheme(raw, plan, explicit):
        preset = raw.get("preset") or None
        scheme_tag = raw.get("scheme") if "scheme" in explicit else None
        if not preset and not scheme_tag:
            if plan is not None:
                preset = plan["preset"]
            else:
                scheme_tag = raw.get("scheme")

        try:
            scheme = RelaxScheme.parse(scheme_tag) if scheme_tag else None
            if preset:
                preset_scheme, params = resolve_preset(preset)
                if scheme is not None and scheme is not preset_scheme:
                    raise ConfigError(f"preset {preset} belongs to {preset_scheme.value}, "
                                      f"not {scheme.value}", "preset")
                scheme = preset_scheme
            elif scheme is not None:
                params = default_params(scheme)
            else:
                raise ConfigError("either scheme or preset must be given", "scheme")
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e), "preset" if preset else "scheme")

        overrides = {}
        for name in PARAM_KEYS:
            if raw.get(name) is not None:
                overrides[name] = _as_float(raw[name], name)
        try:
            params = params.replace(**overrides) if overrides else params
        except ValueError as e:
            raise ConfigError(str(e), next(iter(overrides)))
        return scheme, params, str(preset).lower() if preset else None

    @staticmethod
    def _resolve_schemes(value) -> List[RelaxScheme]:
        try:
            return [RelaxScheme.parse(tag) for tag in _split(value)]
        except ValueError as e:
            raise ConfigError(str(e), "schemes")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with experiment sections")
    common.add_argument("--section", help="INI section to read (default: the subcommand name)")
    common.add_argument("--seed", type=int, help="64-bit base seed")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("--html", help="also write an HTML summary to this path")
    common.add_argument("--resolution", type=int, help="frequency samples per axis for LFA evaluations")
    common.add_argument("--search-resolution", dest="search_resolution", type=int,
                        help="frequency samples per axis during parameter searches")
    common.add_argument("--kmax", dest="k_max", type=int, help="maximum number of cycles per measurement")
    common.add_argument("--scheme", help="relaxation scheme tag")
    common.add_argument("--schemes", help="comma-separated schemes for lfa-scan")
    common.add_argument("--preset", help="named parameter preset")
    common.add_argument("--table", help="built-in run plan: table1, table2 or table3")
    common.add_argument("--grid-sizes", dest="grid_sizes", help="comma-separated grid sizes")
    common.add_argument("--kinds", help="comma-separated cycle kinds (TwoGrid, V, W)")
    common.add_argument("--nus", help="comma-separated total sweep counts")
    for name in PARAM_KEYS:
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    common.add_argument("--restriction", help="velocity restriction convention: standard or shifted")
    common.add_argument("--renormalize", action="store_const", const=True,
                        help="rescale the iterate after every cycle")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--tolerance", type=float, help="relative defect target for solve")
    common.add_argument("--quick", action="store_const", const=True, help="verify: skip the table criteria")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING, ...")

    parser = argparse.ArgumentParser(prog="mgstokes",
                                     description="Mass-based relaxation multigrid for the MAC Stokes system")
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True
    subparsers.add_parser("tables", parents=[common], help="measure multigrid convergence factors")
    subparsers.add_parser("lfa-scan", parents=[common], help="optimize smoothing factors by grid search")
    subparsers.add_parser("verify", parents=[common], help="run the acceptance suite")
    subparsers.add_parser("solve", parents=[common], help="solve one manufactured problem")
    return parser


def read_ini(path: str, section: Optional[str], command: str) -> Dict[str, str]:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"config file {path} could not be read", "config")
    name = section or command
    if parser.has_section(name):
        return dict(parser.items(name))
    if section:
        raise ConfigError(f"config file {path} has no section [{section}]", "section")
    return dict(parser.defaults())


def load_config(argv: Optional[List[str]] = None) -> ExperimentConfig:
    """
    Parse the command line and merge every configuration layer.

    Raises:
        ConfigError: invalid value or unreadable config file
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if not e.code:
            raise
        raise ConfigError(f"invalid command line (exit {e.code})", "argv")

    raw = dict(DEFAULTS)
    explicit = set()

    for name in DEFAULTS:
        value = get_task_param_default(name)
        if value is not None:
            raw[name] = value
            explicit.add(name)
    for name in PARAM_KEYS:
        value = get_task_param_default(name)
        if value is not None:
            raw[name] = value
    if environ.get(LOG_LEVEL_ENV):
        raw["log_level"] = environ[LOG_LEVEL_ENV]

    if args.config:
        for name, value in read_ini(args.config, args.section, args.command).items():
            raw[name] = value
            explicit.add(name)

    for name, value in vars(args).items():
        if name in ("command", "config", "section") or value is None:
            continue
        raw[name] = value
        explicit.add(name)

    return ExperimentConfig.from_mapping(args.command, raw, frozenset(explicit))
