from dataclasses import dataclass, field
from typing import Dict, List, Optional

AGREEMENT_TOLERANCE = 0.02
# the nu = 4 column degrades slightly against mu^nu
AGREEMENT_TOLERANCE_NU4 = 0.03

STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"

KIND_ORDER = {"TwoGrid": 0, "V": 1, "W": 2}


def agreement_tolerance(nu: int) -> float:
    return AGREEMENT_TOLERANCE_NU4 if nu >= 4 else AGREEMENT_TOLERANCE


def agreement_label(rho: Optional[float], prediction: Optional[float], nu: int) -> str:
    """
    Label a measured factor against its LFA prediction.

    Returns:
        str: "agree", "drift", or "" when there is nothing to compare
    """
    if rho is None or prediction is None:
        return ""
    if abs(rho - prediction) <= agreement_tolerance(nu):
        return "agree"
    return "drift"


class ResultRow(object):
    """
    One multigrid convergence measurement.
    Used by the table runs and by the verify gate.
    """

    COLUMNS = ["scheme", "kind", "h", "nu", "rho", "k_eff", "prediction", "deviation",
               "agreement", "expected", "status", "wall_time", "seed"]

    def __init__(self, scheme, kind, n, nu, seed, rho=None, k_eff=0, prediction=None,
                 expected=None, wall_time=0.0, status=STATUS_OK, message=""):
        self.scheme = scheme
        self.kind = kind
        self.n = n
        self.nu = nu
        self.seed = seed
        self.rho = rho
        self.k_eff = k_eff
        self.prediction = prediction
        self.expected = expected
        self.wall_time = wall_time
        self.status = status
        self.message = message

    @property
    def h(self) -> str:
        return f"1/{self.n}"

    @property
    def diverged(self) -> bool:
        return self.status == STATUS_DIVERGED

    @property
    def deviation(self) -> Optional[float]:
        if self.rho is None or self.prediction is None:
            return None
        return abs(self.rho - self.prediction)

    @property
    def agreement(self) -> str:
        return agreement_label(self.rho, self.prediction, self.nu)

    def sort_key(self):
        return self.scheme, KIND_ORDER.get(self.kind, 99), self.n, self.nu

    def to_record(self, include_wall_time: bool = True) -> Dict[str, str]:
        record = {
            "scheme": self.scheme,
            "kind": self.kind,
            "h": self.h,
            "nu": str(self.nu),
            "rho": _fmt(self.rho),
            "k_eff": str(self.k_eff),
            "prediction": _fmt(self.prediction),
            "deviation": _fmt(self.deviation),
            "agreement": self.agreement,
            "expected": _fmt(self.expected, 3),
            "status": self.status,
            "wall_time": f"{self.wall_time:.3f}" if include_wall_time else "",
            "seed": str(self.seed),
        }
        return record

    def __repr__(self):
        return f"ResultRow({self.scheme}, {self.kind}, h={self.h}, nu={self.nu}, rho={_fmt(self.rho)})"


@dataclass
class LfaRow:
    scheme: str
    params: Dict[str, float]
    mu: float
    expected: float
    evaluations: int = 0
    resolution: int = 0

    COLUMNS = ["scheme", "omega", "alpha", "sigma", "omega_j", "mu", "expected", "deviation",
               "resolution", "evaluations"]

    @property
    def deviation(self) -> float:
        return abs(self.mu - self.expected)

    def sort_key(self):
        return self.scheme

    def to_record(self, include_wall_time: bool = True) -> Dict[str, str]:
        record = {name: _fmt(self.params.get(name)) for name in ("omega", "alpha", "sigma", "omega_j")}
        record.update({
            "scheme": self.scheme,
            "mu": _fmt(self.mu),
            "expected": _fmt(self.expected),
            "deviation": _fmt(self.deviation),
            "resolution": str(self.resolution),
            "evaluations": str(self.evaluations),
        })
        return record


@dataclass
class SolveResult:
    scheme: str
    kind: str
    n: int
    nu: int
    iterations: int
    relative_defect: float
    error: float
    average_rate: float
    converged: bool
    wall_time: float = 0.0
    history: List[float] = field(default_factory=list)

    COLUMNS = ["scheme", "kind", "h", "nu", "iterations", "relative_defect", "error", "rate", "converged",
               "wall_time"]

    def to_record(self, include_wall_time: bool = True) -> Dict[str, str]:
        return {
            "scheme": self.scheme,
            "kind": self.kind,
            "h": f"1/{self.n}",
            "nu": str(self.nu),
            "iterations": str(self.iterations),
            "relative_defect": f"{self.relative_defect:.3e}",
            "error": f"{self.error:.3e}",
            "rate": _fmt(self.average_rate, 4),
            "converged": "yes" if self.converged else "no",
            "wall_time": f"{self.wall_time:.3f}" if include_wall_time else "",
        }


@dataclass
class CriterionResult:
    """Outcome of one acceptance criterion."""

    key: str
    description: str
    status: str
    measured: List[str] = field(default_factory=list)
    message: str = ""

    COLUMNS = ["key", "status", "description", "measured", "message"]

    @property
    def passed(self) -> bool:
        return self.status != "FAILED"

    def sort_key(self):
        return self.key

    def to_record(self, include_wall_time: bool = True) -> Dict[str, str]:
        return {"key": self.key, "status": self.status, "description": self.description,
                "measured": "; ".join(self.measured), "message": self.message}


def _fmt(value, digits: int = 6) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"
