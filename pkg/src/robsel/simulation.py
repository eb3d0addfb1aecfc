"""Monte Carlo study: data generation, corruption, fitting and model-error tables."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .estimator import select_f
from .loss import Condition, Dataset, FitConfig
from .penalties import Family, PenaltySpec
from .propensity import DEFAULT_CLIP_FLOOR, PropensityWeights, estimate_propensity

log = logging.getLogger(__name__)

TRUE_SUPPORT = (1, 3, 5)  # zero-based positions of X2, X4, X6
TRUE_VALUES = (1.0, 2.0, 4.0)
MISSING_COLUMNS = (0, 2, 4)  # X1, X3, X5
MISSING_COEFS = (1.0, 2.0, -2.0, 4.0)  # intercept, Y, X3, X5


class Correlation(str, enum.Enum):
    IND = "ind"
    CORR = "corr"


class ErrorDist(str, enum.Enum):
    NORMAL = "normal"
    T3 = "t3"
    CHISQ2 = "chisq2"


@dataclass(frozen=True)
class SimulationScenario:
    n: int = 100
    d: int = 300
    correlation: Correlation = Correlation.CORR
    error_dist: ErrorDist = ErrorDist.NORMAL
    condition: Condition = Condition.FULL
    penalty_family: Family = Family.ATAN
    h: float = 0.1
    me_variance: float = 0.3
    replications: int = 300
    seed: int = 0
    noise_scale: float = 1.0
    missingness: bool = True
    missing_coefs: tuple = MISSING_COEFS
    clip_floor: float = DEFAULT_CLIP_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "correlation", Correlation(self.correlation))
        object.__setattr__(self, "error_dist", ErrorDist(self.error_dist))
        object.__setattr__(self, "condition", Condition(self.condition))
        object.__setattr__(self, "penalty_family", Family(self.penalty_family))
        object.__setattr__(self, "missing_coefs", tuple(float(c) for c in self.missing_coefs))
        if self.n < 1 or self.replications < 1:
            raise ValueError("n and replications must be >= 1")
        if self.d < 7:
            raise ValueError("d must be at least 7 to hold the true support")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.me_variance < 0:
            raise ValueError("me_variance must be nonnegative")
        if len(self.missing_coefs) != 4:
            raise ValueError("missing_coefs needs (intercept, Y, X3, X5)")

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, enum.Enum):
                out[k] = v.value
        out["missing_coefs"] = list(self.missing_coefs)
        return out


def true_coefficients(d: int) -> np.ndarray:
    w = np.zeros(d)
    w[list(TRUE_SUPPORT)] = TRUE_VALUES
    return w


def covariance(d: int, correlation: Correlation) -> np.ndarray:
    if Correlation(correlation) is Correlation.IND:
        return np.eye(d)
    idx = np.arange(d)
    return 0.5 ** np.abs(idx[:, None] - idx[None, :])


def draw_errors(dist: ErrorDist, size: int, rng: np.random.Generator) -> np.ndarray:
    dist = ErrorDist(dist)
    if dist is ErrorDist.NORMAL:
        return rng.standard_normal(size)
    if dist is ErrorDist.T3:
        return rng.standard_t(3, size)
    # chi-square(2) as a sum of two squared normals, left uncentred
    z = rng.standard_normal((size, 2))
    return np.sum(z * z, axis=1)


def generate_clean(scenario: SimulationScenario, rng: np.random.Generator):
    """Draw ``(X, Y, omega_true, eps)`` with ``Y = X omega_true + eps``."""
    n, d = scenario.n, scenario.d
    Z = rng.standard_normal((n, d))
    if scenario.correlation is Correlation.CORR:
        L = np.linalg.cholesky(covariance(d, Correlation.CORR))
        X = Z @ L.T
    else:
        X = Z
    omega = true_coefficients(d)
    eps = scenario.noise_scale * draw_errors(scenario.error_dist, n, rng)
    Y = X @ omega + eps
    return X, Y, omega, eps


def apply_measurement_error(X, me_variance: float, rng: np.random.Generator) -> np.ndarray:
    """Return ``T = X + G`` with ``G`` i.i.d. ``N(0, me_variance)``."""
    if me_variance < 0:
        raise ValueError("me_variance must be nonnegative")
    X = np.asarray(X, dtype=float)
    if me_variance == 0:
        return X.copy()
    return X + math.sqrt(me_variance) * rng.standard_normal(X.shape)


def completeness_probability(T, Y, coefs=MISSING_COEFS, offset: float = 0.0) -> np.ndarray:
    """Logistic completeness probability on ``1 + 2 Y - 2 X3 + 4 X5``.

    ``offset`` is added to the linear predictor; ``+inf`` forces every row
    to be complete.
    """
    T = np.asarray(T, dtype=float)
    b0, by, b3, b5 = coefs
    eta = b0 + by * np.asarray(Y, dtype=float) + b3 * T[:, 2] + b5 * T[:, 4] + offset
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-eta))


def apply_missingness(T, Y, rng: np.random.Generator, coefs=MISSING_COEFS, offset: float = 0.0) -> Dataset:
    """Blank columns X1, X3, X5 in rows drawn incomplete."""
    T = np.array(T, dtype=float)
    if T.shape[1] < 5:
        raise ValueError("missingness model needs d >= 5")
    prob = completeness_probability(T, Y, coefs, offset)
    F = (rng.random(T.shape[0]) < prob).astype(np.int8)
    T[np.ix_(F == 0, MISSING_COLUMNS)] = np.nan
    d = T.shape[1]
    return Dataset(
        response=Y,
        design=T,
        complete=F,
        observed_block=tuple(k for k in range(d) if k not in MISSING_COLUMNS),
        missing_block=MISSING_COLUMNS,
    )


def model_error(omega_hat, omega_true) -> float:
    a = np.asarray(omega_hat, dtype=float)
    b = np.asarray(omega_true, dtype=float)
    if a.shape != b.shape:
        raise ValueError("coefficient vectors differ in length")
    diff = a - b
    return float(diff @ diff)


def child_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replication),)))


def simulate_dataset(scenario: SimulationScenario, rng: np.random.Generator):
    """One replication's observed data and true coefficients."""
    X, Y, omega, _ = generate_clean(scenario, rng)
    T = apply_measurement_error(X, scenario.me_variance, rng)
    if scenario.missingness:
        data = apply_missingness(T, Y, rng, scenario.missing_coefs)
    else:
        d = scenario.d
        data = Dataset(Y, T, np.ones(scenario.n, dtype=np.int8), tuple(range(d)), ())
    return data, omega


def condition_weights(data: Dataset, condition: Condition, clip_floor: float = DEFAULT_CLIP_FLOOR):
    if Condition(condition).uses_ipw and data.missing_block:
        return estimate_propensity(data, clip_floor=clip_floor)
    return PropensityWeights.ones(data.n)


def fit_config_for(scenario: SimulationScenario, base: FitConfig | None = None) -> FitConfig:
    base = base or FitConfig()
    return replace(base, h=scenario.h, condition=scenario.condition)


def run_replication(scenario: SimulationScenario, r: int, base_cfg: FitConfig | None = None) -> dict:
    rng = child_rng(scenario.seed, r)
    data, omega = simulate_dataset(scenario, rng)
    cfg = fit_config_for(scenario, base_cfg)
    weights = condition_weights(data, scenario.condition, scenario.clip_floor)
    pen = PenaltySpec(scenario.penalty_family, u=cfg.atan_u)
    res = select_f(data, weights, pen, cfg, seed=scenario.seed)
    tp = sum(1 for k in TRUE_SUPPORT if res.omega_hat[k] != 0)
    return {
        "replication": r,
        "error": model_error(res.omega_hat, omega),
        "size": res.size,
        "tp": tp,
        "f": res.f_selected,
        "n_complete": int(data.complete.sum()),
        "clipped": getattr(weights, "n_clipped", 0),
    }


@dataclass
class MonteCarloReport:
    scenario: SimulationScenario
    mean_error: float
    se: float
    mean_size: float
    mean_tp: float
    replications: int
    failures: int
    valid: bool
    per_replication: list = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def row(self) -> dict:
        s = self.scenario
        return {
            "error_dist": s.error_dist.value,
            "correlation": s.correlation.value,
            "penalty": s.penalty_family.value,
            "h": s.h,
            "condition": s.condition.value,
            "mean_error": self.mean_error,
            "se": self.se,
            "mean_size": self.mean_size,
            "mean_tp": self.mean_tp,
            "failures": self.failures,
            "seed": s.seed,
        }


def run_monte_carlo(scenario: SimulationScenario, base_cfg: FitConfig | None = None) -> MonteCarloReport:
    rows, failures = [], 0
    for r in range(scenario.replications):
        try:
            rows.append(run_replication(scenario, r, base_cfg))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            failures += 1
            log.warning("replication %d failed: %s", r, exc)
    errs = np.array([row["error"] for row in rows])
    k = errs.size
    mean = float(errs.mean()) if k else float("nan")
    se = float(errs.std(ddof=1) / math.sqrt(k)) if k > 1 else float("nan")
    return MonteCarloReport(
        scenario=scenario,
        mean_error=mean,
        se=se,
        mean_size=float(np.mean([row["size"] for row in rows])) if k else float("nan"),
        mean_tp=float(np.mean([row["tp"] for row in rows])) if k else float("nan"),
        replications=k,
        failures=failures,
        valid=failures <= 0.1 * scenario.replications,
        per_replication=rows,
    )
