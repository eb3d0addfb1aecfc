"""Exponential squared loss, orthogonal residuals and the IPW-weighted objective.

The data-fit term minimised by the estimator is

    D(w) = sum_{i: F_i = 1} (F_i / pi_i) * (1 - exp(-r_i(w)^2 / h))

where ``r_i`` is either the plain residual ``y_i - t_i'w`` or, when the
measurement-error correction is active, the orthogonal residual
``(y_i - t_i'w) / sqrt(1 + ||w||^2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Condition(str, enum.Enum):
    """Which corrections are applied when fitting.

    ``FULL`` uses both inverse-probability weights and the orthogonal
    residual; ``ERROR_ONLY`` keeps the orthogonal residual but gives every
    complete row unit weight; ``MISSING_ONLY`` keeps the weights but uses
    the plain residual; ``NONE`` is the naive complete-case fit.
    """

    FULL = "full"
    ERROR_ONLY = "error_only"
    MISSING_ONLY = "missing_only"
    NONE = "none"

    @property
    def uses_ipw(self) -> bool:
        return self in (Condition.FULL, Condition.MISSING_ONLY)

    @property
    def uses_orthogonal(self) -> bool:
        return self in (Condition.FULL, Condition.ERROR_ONLY)


@dataclass(frozen=True)
class Dataset:
    """Observed regression data with possibly missing covariate cells.

    Parameters
    ----------
    response : (n,) array
        Fully observed response ``Y``.
    design : (n, d) array
        Observed covariates ``T`` (equal to ``X`` without measurement
        error). Absent cells hold NaN.
    complete : (n,) array of {0, 1}
        ``F_i``; 1 when row ``i`` has no absent cell.
    observed_block, missing_block : tuple of int
        Partition of the column indices into never-missing and
        possibly-missing columns.
    names : tuple of str, optional
        Column identifiers, used by the CLI and reports.
    """

    response: np.ndarray
    design: np.ndarray
    complete: np.ndarray
    observed_block: tuple
    missing_block: tuple
    names: tuple = field(default=())

    def __post_init__(self):
        y = np.asarray(self.response, dtype=float)
        X = np.asarray(self.design, dtype=float)
        F = np.asarray(self.complete).astype(np.int8)
        if X.ndim != 2:
            raise ValueError("design must be a 2-d array")
        n, d = X.shape
        if n < 1 or d < 1:
            raise ValueError("dataset needs n >= 1 and d >= 1")
        if y.shape != (n,) or F.shape != (n,):
            raise ValueError("response / complete flags do not match design rows")
        if not np.all(np.isfinite(y)):
            raise ValueError("response must be fully observed and finite")
        if not np.all((F == 0) | (F == 1)):
            raise ValueError("complete flags must be 0 or 1")
        obs = tuple(int(k) for k in self.observed_block)
        mis = tuple(int(k) for k in self.missing_block)
        if set(obs) & set(mis):
            raise ValueError("observed and missing blocks overlap")
        if sorted(obs + mis) != list(range(d)):
            raise ValueError("observed and missing blocks must partition the columns")
        absent = np.isnan(X)
        if np.any(np.isinf(X)):
            raise ValueError("design contains infinite values")
        if absent[F == 1].any():
            raise ValueError("a row flagged complete has absent cells")
        if obs and absent[:, list(obs)].any():
            raise ValueError("absent cell in an observed-block column")
        names = tuple(str(s) for s in self.names) if self.names else tuple(f"x{k + 1}" for k in range(d))
        if len(names) != d:
            raise ValueError("names must have one entry per column")
        for arr in (y, X, F):
            arr.setflags(write=False)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "complete", F)
        object.__setattr__(self, "observed_block", obs)
        object.__setattr__(self, "missing_block", mis)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]

    @property
    def absent(self) -> np.ndarray:
        return np.isnan(self.design)

    @classmethod
    def from_arrays(cls, response, design, names: Sequence[str] = ()) -> "Dataset":
        """Build a dataset from arrays, deriving flags and blocks from NaNs."""
        X = np.asarray(design, dtype=float)
        absent = np.isnan(X)
        complete = (~absent.any(axis=1)).astype(np.int8)
        cols = absent.any(axis=0)
        return cls(
            response=response,
            design=X,
            complete=complete,
            observed_block=tuple(np.flatnonzero(~cols)),
            missing_block=tuple(np.flatnonzero(cols)),
            names=tuple(names),
        )

    def select_columns(self, columns: Sequence[int]) -> "Dataset":
        """Restrict to a subset of columns, recomputing flags and blocks."""
        cols = [int(c) for c in columns]
        return Dataset.from_arrays(
            self.response, self.design[:, cols], names=[self.names[c] for c in cols]
        )

    def select_rows(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            response=self.response[rows],
            design=self.design[rows],
            complete=self.complete[rows],
            observed_block=self.observed_block,
            missing_block=self.missing_block,
            names=self.names,
        )

    def complete_case(self):
        """Return ``(T_c, y_c, idx)`` for the rows with ``F_i = 1``."""
        idx = np.flatnonzero(self.complete == 1)
        T = self.design[idx]
        # rows with F_i = 0 are never read, so this must hold
        assert not np.isnan(T).any(), "absent cell read in a complete row"
        return T, self.response[idx], idx


@dataclass(frozen=True)
class OptimizerSettings:
    step_size: float = 0.5
    max_iters: int = 2000
    grad_tol: float = 1e-6

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")


def default_hbic_grid() -> tuple:
    return tuple(float(v) for v in np.logspace(-3, 1, 30))


@dataclass(frozen=True)
class FitConfig:
    """Settings shared by the objective, the optimiser and HBIC selection.

    ``h`` is the loss tuning parameter. ``en_rule`` scales the HBIC
    complexity sequence ``E_n = en_rule * log(d)``. ``continuation``
    switches on the warm-start ladder in ``h`` used by the optimiser (see
    :func:`robsel.estimator.fit_penalized`). ``max_size`` caps the model
    size admitted to HBIC selection; ``None`` means ``n_complete // 4``.
    ``prune`` runs the single-removal support search after descent.
    """

    h: float = 1.0
    condition: Condition = Condition.FULL
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    hbic_grid: tuple = field(default_factory=default_hbic_grid)
    atan_u: float = 0.005
    en_rule: float = 1.0
    continuation: bool = True
    max_size: int | None = None
    prune: bool = True

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("h must be a positive finite number")
        object.__setattr__(self, "condition", Condition(self.condition))
        grid = tuple(float(v) for v in self.hbic_grid)
        if not grid or any(not v > 0 for v in grid):
            raise ValueError("hbic_grid must be nonempty and strictly positive")
        object.__setattr__(self, "hbic_grid", grid)
        if not self.atan_u > 0:
            raise ValueError("atan_u must be positive")
        if not self.en_rule > 0:
            raise ValueError("en_rule must be positive")
        if self.max_size is not None and int(self.max_size) < 0:
            raise ValueError("max_size must be nonnegative")
        if isinstance(self.optimizer, dict):
            object.__setattr__(self, "optimizer", OptimizerSettings(**self.optimizer))


def _check_h(h) -> None:
    if not (np.isscalar(h) and h > 0 and math.isfinite(h)):
        raise ValueError(f"h must be positive and finite, got {h!r}")


def exp_sq_loss(residual, h):
    """``1 - exp(-r^2 / h)``; accepts scalars or arrays."""
    _check_h(h)
    r = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual must be finite")
    out = -np.expm1(-(r * r) / h)
    return float(out) if out.ndim == 0 else out


def exp_sq_loss_grad(residual, h):
    """Derivative of :func:`exp_sq_loss` with respect to the residual."""
    _check_h(h)
    r = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual must be finite")
    out = (2.0 * r / h) * np.exp(-(r * r) / h)
    return float(out) if out.ndim == 0 else out


def orthogonal_residual(y: float, t_row, omega) -> float:
    t = np.asarray(t_row, dtype=float)
    w = np.asarray(omega, dtype=float)
    if t.shape != w.shape or t.ndim != 1:
        raise ValueError(f"dimension mismatch: t_row {t.shape} vs omega {w.shape}")
    return float((y - t @ w) / math.sqrt(1.0 + w @ w))


def row_weights(data: Dataset, weights) -> np.ndarray:
    """``F_i / pi_i`` restricted to the complete rows."""
    probs = np.asarray(getattr(weights, "probs", weights), dtype=float)
    if probs.shape != (data.n,):
        raise ValueError(f"weights have length {probs.shape[0]}, expected {data.n}")
    idx = np.flatnonzero(data.complete == 1)
    p = probs[idx]
    if np.any(~(p > 0)):
        raise ValueError("propensity must be positive for every complete row")
    return 1.0 / p


class CompleteCaseProblem:
    """Objective and gradient evaluated on the complete rows only.

    Precomputes the complete-case design so repeated evaluations inside the
    optimiser avoid re-slicing the dataset.
    """

    def __init__(self, data: Dataset, weights, h: float, orthogonal: bool):
        _check_h(h)
        self.T, self.y, self.rows = data.complete_case()
        self.w = row_weights(data, weights)
        self.h = float(h)
        self.orthogonal = bool(orthogonal)
        self.d = data.d

    def _residuals(self, omega):
        raw = self.y - self.T @ omega
        if self.orthogonal:
            scale = math.sqrt(1.0 + float(omega @ omega))
            return raw / scale, scale
        return raw, 1.0

    def coordinate_curvature(self, k: int, omega) -> float:
        """Upper bound on the second derivative of the data fit along ``w_k``.

        Uses ``psi' <= 2 / h`` and ignores the (smaller) curvature of the
        orthogonal scale factor.
        """
        scale2 = 1.0 + float(omega @ omega) if self.orthogonal else 1.0
        col = self.T[:, k]
        return 2.0 / self.h * float(self.w @ (col * col)) / scale2

    def value(self, omega) -> float:
        r, _ = self._residuals(omega)
        return float(self.w @ -np.expm1(-(r * r) / self.h))

    def value_and_grad(self, omega):
        omega = np.asarray(omega, dtype=float)
        r, scale = self._residuals(omega)
        e = np.exp(-(r * r) / self.h)
        val = float(self.w @ (1.0 - e))
        psi = self.w * (2.0 * r / self.h) * e
        # dr_i/dw = -t_i / s - r_i * w / s^2
        grad = -(self.T.T @ psi) / scale
        if self.orthogonal:
            grad -= (psi @ r) * omega / (scale * scale)
        return val, grad


def weighted_objective(data: Dataset, omega, cfg: FitConfig, weights) -> float:
    """IPW-weighted exponential squared loss summed over complete rows."""
    omega = _coef(omega, data.d)
    prob = CompleteCaseProblem(data, weights, cfg.h, cfg.condition.uses_orthogonal)
    return prob.value(omega)


def objective_gradient(data: Dataset, omega, cfg: FitConfig, weights) -> np.ndarray:
    omega = _coef(omega, data.d)
    prob = CompleteCaseProblem(data, weights, cfg.h, cfg.condition.uses_orthogonal)
    return prob.value_and_grad(omega)[1]


def _coef(omega, d: int) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if w.shape != (d,):
        raise ValueError(f"coefficient vector has shape {w.shape}, expected ({d},)")
    if not np.all(np.isfinite(w)):
        raise ValueError("coefficients must be finite")
    return w
