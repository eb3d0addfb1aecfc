"""Penalized fitting by thresholded gradient descent and HBIC selection of ``f``."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .loss import CompleteCaseProblem, Dataset, FitConfig
from .penalties import PenaltySpec, penalty_gradient, penalty_total
from .propensity import PropensityWeights

log = logging.getLogger(__name__)

MAX_HALVINGS = 30
MAX_ENTRY_HALVINGS = 6


LADDER_FACTOR = 10.0
PRUNE_MAX_ITERS = 50
PRUNE_TRUST = 2.0


def _bb_step(omega, g, prev, fallback: float) -> float:
    """Barzilai-Borwein step ``|ds|^2 / ds.dg`` over the coordinates active in both iterates.

    After a support change the gradient difference mixes in the penalty
    slope of the coordinate that switched, which says nothing about the
    curvature, so ``fallback`` is used instead.
    """
    if not np.array_equal(omega != 0, prev[0] != 0):
        return fallback
    ds, dg = omega - prev[0], g - prev[1]
    sy = float(ds @ dg)
    t = float(ds @ ds) / sy if sy > 0 else fallback
    return min(max(t, 1e-12), 1e12)


class NumericalFailure(RuntimeError):
    """Raised when the objective stops being finite during descent."""


@dataclass
class EstimateResult:
    omega_hat: np.ndarray
    active_set: list
    objective: float
    hbic: float
    f_selected: float
    iterations: int
    converged: bool
    seed: int | None = None
    data_fit: float = float("nan")
    grad_norm: float = float("nan")
    threshold: float = 0.0
    family: str = ""
    h: float = float("nan")
    condition: str = ""
    perfect_fit: bool = False
    hbic_trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega_hat = np.asarray(self.omega_hat, dtype=float)
        if sorted(self.active_set) != [int(k) for k in np.flatnonzero(self.omega_hat)]:
            raise ValueError("active_set must equal the nonzero support of omega_hat")

    @property
    def size(self) -> int:
        return len(self.active_set)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["omega_hat"] = [float(v) for v in self.omega_hat]
        for key in ("objective", "hbic", "data_fit", "grad_norm"):
            out[key] = _json_float(out[key])
        out["hbic_trace"] = [
            {k: (_json_float(v) if isinstance(v, float) else v) for k, v in row.items()}
            for row in self.hbic_trace
        ]
        return out


def _json_float(v):
    if v is None or math.isfinite(v):
        return v
    return str(v)


def _threshold(omega: np.ndarray, thresh: float) -> np.ndarray:
    out = omega.copy()
    out[np.abs(out) < thresh] = 0.0
    return out


def _descend(prob: CompleteCaseProblem, pen: PenaltySpec, settings, omega0, n: int, thresh: float, frozen=None):
    """Thresholded gradient descent with backtracking on ``(D + P) / n``.

    Each iteration takes a gradient step on the active coordinates plus, at
    most, the inactive coordinate with the largest data-fit gradient when
    that gradient reaches the entry level ``thresh / step_size``. Any
    coordinate left below ``thresh`` in magnitude is set to zero. The trial
    step is a Barzilai-Borwein guess (``step_size`` on the first iteration)
    halved until the penalized objective strictly decreases; if the step
    with the entering coordinate never decreases it, the active-only step is
    tried instead. A step that admits a new coordinate starts no smaller
    than the inverse curvature bound along that coordinate, so the entrant
    can clear the steep part of a nonconvex penalty near zero; such a step
    is halved at most ``MAX_ENTRY_HALVINGS`` times before the entrant is
    set aside until the support next changes.

    Coordinates flagged in ``frozen`` are held at zero.
    """
    omega = _threshold(np.asarray(omega0, dtype=float), thresh)
    frozen = np.zeros(omega.shape, dtype=bool) if frozen is None else np.asarray(frozen, dtype=bool)
    omega[frozen] = 0.0
    val, grad = prob.value_and_grad(omega)
    obj = (val + penalty_total(pen, omega)) / n
    entry = thresh / settings.step_size
    trial = settings.step_size
    prev = None
    last_step = trial
    blocked = np.zeros(omega.shape, dtype=bool)
    it = 0
    converged = False
    gnorm = math.inf
    while True:
        if not math.isfinite(obj):
            raise NumericalFailure(f"non-finite objective at iteration {it}")
        g = (grad + penalty_gradient(pen, omega)) / n
        active = omega != 0
        gnorm = float(np.linalg.norm(g[active]))
        inactive_g = np.where(active | blocked | frozen, 0.0, np.abs(g))
        k = int(np.argmax(inactive_g))
        wants_in = inactive_g[k] >= entry
        if gnorm <= settings.grad_tol and not wants_in:
            converged = True
            break
        if it >= settings.max_iters:
            break
        if prev is not None:
            trial = _bb_step(omega, g, prev, last_step)
        masks = []
        if wants_in:
            with_k = active.copy()
            with_k[k] = True
            masks.append(with_k)
        if active.any():
            masks.append(active)
        accepted = False
        for mask in masks:
            gm = np.where(mask, g, 0.0)
            step = trial
            if mask[k] and not active[k]:
                curv = prob.coordinate_curvature(k, omega) / n
                if curv > 0:
                    step = max(step, 1.0 / curv)
            entering = mask[k] and not active[k]
            for _ in range((MAX_ENTRY_HALVINGS if entering else MAX_HALVINGS) + 1):
                cand = _threshold(omega - step * gm, thresh)
                if entering and cand[k] == 0:
                    break
                cval, cgrad = prob.value_and_grad(cand)
                cobj = (cval + penalty_total(pen, cand)) / n
                if cobj < obj:
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                break
            if entering:
                # entering k never paid off from here; retry only after the support changes
                blocked[k] = True
        it += 1
        if not accepted:
            if wants_in:
                continue
            break
        if not np.array_equal(cand != 0, active):
            blocked[:] = False
        prev = (omega, g)
        last_step = step
        omega, val, grad, obj = cand, cval, cgrad, cobj
    return omega, val, obj * n, it, converged, gnorm


def _prune(prob: CompleteCaseProblem, pen: PenaltySpec, settings, state, n: int, thresh: float):
    """Local search over supports: drop one active coordinate and re-descend.

    Near zero a nonconvex penalty acts like a fixed charge per coefficient,
    which a gradient step cannot see; this checks each active coordinate,
    smallest first, and keeps a removal whenever the re-descended objective
    is lower. Removals are first tried with the rest of the support fixed,
    then, once none helps, with other coordinates free to enter in place of
    the dropped one. Trial descents are capped at ``PRUNE_MAX_ITERS``
    iterations. After any accepted removal one full descent is run from
    the result.

    The orthogonal objective stays bounded as ``|omega|`` grows, so there a
    removal could buy a lower value by sending a surviving coefficient off
    to infinity. On such problems a trial is rejected when its largest
    coefficient exceeds ``PRUNE_TRUST`` times the larger of the largest
    coefficient before pruning and the largest single-covariate slope
    scale ``sd(y) / sd(t_j)`` on the complete rows.
    """
    omega, obj = state[0], state[2]
    trial_settings = replace(settings, max_iters=min(settings.max_iters, PRUNE_MAX_ITERS))
    radius = math.inf
    if prob.orthogonal:
        sd_t = prob.T.std(axis=0)
        slopes = prob.y.std() / sd_t[sd_t > 0]
        radius = PRUNE_TRUST * max(float(np.max(np.abs(omega), initial=0.0)), float(np.max(slopes, initial=1.0)))
    iters = 0
    pruned = False
    swaps = False
    while True:
        improved = False
        for k in sorted(np.flatnonzero(omega), key=lambda j: (abs(omega[j]), j)):
            start = omega.copy()
            start[k] = 0.0
            if swaps:
                frozen = np.zeros(omega.shape, dtype=bool)
                frozen[k] = True
            else:
                frozen = start == 0
            cand = _descend(prob, pen, trial_settings, start, n, thresh, frozen=frozen)
            iters += cand[3]
            if cand[2] < obj * (1.0 - 1e-12) and np.max(np.abs(cand[0]), initial=0.0) <= radius:
                state = cand
                omega, obj = cand[0], cand[2]
                improved = pruned = True
                break
        if improved:
            swaps = False
        elif swaps:
            break
        else:
            swaps = True
    if pruned:
        state = _descend(prob, pen, settings, omega, n, thresh)
        iters += state[3]
    return state, iters


def fit_penalized(
    data: Dataset,
    weights: PropensityWeights,
    pen: PenaltySpec,
    cfg: FitConfig,
    init=None,
    seed: int | None = None,
) -> EstimateResult:
    """Minimise the weighted exponential-squared loss plus penalty.

    The optimiser works on the objective divided by ``n``; the threshold
    ``step_size * f / n`` is the same rule expressed on that scale, so a
    zero coordinate becomes active only when its data-fit gradient exceeds
    ``f`` in absolute value.

    With ``cfg.continuation`` the descent runs along :func:`h_ladder`,
    each stage warm-started at the previous one. For small ``h`` every
    residual at a poor start sits on the flat part of the loss and the
    gradient vanishes, so descending directly rarely moves. All stages but
    the last use the plain residual: at large ``h`` the orthogonal residual
    approaches total least squares, which over-corrects badly when rows are
    selected on the response, and on its own at small ``h`` it can drift
    towards huge coefficients whose loss stays bounded.
    """
    if data.n < 2:
        raise ValueError("need at least two observations")
    if not data.complete.any():
        raise ValueError("no complete observations")
    n = data.n
    settings = cfg.optimizer
    thresh = settings.step_size * pen.f / n
    omega = np.zeros(data.d) if init is None else np.asarray(init, dtype=float)
    if omega.shape != (data.d,):
        raise ValueError("init has the wrong length")
    iters = 0
    stages = [(cfg.h, cfg.condition.uses_orthogonal)]
    if cfg.continuation:
        ladder = h_ladder(cfg.h, data.response[data.complete == 1])
        stages = [(h, False) for h in ladder[:-1]] + stages
    for h, orth in stages:
        prob = CompleteCaseProblem(data, weights, h, orth)
        state = _descend(prob, pen, settings, omega, n, thresh)
        iters += state[3]
        omega = state[0]
    if cfg.prune:
        state, it = _prune(prob, pen, settings, state, n, thresh)
        iters += it
    omega, data_fit, obj, _, converged, gnorm = state
    res = EstimateResult(
        omega_hat=omega,
        active_set=[int(k) for k in np.flatnonzero(omega)],
        objective=float(obj),
        hbic=float("nan"),
        f_selected=float(pen.f),
        iterations=iters,
        converged=bool(converged),
        seed=seed,
        data_fit=float(data_fit),
        grad_norm=gnorm,
        threshold=thresh,
        family=pen.family.value,
        h=cfg.h,
        condition=cfg.condition.value,
    )
    zero_var = _zero_variance_columns(prob.T)
    if zero_var:
        res.diagnostics["zero_variance_columns"] = zero_var
    res.hbic = hbic(data, weights, res, cfg)
    return res


def h_ladder(h: float, y, factor: float = LADDER_FACTOR) -> list:
    """Decreasing ``h`` values ending at ``h``.

    The first value is the smallest ``h * factor^k`` reaching
    ``factor * var(y)``, where the loss is close to least squares for every
    row; with ``h`` already that large the ladder is just ``[h]``.
    """
    y = np.asarray(y, dtype=float)
    top = factor * float(np.var(y)) if y.size > 1 else h
    if not top > h:
        return [h]
    k = int(math.ceil(math.log(top / h, factor)))
    return [h * factor**j for j in range(k, 0, -1)] + [h]


def _zero_variance_columns(T: np.ndarray) -> list:
    if T.shape[0] < 2:
        return []
    return [int(k) for k in np.flatnonzero(T.std(axis=0) == 0)]


def hbic_value(objective: float, size: int, n: int, d: int, en_rule: float = 1.0):
    """``log(objective) + size * log(log n) / n * en_rule * log(d)``.

    Returns ``(value, perfect_fit)``. A zero objective is first raised to
    machine epsilon, so ``perfect_fit`` only flags the degenerate case.
    """
    if not objective >= 0:
        raise ValueError("objective must be nonnegative")
    perfect = objective <= 0.0
    obj = max(objective, np.finfo(float).eps)
    e_n = en_rule * math.log(d) if d > 1 else en_rule
    llog = math.log(math.log(n)) if n > math.e else 0.0
    return math.log(obj) + size * llog / n * e_n, perfect


def hbic(data: Dataset, weights, result: EstimateResult, cfg: FitConfig) -> float:
    prob = CompleteCaseProblem(data, weights, cfg.h, cfg.condition.uses_orthogonal)
    value, perfect = hbic_value(prob.value(result.omega_hat), result.size, data.n, data.d, cfg.en_rule)
    result.perfect_fit = perfect
    return value


def size_cap(data: Dataset, cfg: FitConfig) -> int:
    if cfg.max_size is not None:
        return int(cfg.max_size)
    return max(1, int(data.complete.sum()) // 4)


def select_f(
    data: Dataset,
    weights: PropensityWeights,
    pen: PenaltySpec,
    cfg: FitConfig,
    seed: int | None = None,
) -> EstimateResult:
    """Fit once per value of ``cfg.hbic_grid`` and keep the minimal HBIC.

    Grid values are visited from largest to smallest, each fit warm-started
    at the previous solution. Only fits with at most :func:`size_cap`
    nonzero coefficients compete, and the path stops at the first fit
    above the cap; smaller ``f`` values are recorded as skipped in the
    trace. If no fit qualifies the sparsest one is returned. Ties go to the
    larger ``f``.
    """
    grid = sorted(set(cfg.hbic_grid), reverse=True)
    cap = size_cap(data, cfg)
    best = None
    sparsest = None
    trace = []
    init = None
    stopped = False
    for f in grid:
        if stopped:
            trace.append({"f": f, "skipped": True})
            continue
        res = fit_penalized(data, weights, pen.with_f(f), cfg, init=init, seed=seed)
        init = res.omega_hat
        eligible = res.size <= cap
        trace.append(
            {
                "f": f,
                "hbic": res.hbic,
                "size": res.size,
                "objective": res.objective,
                "iterations": res.iterations,
                "converged": res.converged,
                "eligible": eligible,
            }
        )
        if eligible and (best is None or res.hbic < best.hbic):
            best = res
        if sparsest is None or res.size < sparsest.size:
            sparsest = res
        stopped = not eligible
    if best is None:
        best = sparsest
        best.diagnostics["size_cap_exceeded"] = True
    best.diagnostics["size_cap"] = cap
    best.hbic_trace = sorted(trace, key=lambda r: r["f"])
    return best
