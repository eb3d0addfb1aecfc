"""Nadaraya-Watson estimate of the completeness probability ``Pr(F=1 | s)``.

The conditioning vector is ``s_i = (Y_i, T_i^(p))``: the response together
with the never-missing covariate columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .loss import Dataset

DEFAULT_CLIP_FLOOR = 0.05


@dataclass(frozen=True)
class KernelSpec:
    dimension: int
    family: str = "gaussian_product"

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValueError("kernel dimension must be >= 1")
        if self.family != "gaussian_product":
            raise ValueError(f"unsupported kernel family {self.family!r}")


@dataclass(frozen=True)
class PropensityWeights:
    """Estimated completeness probabilities, one per row.

    ``n_clipped`` counts the rows raised to ``clip_floor``.
    """

    probs: np.ndarray
    bandwidth: float
    clip_floor: float
    n_clipped: int = 0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if not 0 < self.clip_floor < 1:
            raise ValueError("clip_floor must lie in (0, 1)")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if np.any(p < self.clip_floor) or np.any(p > 1.0):
            raise ValueError("probabilities must lie in [clip_floor, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def ones(cls, n: int) -> "PropensityWeights":
        """Unit weights, used when inverse-probability weighting is off."""
        return cls(np.ones(n), bandwidth=1.0, clip_floor=DEFAULT_CLIP_FLOOR)


def gaussian_product_kernel(u) -> float:
    """Product of standard normal densities, ``(2 pi)^{-k/2} exp(-|u|^2 / 2)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not np.all(np.isfinite(u)):
        raise ValueError("kernel argument must be finite")
    return float((2.0 * math.pi) ** (-u.size / 2.0) * math.exp(-0.5 * float(u @ u)))


def bandwidth_rule(sigma: float, n: int, m: int) -> float:
    """Plug-in bandwidth ``sigma * n^(-1/(m+2))``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    return float(sigma * n ** (-1.0 / (m + 2)))


def conditioning_variables(data: Dataset, standardize: bool = True) -> np.ndarray:
    """Stack ``(Y, T^(p))`` column-wise, optionally scaled to unit sample sd."""
    s = np.column_stack([data.response, data.design[:, list(data.observed_block)]])
    if standardize and s.shape[0] > 1:
        sd = s.std(axis=0, ddof=1)
        sd[~(sd > 0)] = 1.0
        s = (s - s.mean(axis=0)) / sd
    return s


def kernel_average(s, flags, l: float) -> np.ndarray:
    """Nadaraya-Watson average of ``flags`` at every row of ``s``.

    Row ``i`` is included in its own average. The normalising constant of
    the Gaussian kernel cancels, so only ``exp(-|s_i - s_j|^2 / (2 l^2))``
    is evaluated, shifted by the row maximum of the exponent.
    """
    if not l > 0:
        raise ValueError("bandwidth must be positive")
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    F = np.asarray(flags, dtype=float)
    K = _kernel_matrix(s, l)
    # same reduction order as the denominator, so all-ones flags give exactly 1
    return (K * F).sum(axis=1) / K.sum(axis=1)


def _kernel_matrix(s: np.ndarray, l: float) -> np.ndarray:
    d2 = cdist(s, s, "sqeuclidean")
    expo = -d2 / (2.0 * l * l)
    expo -= expo.max(axis=1, keepdims=True)
    return np.exp(expo)


def estimate_propensity(
    data: Dataset,
    spec: KernelSpec | None = None,
    l: float | None = None,
    clip_floor: float = DEFAULT_CLIP_FLOOR,
    standardize: bool = True,
) -> PropensityWeights:
    """Kernel estimate of each row's probability of being complete.

    With ``l=None`` the bandwidth follows :func:`bandwidth_rule` with
    ``sigma = 1`` on standardized conditioning variables, and ``m`` the
    number of never-missing covariates.
    """
    F = data.complete
    if not F.any():
        raise ValueError("no complete observations")
    s = conditioning_variables(data, standardize=standardize)
    if spec is not None and spec.dimension != s.shape[1]:
        raise ValueError(f"kernel dimension {spec.dimension} != conditioning dimension {s.shape[1]}")
    if l is None:
        l = bandwidth_rule(1.0, data.n, s.shape[1] - 1)
    raw = kernel_average(s, F, l)
    clipped = raw < clip_floor
    probs = np.clip(raw, clip_floor, 1.0)
    return PropensityWeights(probs, bandwidth=float(l), clip_floor=clip_floor, n_clipped=int(clipped.sum()))
