"""Log-domain arithmetic, candidate-point grids and changepoint-prior combinatorics.

All probabilities in this package live on the log scale; a value of ``-inf``
encodes exact zero and is propagated (never raised) through every recursion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

__all__ = [
    "log_sum_exp",
    "ReducedGrid",
    "build_reduced_grid",
    "log_delta",
    "log_z_k",
    "KPrior",
]

NEG_INF = float("-inf")


def log_sum_exp(values) -> float:
    """Return ``log(sum(exp(values)))`` computed stably.

    An empty sequence yields ``-inf`` (the log of an empty sum). ``-inf``
    entries are absorbed. NaN input is a contract violation and is caught
    by an assertion in debug runs.
    """
    v = np.asarray(values, dtype=float)
    assert not np.isnan(v).any(), "NaN is not a valid log weight"
    if v.size == 0:
        return NEG_INF
    m = float(v.max())
    if m == NEG_INF:
        return NEG_INF
    return m + float(np.log(np.exp(v - m).sum()))


@dataclass(frozen=True)
class ReducedGrid:
    """Candidate changepoint locations ``t_i = i*g`` with ``t_i <= n-1``.

    Index coordinates run from 0 to ``num_points + 1`` where index 0 is the
    sentinel time 0 and index ``num_points + 1`` is the sentinel time ``n``.
    ``times[r]`` maps an index to its time.
    """

    n: int
    g: int
    points: np.ndarray = field(repr=False)

    @property
    def num_points(self) -> int:
        return int(self.points.size)

    @property
    def times(self) -> np.ndarray:
        """Times of all indices 0..N+1, including both sentinels."""
        return np.concatenate(([0], self.points, [self.n]))

    @property
    def table_entries(self) -> int:
        """Number of (start, end) pairs a full segment table holds."""
        m = self.num_points + 2
        return m * (m - 1) // 2

    @property
    def nominal_eval_count(self) -> int:
        """Headline evaluation-count estimate ``n_r (n_r + 1) / 2``.

        Uses ``n_r = floor(n/g + 1 - [g == 1])``. Reported as a diagnostic
        for comparability with published cost figures; the exact number of
        table entries is :attr:`table_entries`.
        """
        n_r = int(self.n / self.g + 1 - (1 if self.g == 1 else 0))
        return n_r * (n_r + 1) // 2

    def is_refinement_of(self, other: "ReducedGrid") -> bool:
        """True when every candidate point of ``other`` is also one of ours."""
        return (
            self.n == other.n
            and other.g % self.g == 0
            and set(other.points.tolist()) <= set(self.points.tolist())
        )


def build_reduced_grid(n: int, g: int) -> ReducedGrid:
    """Build the equally spaced candidate grid for ``n`` observations.

    ``g = 1`` reproduces full-resolution indexing (every point 1..n-1 is a
    candidate).
    """
    if n < 2:
        raise ValueError(f"need at least two observations, got n={n}")
    if not 1 <= g <= n - 1:
        raise ValueError(f"grid spacing must satisfy 1 <= g <= n-1, got g={g}")
    points = np.arange(g, n, g, dtype=np.int64)
    grid = ReducedGrid(n=int(n), g=int(g), points=points)
    points.setflags(write=False)
    return grid


def log_delta(s: int, t: int) -> float:
    """Log pairwise weight ``log(t - s - 1)`` of the order-statistics prior.

    Adjacent positions (``t = s + 1``) carry zero prior mass, encoded as
    ``-inf``.
    """
    if s >= t:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    gap = t - s - 1
    return NEG_INF if gap == 0 else float(np.log(gap))


def log_z_k(n: int, k: int) -> float:
    """Log normalizer ``log C(n-1, 2k+1)`` of the order-statistics prior.

    ``n`` is the exclusive right sentinel of the candidate index range, so
    positions live on ``{1, ..., n-1}``. Impossible models (``2k+1 > n-1``)
    return ``-inf``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got n={n}")
    if k < 0:
        raise ValueError(f"need k >= 0, got k={k}")
    top = n - 1
    pick = 2 * k + 1
    if pick > top:
        return NEG_INF
    return float(gammaln(top + 1) - gammaln(pick + 1) - gammaln(top - pick + 1))


@dataclass(frozen=True)
class KPrior:
    """Prior over the number of changepoints on ``{0, ..., k_max}``.

    ``kind`` is ``"uniform"`` or ``"poisson"``; the latter is a Poisson(mean)
    distribution truncated and renormalized to the support.
    """

    kind: str
    k_max: int
    mean: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "poisson"):
            raise ValueError(f"unknown k-prior kind {self.kind!r}")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")
        if self.kind == "poisson":
            if self.mean is None or self.mean <= 0:
                raise ValueError("poisson k-prior requires a positive mean")

    def log_weights(self) -> np.ndarray:
        """Normalized log prior masses for k = 0..k_max."""
        k = np.arange(self.k_max + 1)
        if self.kind == "uniform":
            w = np.zeros(self.k_max + 1)
        else:
            w = k * np.log(self.mean) - gammaln(k + 1)
        return w - log_sum_exp(w)
