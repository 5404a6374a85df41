"""Backward filtering recursions over a candidate grid of changepoint locations.

The dynamic program follows Fearnhead (2006, Statistics and Computing): with
``P(t, s)`` the marginal likelihood of segment ``y[t..s]`` and the
order-statistics changepoint prior (pairwise weight ``delta(r | s) = s - r - 1``
in grid-index coordinates, normalizer ``C(N, 2k+1)`` for ``N`` candidate
points), the backward table

    B[m, r] = Pr(y[t_r + 1 .. n] | changepoint at t_r, m more changepoints)

satisfies::

    B[0, r] = P(t_r + 1, n) * delta(r | N + 1)
    B[m, r] = sum_{s > r} P(t_r + 1, t_s) * B[m - 1, s] * delta(r | s)

and the data marginal under a k-changepoint model is::

    Pr(y | k) = sum_s P(1, t_s) * B[k - 1, s] * delta(0 | s) / Z_k .

Because the prior depends on k only through ``Z_k``, one table indexed by
"changepoints remaining" serves every k up to the chosen maximum. Everything
is computed in the log domain; zero-probability entries are ``-inf`` and
propagate without special cases.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import NEG_INF, ReducedGrid, log_sum_exp, log_z_k
from .segmodels import SegmentMarginalProvider

__all__ = [
    "SegmentTable",
    "RecursionTable",
    "ChangepointResult",
    "NumericalError",
    "fill_segment_table",
    "backward_recursions",
    "log_marginal_given_k",
    "log_marginals_all_k",
    "posterior_over_k",
    "map_positions",
    "refine_positions",
    "sample_positions",
    "bayes_factor",
]


class NumericalError(RuntimeError):
    """Raised when every competing model collapses to zero probability."""


@dataclass
class SegmentTable:
    """Upper-triangular cache ``logp[r, s] = log P(t_r + 1, t_s)``.

    Indices run over 0..N+1 including both sentinels. Entries below the
    provider's minimum segment length are stored as ``-inf``. A table built
    on a fine grid can serve any coarser grid whose spacing is a multiple of
    the fine one (see :meth:`extract`).
    """

    grid: ReducedGrid
    logp: np.ndarray = field(repr=False)
    min_segment_len: int = 1
    failures: int = 0

    def value(self, r: int, s: int) -> float:
        if not 0 <= r < s <= self.grid.num_points + 1:
            raise ValueError(f"need 0 <= r < s <= N+1, got ({r}, {s})")
        return float(self.logp[r, s])

    @property
    def entries(self) -> int:
        return self.grid.table_entries

    def extract(self, coarse: ReducedGrid) -> "SegmentTable":
        """Reuse this table's values for a coarser, nested grid."""
        if not self.grid.is_refinement_of(coarse):
            raise ValueError("target grid is not nested in this table's grid")
        fine_times = self.grid.times
        pos = {int(t): i for i, t in enumerate(fine_times)}
        idx = np.array([pos[int(t)] for t in coarse.times])
        logp = self.logp[np.ix_(idx, idx)].copy()
        return SegmentTable(
            grid=coarse,
            logp=logp,
            min_segment_len=self.min_segment_len,
            failures=self.failures,
        )


# Worker-side state for process-parallel table fill. Initialized once per
# worker so the provider is pickled a single time.
_WORKER_PROVIDER = None
_WORKER_TIMES = None
_WORKER_MINLEN = None


def _fill_worker_init(provider, times, min_len):
    global _WORKER_PROVIDER, _WORKER_TIMES, _WORKER_MINLEN
    _WORKER_PROVIDER = provider
    _WORKER_TIMES = times
    _WORKER_MINLEN = min_len


def _fill_rows(rows):
    return [
        _row_values(_WORKER_PROVIDER, _WORKER_TIMES, _WORKER_MINLEN, r) for r in rows
    ]


def _row_values(provider, times, min_len, r):
    """Values logp[r, r+1 .. N+1] for one start index, with failures counted."""
    n_idx = times.size
    ss = np.arange(r + 1, n_idx)
    starts = np.full(ss.size, times[r] + 1, dtype=np.int64)
    ends = times[ss]
    lengths = ends - starts + 1
    ok = lengths >= min_len
    out = np.full(ss.size, NEG_INF)
    failures = 0
    if ok.any():
        try:
            out[ok] = provider.log_marginal_many(starts[ok], ends[ok])
        except Exception:
            # Fall back to per-entry evaluation so one bad segment cannot
            # poison the whole row.
            for j in np.flatnonzero(ok):
                try:
                    out[j] = provider.log_marginal(int(starts[j]), int(ends[j]))
                except Exception:
                    failures += 1
    bad = np.isnan(out)
    if bad.any():
        failures += int(bad.sum())
        out[bad] = NEG_INF
    return r, out, failures


def fill_segment_table(
    provider: SegmentMarginalProvider,
    grid: ReducedGrid,
    workers: int = 1,
) -> SegmentTable:
    """Evaluate every needed segment marginal on the grid.

    Content is deterministic regardless of ``workers``: each entry depends
    only on its own (start, end) pair. Provider failures become ``-inf``
    entries and are counted on the returned table.
    """
    if provider.n != grid.n:
        raise ValueError(
            f"provider covers {provider.n} observations but grid expects {grid.n}"
        )
    workers = max(1, int(workers))
    times = grid.times
    n_idx = times.size
    min_len = int(getattr(provider, "min_segment_len", 1))
    logp = np.full((n_idx, n_idx), NEG_INF)
    failures = 0
    rows = list(range(n_idx - 1))
    if workers == 1:
        results = [_row_values(provider, times, min_len, r) for r in rows]
    else:
        # Interleave rows across chunks: early rows own the longest segments,
        # so striping balances the load.
        chunks = [rows[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_fill_worker_init,
            initargs=(provider, times, min_len),
        ) as pool:
            results = [res for batch in pool.map(_fill_rows, chunks) for res in batch]
    for r, row, fails in results:
        logp[r, r + 1 :] = row
        failures += fails
    return SegmentTable(grid=grid, logp=logp, min_segment_len=min_len, failures=failures)


@dataclass
class RecursionTable:
    """Backward table ``B[m, r]`` for m = 0..k_max-1 over grid indices r."""

    grid: ReducedGrid
    k_max: int
    B: np.ndarray = field(repr=False)


def _log_delta_by_gap(max_index: int) -> np.ndarray:
    """log(gap - 1) addressed by index gap; gaps 0 and 1 carry zero mass."""
    out = np.full(max_index + 1, NEG_INF)
    if max_index >= 2:
        gaps = np.arange(2, max_index + 1, dtype=float)
        out[2:] = np.log(gaps - 1.0)
    return out


def backward_recursions(table: SegmentTable, k_max: int) -> RecursionTable:
    """Compute the shared backward table serving all k up to ``k_max``."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    grid = table.grid
    N = grid.num_points
    logp = table.logp
    ldg = _log_delta_by_gap(N + 1)
    B = np.full((max(k_max, 1), N + 2), NEG_INF)
    if k_max == 0:
        return RecursionTable(grid=grid, k_max=0, B=B[:0])
    r_all = np.arange(1, N + 1)
    B[0, 1 : N + 1] = logp[1 : N + 1, N + 1] + ldg[N + 1 - r_all]
    for m in range(1, k_max):
        prev = B[m - 1]
        for r in range(N - 1, 0, -1):
            vals = logp[r, r + 1 : N + 1] + prev[r + 1 : N + 1] + ldg[1 : N - r + 1]
            B[m, r] = log_sum_exp(vals)
    return RecursionTable(grid=grid, k_max=k_max, B=B)


def log_marginal_given_k(rec: RecursionTable, table: SegmentTable, k: int) -> float:
    """Log marginal likelihood of the data under exactly k changepoints."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    N = table.grid.num_points
    if k == 0:
        return float(table.logp[0, N + 1])
    if k > rec.k_max:
        raise ValueError(f"backward table only covers k <= {rec.k_max}")
    lz = log_z_k(N + 1, k)
    if lz == NEG_INF:
        return NEG_INF
    ldg = _log_delta_by_gap(N + 1)
    s = np.arange(1, N + 1)
    vals = table.logp[0, 1 : N + 1] + rec.B[k - 1, 1 : N + 1] + ldg[s]
    return log_sum_exp(vals) - lz


def log_marginals_all_k(rec: RecursionTable, table: SegmentTable) -> np.ndarray:
    """Vector of log marginals for k = 0..k_max."""
    return np.array(
        [log_marginal_given_k(rec, table, k) for k in range(rec.k_max + 1)]
    )


def posterior_over_k(log_marginals: np.ndarray, log_prior: np.ndarray) -> np.ndarray:
    """Normalized posterior over the number of changepoints."""
    log_marginals = np.asarray(log_marginals, dtype=float)
    log_prior = np.asarray(log_prior, dtype=float)
    if log_marginals.shape != log_prior.shape:
        raise ValueError("marginal and prior vectors must have equal length")
    w = log_marginals + log_prior
    norm = log_sum_exp(w)
    if norm == NEG_INF:
        raise NumericalError("all changepoint-count models have zero probability")
    post = np.exp(w - norm)
    return post / post.sum()


def _conditional_scores(rec, table, k, j, prev_r) -> np.ndarray:
    """Unnormalized log Pr(c_j = r | c_{j-1} = prev_r) over r = prev_r+1..N.

    The tail factor is B[k - j] because, once the j-th changepoint is
    placed, k - j remain.
    """
    N = table.grid.num_points
    ldg = _log_delta_by_gap(N + 1)
    r = np.arange(prev_r + 1, N + 1)
    if r.size == 0:
        return np.empty(0)
    return table.logp[prev_r, prev_r + 1 : N + 1] + rec.B[k - j, prev_r + 1 : N + 1] + ldg[r - prev_r]


def map_positions(rec: RecursionTable, table: SegmentTable, k: int) -> np.ndarray:
    """Greedy sequential mode of the changepoint positions on the grid.

    Each step maximizes the exact conditional of the next changepoint given
    the previously fixed ones; ties resolve to the smallest index. Returns
    grid indices (1-based into the candidate points).
    """
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k > rec.k_max:
        raise ValueError(f"backward table only covers k <= {rec.k_max}")
    out = []
    prev = 0
    for j in range(1, k + 1):
        scores = _conditional_scores(rec, table, k, j, prev)
        if scores.size == 0 or np.all(scores == NEG_INF):
            raise NumericalError(
                f"no feasible position for changepoint {j} of {k}"
            )
        prev = prev + 1 + int(np.argmax(scores))
        out.append(prev)
    return np.asarray(out, dtype=np.int64)


def sample_positions(
    rec: RecursionTable,
    table: SegmentTable,
    k: int,
    seed: int,
    count: int,
) -> np.ndarray:
    """Draw changepoint configurations from their joint posterior given k.

    Forward simulation over the grid: the first position is drawn from its
    exact marginal, each later one from its conditional given the previous
    draw. Returns an array of shape (count, k) of grid indices. Reproducible
    for a fixed seed.
    """
    if k == 0:
        return np.empty((count, 0), dtype=np.int64)
    if k > rec.k_max:
        raise ValueError(f"backward table only covers k <= {rec.k_max}")
    rng = np.random.default_rng(seed)
    draws = np.empty((count, k), dtype=np.int64)
    for i in range(count):
        prev = 0
        for j in range(1, k + 1):
            scores = _conditional_scores(rec, table, k, j, prev)
            norm = log_sum_exp(scores)
            if norm == NEG_INF:
                raise NumericalError("sampling reached an impossible state")
            probs = np.exp(scores - norm)
            probs = probs / probs.sum()
            prev = prev + 1 + int(rng.choice(probs.size, p=probs))
            draws[i, j - 1] = prev
    return draws


def refine_positions(
    positions,
    g: int,
    provider: SegmentMarginalProvider,
    n: int,
    max_sweeps: int = 10,
) -> np.ndarray:
    """Hone grid-detected changepoints by local search off the grid.

    Sweeps left to right; each changepoint moves within ``g - 1`` points of
    its current location to maximize the product of the two adjacent segment
    marginals, holding its neighbors fixed (the left one already updated this
    sweep, the right one not yet). Sweeping repeats until a fixpoint or
    ``max_sweeps``. Candidates that would push a segment below the provider's
    minimum length are skipped.
    """
    taus = [int(t) for t in positions]
    if sorted(taus) != taus or len(set(taus)) != len(taus):
        raise ValueError("positions must be strictly increasing")
    if any(t < 1 or t > n - 1 for t in taus):
        raise ValueError("positions must lie in 1..n-1")
    min_len = int(getattr(provider, "min_segment_len", 1))
    for _ in range(max_sweeps):
        moved = False
        for j, tau in enumerate(taus):
            left = taus[j - 1] if j > 0 else 0
            right = taus[j + 1] if j + 1 < len(taus) else n
            lo = max(tau - g + 1, left + min_len, 1)
            hi = min(tau + g - 1, right - min_len, n - 1)
            if hi < lo:
                continue
            cands = np.arange(lo, hi + 1, dtype=np.int64)
            obj = provider.log_marginal_many(
                np.full(cands.size, left + 1, dtype=np.int64), cands
            ) + provider.log_marginal_many(cands + 1, np.full(cands.size, right, dtype=np.int64))
            best = int(cands[int(np.argmax(obj))])
            if best != tau:
                taus[j] = best
                moved = True
        if not moved:
            break
    return np.asarray(taus, dtype=np.int64)


def bayes_factor(log_marg_a: float, log_marg_b: float) -> float:
    """Evidence ratio of two models at the same changepoint count and prior."""
    if not np.isfinite(log_marg_a) or not np.isfinite(log_marg_b):
        raise NumericalError("bayes factor requires finite log marginals")
    return float(np.exp(log_marg_a - log_marg_b))


@dataclass
class ChangepointResult:
    """Posterior summary of one full analysis."""

    k_max: int
    log_marginal_by_k: np.ndarray
    log_k_prior: np.ndarray
    posterior_k: np.ndarray
    map_k: int
    map_positions_grid: np.ndarray
    map_positions_time: np.ndarray
    refined_positions: np.ndarray | None = None
    samples_time: np.ndarray | None = None
    segment_summaries: list | None = None

    def __post_init__(self):
        total = float(self.posterior_k.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"posterior over k sums to {total}, expected 1")
        pos = self.map_positions_time
        if pos.size > 1 and not np.all(np.diff(pos) > 0):
            raise ValueError("changepoint positions must be strictly increasing")
