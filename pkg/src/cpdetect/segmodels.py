"""Closed-form segment marginal likelihoods for independent within-segment data.

Every model precomputes prefix sums over the full series so that the log
marginal likelihood of any segment ``y[t..s]`` (1-based, inclusive) costs
O(1). Models are immutable after construction and safe to evaluate
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.special import gammaln

__all__ = [
    "SegmentMarginalProvider",
    "SegmentModel",
    "MultinomialDirichletModel",
    "GaussianConjugateModel",
    "PoissonGammaModel",
    "DNA_ALPHABET",
    "encode_dna",
]

DNA_ALPHABET = "ACGT"
_DNA_CODE = {c: i for i, c in enumerate(DNA_ALPHABET)}

LOG_2PI = float(np.log(2.0 * np.pi))


@runtime_checkable
class SegmentMarginalProvider(Protocol):
    """What the recursions need from a segment model."""

    n: int
    min_segment_len: int

    def log_marginal(self, t: int, s: int) -> float: ...

    def log_marginal_many(self, ts: np.ndarray, ss: np.ndarray) -> np.ndarray: ...

    def segment_summary(self, t: int, s: int) -> dict: ...


class SegmentModel:
    """Base class wiring the scalar entry point to the batched one."""

    n: int = 0
    min_segment_len: int = 1

    def _check_range(self, t, s) -> None:
        t = np.asarray(t)
        s = np.asarray(s)
        if np.any(t < 1) or np.any(s > self.n) or np.any(t > s):
            raise ValueError(
                f"segment indices must satisfy 1 <= t <= s <= {self.n}"
            )

    def log_marginal(self, t: int, s: int) -> float:
        return float(self.log_marginal_many(np.array([t]), np.array([s]))[0])

    def log_marginal_many(self, ts, ss) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.int64)
        ss = np.asarray(ss, dtype=np.int64)
        return np.array([self.log_marginal(int(t), int(s)) for t, s in zip(ts, ss)])

    def segment_summary(self, t: int, s: int) -> dict:
        return {"start": int(t), "end": int(s), "log_marginal": self.log_marginal(t, s)}


@dataclass(frozen=True)
class MultinomialDirichletModel(SegmentModel):
    """Nucleotide frequency model with a symmetric Dirichlet(alpha) prior.

    For a segment with symbol counts ``n_A..n_T`` and length ``m``::

        log P = lgamma(4a) - 4 lgamma(a) - lgamma(m + 4a) + sum_j lgamma(n_j + a)
    """

    alpha: float
    codes: np.ndarray = field(repr=False)
    prefix: np.ndarray = field(repr=False)  # (n+1, 4) cumulative symbol counts

    min_segment_len = 1

    @classmethod
    def from_codes(cls, codes: np.ndarray, alpha: float = 1.0) -> "MultinomialDirichletModel":
        if alpha <= 0:
            raise ValueError("dirichlet concentration must be positive")
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 1 or codes.size == 0:
            raise ValueError("need a nonempty 1-d symbol sequence")
        if codes.min() < 0 or codes.max() > 3:
            raise ValueError("symbol codes must lie in 0..3")
        prefix = np.zeros((codes.size + 1, 4), dtype=np.int64)
        for j in range(4):
            prefix[1:, j] = np.cumsum(codes == j)
        return cls(alpha=float(alpha), codes=codes, prefix=prefix)

    @classmethod
    def from_sequence(cls, seq: str, alpha: float = 1.0) -> "MultinomialDirichletModel":
        return cls.from_codes(encode_dna(seq), alpha=alpha)

    @property
    def n(self) -> int:
        return int(self.codes.size)

    def counts(self, t, s) -> np.ndarray:
        """Per-symbol counts of y[t..s]; vectorized over index arrays."""
        return self.prefix[s] - self.prefix[np.asarray(t) - 1]

    def log_marginal_many(self, ts, ss) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.int64)
        ss = np.asarray(ss, dtype=np.int64)
        self._check_range(ts, ss)
        a = self.alpha
        counts = self.counts(ts, ss)
        m = (ss - ts + 1).astype(float)
        out = (
            gammaln(4 * a)
            - 4 * gammaln(a)
            - gammaln(m + 4 * a)
            + gammaln(counts + a).sum(axis=-1)
        )
        return np.asarray(out, dtype=float)

    def segment_summary(self, t: int, s: int) -> dict:
        c = self.counts(np.array(t), np.array(s))
        post = c + self.alpha
        return {
            "counts": {sym: int(v) for sym, v in zip(DNA_ALPHABET, np.atleast_2d(c)[0])},
            "posterior_mean_freq": {
                sym: float(v) for sym, v in zip(DNA_ALPHABET, np.atleast_2d(post)[0] / post.sum())
            },
        }


def encode_dna(seq: str) -> np.ndarray:
    """Map an ACGT string (case-insensitive) to integer codes 0..3."""
    out = np.empty(len(seq), dtype=np.int64)
    for i, ch in enumerate(seq.upper()):
        code = _DNA_CODE.get(ch)
        if code is None:
            raise ValueError(f"unknown nucleotide {ch!r} at position {i + 1}")
        out[i] = code
    return out


@dataclass(frozen=True)
class GaussianConjugateModel(SegmentModel):
    """Gaussian data with a normal-inverse-gamma prior on (mean, variance).

    Prior: ``var ~ InvGamma(a0, b0)``, ``mean | var ~ N(m0, var / kappa0)``.
    The segment marginal is the usual Student-t form assembled from the
    posterior hyperparameters.
    """

    m0: float
    kappa0: float
    a0: float
    b0: float
    y: np.ndarray = field(repr=False)
    sum1: np.ndarray = field(repr=False)
    sum2: np.ndarray = field(repr=False)

    min_segment_len = 1

    @classmethod
    def from_series(cls, y, m0=0.0, kappa0=0.01, a0=1.0, b0=1.0) -> "GaussianConjugateModel":
        if kappa0 <= 0 or a0 <= 0 or b0 <= 0:
            raise ValueError("kappa0, a0, b0 must all be positive")
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("need a nonempty 1-d series")
        if not np.isfinite(y).all():
            raise ValueError("series contains non-finite values")
        sum1 = np.concatenate(([0.0], np.cumsum(y)))
        sum2 = np.concatenate(([0.0], np.cumsum(y * y)))
        return cls(float(m0), float(kappa0), float(a0), float(b0), y, sum1, sum2)

    @property
    def n(self) -> int:
        return int(self.y.size)

    def _posterior(self, ts, ss):
        m = (ss - ts + 1).astype(float)
        s1 = self.sum1[ss] - self.sum1[ts - 1]
        s2 = self.sum2[ss] - self.sum2[ts - 1]
        kappa_m = self.kappa0 + m
        mean_m = (self.kappa0 * self.m0 + s1) / kappa_m
        a_m = self.a0 + 0.5 * m
        b_m = self.b0 + 0.5 * (s2 + self.kappa0 * self.m0**2 - kappa_m * mean_m**2)
        return m, kappa_m, mean_m, a_m, b_m

    def log_marginal_many(self, ts, ss) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.int64)
        ss = np.asarray(ss, dtype=np.int64)
        self._check_range(ts, ss)
        m, kappa_m, _, a_m, b_m = self._posterior(ts, ss)
        out = (
            0.5 * (np.log(self.kappa0) - np.log(kappa_m))
            + self.a0 * np.log(self.b0)
            - a_m * np.log(b_m)
            + gammaln(a_m)
            - gammaln(self.a0)
            - 0.5 * m * LOG_2PI
        )
        return np.asarray(out, dtype=float)

    def segment_summary(self, t: int, s: int) -> dict:
        ts, ss = np.array([t], dtype=np.int64), np.array([s], dtype=np.int64)
        _, kappa_m, mean_m, a_m, b_m = self._posterior(ts, ss)
        return {
            "posterior_mean": float(mean_m[0]),
            "posterior_kappa": float(kappa_m[0]),
            "posterior_shape": float(a_m[0]),
            "posterior_rate": float(b_m[0]),
            "posterior_var_mean": float(b_m[0] / (a_m[0] - 1)) if a_m[0] > 1 else None,
        }


@dataclass(frozen=True)
class PoissonGammaModel(SegmentModel):
    """Poisson counts with a Gamma(shape, rate) prior on the segment rate."""

    shape: float
    rate: float
    y: np.ndarray = field(repr=False)
    sum1: np.ndarray = field(repr=False)
    sum_lfact: np.ndarray = field(repr=False)

    min_segment_len = 1

    @classmethod
    def from_counts(cls, y, shape=1.0, rate=1.0) -> "PoissonGammaModel":
        if shape <= 0 or rate <= 0:
            raise ValueError("gamma shape and rate must be positive")
        y = np.asarray(y)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("need a nonempty 1-d count series")
        if np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("counts must be nonnegative integers")
        y = y.astype(np.int64)
        sum1 = np.concatenate(([0], np.cumsum(y))).astype(float)
        sum_lfact = np.concatenate(([0.0], np.cumsum(gammaln(y + 1.0))))
        return cls(float(shape), float(rate), y, sum1, sum_lfact)

    @property
    def n(self) -> int:
        return int(self.y.size)

    def log_marginal_many(self, ts, ss) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.int64)
        ss = np.asarray(ss, dtype=np.int64)
        self._check_range(ts, ss)
        m = (ss - ts + 1).astype(float)
        total = self.sum1[ss] - self.sum1[ts - 1]
        lfact = self.sum_lfact[ss] - self.sum_lfact[ts - 1]
        a, b = self.shape, self.rate
        out = (
            a * np.log(b)
            - gammaln(a)
            + gammaln(a + total)
            - (a + total) * np.log(b + m)
            - lfact
        )
        return np.asarray(out, dtype=float)

    def segment_summary(self, t: int, s: int) -> dict:
        m = s - t + 1
        total = self.sum1[s] - self.sum1[t - 1]
        return {
            "posterior_shape": float(self.shape + total),
            "posterior_rate": float(self.rate + m),
            "posterior_rate_mean": float((self.shape + total) / (self.rate + m)),
        }
