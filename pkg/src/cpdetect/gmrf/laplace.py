"""Laplace-approximated segment marginal likelihoods for latent-GMRF models.

For a fixed hyperparameter point the latent posterior mode is found by
Newton iterations with tridiagonal (plus one dense intercept row) solves,
and the marginal likelihood is approximated by the Gaussian integral at the
mode:

    log pi(y | theta) ~ log pi(y | z*) + log pi(z*) + d/2 log(2 pi)
                        - 1/2 log det H(z*)

with ``H`` the negated Hessian of the log posterior. The approximation is
exact when the observation density is Gaussian. Hyperparameters are then
integrated out over a deterministic grid of prior quantiles with trapezoid
weights, in the spirit of integrated nested Laplace approximations but
without the higher-order corrections.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..segmodels import SegmentModel
from ._banded import tridiag_cholesky, tridiag_logdet, tridiag_quadform, tridiag_solve
from .models import (
    LOG_2PI,
    GammaPrior,
    LatentSpec,
    NormalPrior,
    ObsSpec,
    latent_log_det,
    latent_precision,
    obs_terms,
    phi_from_kappa,
)

__all__ = [
    "NewtonError",
    "GaussianApprox",
    "HyperGrid",
    "newton_gaussian_approx",
    "laplace_log_marginal_given_hyper",
    "hyper_grid_log_marginal",
    "GmrfMarginalProvider",
    "GMRF_MIN_SEGMENT_LEN",
]

# Fitting an autoregressive field to fewer points than this is hopeless, so
# shorter segments are assigned zero marginal likelihood.
GMRF_MIN_SEGMENT_LEN = 5


class NewtonError(RuntimeError):
    """Mode search failed; carries the last iterate for diagnosis."""

    def __init__(self, message, x=None, intercept=None):
        super().__init__(message)
        self.last_x = x
        self.last_intercept = intercept


def _extend_mode(x: np.ndarray, m: int) -> np.ndarray:
    """Grow a warm-start mode to length m by repeating its final value."""
    if x.size >= m:
        return x[:m]
    return np.concatenate([x, np.full(m - x.size, x[-1])])


@dataclass
class GaussianApprox:
    """Gaussian approximation of the latent posterior at one hyper point.

    The precision is stored as a tridiagonal block (diag, off) plus, when an
    intercept is present, its dense coupling column and corner entry.
    ``objective`` is the log posterior kernel (likelihood plus priors,
    normalizers included) at the mode.
    """

    x: np.ndarray
    intercept: float | None
    prec_diag: np.ndarray = field(repr=False)
    prec_off: np.ndarray = field(repr=False)
    prec_arrow: np.ndarray | None = field(repr=False)
    prec_corner: float | None
    log_det: float
    objective: float
    grad_norm: float
    iterations: int

    @property
    def dim(self) -> int:
        return self.x.size + (1 if self.intercept is not None else 0)

    @property
    def eta(self) -> np.ndarray:
        return self.x + (self.intercept or 0.0)


def _hyper_params(latent: LatentSpec, obs: ObsSpec, hyper: Mapping[str, float]):
    tau_x = float(np.exp(hyper["log_prec_x"]))
    phi = float(phi_from_kappa(hyper["kappa"])) if latent.kind == "ar1" else None
    tau_y = float(np.exp(hyper["log_prec_y"])) if obs.kind == "gaussian-identity" else None
    return tau_x, phi, tau_y


def _default_start(latent: LatentSpec, obs: ObsSpec, y: np.ndarray):
    x = np.zeros(y.size)
    if latent.intercept is None:
        return x, None
    if obs.kind == "poisson-log":
        a = float(np.log(y.mean() + 0.5))
    elif obs.kind == "sv-zero-mean":
        a = float(np.log((y * y).mean() + 1e-8))
    else:
        a = float(y.mean())
    return x, a


def newton_gaussian_approx(
    y,
    latent: LatentSpec,
    obs: ObsSpec,
    hyper: Mapping[str, float],
    start=None,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> GaussianApprox:
    """Find the latent posterior mode and its Gaussian approximation.

    Newton steps use exact derivatives and a step-halving line search, so
    the log posterior never decreases across accepted iterations. Raises
    :class:`NewtonError` after ``max_iter`` iterations without meeting the
    gradient or step tolerance, or when the Hessian loses positive
    definiteness.
    """
    y = np.asarray(y, dtype=float)
    m = y.size
    if m < 1:
        raise ValueError("empty segment")
    tau_x, phi, tau_y = _hyper_params(latent, obs, hyper)
    qdiag, qoff = latent_precision(latent, m, tau_x, phi)
    ld_prior = latent_log_det(latent, m, tau_x, phi)
    icpt = latent.intercept
    has_icpt = icpt is not None
    prec_a = 1.0 / icpt.sd**2 if has_icpt else 0.0

    def prior_part(xv, av):
        lp = 0.5 * ld_prior - 0.5 * tridiag_quadform(qdiag, qoff, xv) - 0.5 * m * LOG_2PI
        if has_icpt:
            z = (av - icpt.mean) / icpt.sd
            lp -= 0.5 * (LOG_2PI + 2.0 * np.log(icpt.sd) + z * z)
        return lp

    def evaluate(xv, av):
        """Log kernel plus the likelihood derivatives at one point."""
        ll, u, w = obs_terms(obs, y, xv + (av or 0.0), tau_y)
        ll_sum = float(ll.sum())
        if not np.isfinite(ll_sum):
            return -np.inf, u, w
        return ll_sum + prior_part(xv, av), u, w

    if start is not None:
        x = np.array(start[0], dtype=float, copy=True)
        a = float(start[1]) if has_icpt and start[1] is not None else None
        if x.size != m or (has_icpt and a is None):
            x, a = _default_start(latent, obs, y)
    else:
        x, a = _default_start(latent, obs, y)
    f, u, w = evaluate(x, a)
    if not np.isfinite(f):
        x, a = _default_start(latent, obs, y)
        f, u, w = evaluate(x, a)
        if not np.isfinite(f):
            raise NewtonError("log posterior not finite at the starting point", x, a)

    def q_times(v):
        out = qdiag * v
        if m > 1:
            out[:-1] += qoff * v[1:]
            out[1:] += qoff * v[:-1]
        return out

    def gradient(u_vec, xv, av):
        gx = u_vec - q_times(xv)
        if has_icpt:
            ga = float(u_vec.sum()) - prec_a * (av - icpt.mean)
            return gx, ga, max(float(np.abs(gx).max()), abs(ga))
        return gx, 0.0, float(np.abs(gx).max())

    factor = None
    for it in range(1, max_iter + 1):
        grad_x, grad_a, grad_norm = gradient(u, x, a)
        if grad_norm < tol:
            break
        hdiag = qdiag + w
        try:
            factor = tridiag_cholesky(hdiag, qoff)
        except np.linalg.LinAlgError:
            raise NewtonError("Hessian not positive definite", x, a)
        if has_icpt:
            rhs = np.empty((m, 2))
            rhs[:, 0] = w
            rhs[:, 1] = grad_x
            sol = tridiag_solve(factor, rhs)
            schur = prec_a + float(w.sum()) - float(w @ sol[:, 0])
            if schur <= 0:
                raise NewtonError("Hessian not positive definite", x, a)
            da = (grad_a - float(w @ sol[:, 1])) / schur
            dx = sol[:, 1] - sol[:, 0] * da
        else:
            dx = tridiag_solve(factor, grad_x)
            da = 0.0
        step = 1.0
        accepted = False
        for _ in range(60):
            x_new = x + step * dx
            a_new = (a + step * da) if has_icpt else None
            f_new, u_new, w_new = evaluate(x_new, a_new)
            if f_new >= f - 1e-10 * (1.0 + abs(f)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NewtonError("line search failed to make progress", x, a)
        x, a, f, u, w = x_new, a_new, f_new, u_new, w_new
        move = step * max(float(np.abs(dx).max()), abs(da))
        if move < tol:
            grad_norm = gradient(u, x, a)[2]
            break
    else:
        raise NewtonError(f"no convergence in {max_iter} Newton iterations", x, a)

    # Curvature and determinant at the accepted mode.
    hdiag = qdiag + w
    try:
        factor = tridiag_cholesky(hdiag, qoff)
    except np.linalg.LinAlgError:
        raise NewtonError("Hessian not positive definite at mode", x, a)
    log_det = tridiag_logdet(factor)
    arrow = corner = None
    if has_icpt:
        sol = tridiag_solve(factor, w)
        corner = prec_a + float(w.sum())
        schur = corner - float(w @ sol)
        if schur <= 0:
            raise NewtonError("Hessian not positive definite at mode", x, a)
        log_det += float(np.log(schur))
        arrow = w.copy()
    return GaussianApprox(
        x=x,
        intercept=a,
        prec_diag=hdiag,
        prec_off=qoff.copy(),
        prec_arrow=arrow,
        prec_corner=corner,
        log_det=log_det,
        objective=float(f),
        grad_norm=grad_norm,
        iterations=it,
    )


def laplace_log_marginal_given_hyper(
    y,
    latent: LatentSpec,
    obs: ObsSpec,
    hyper: Mapping[str, float],
    start=None,
) -> float:
    """Gaussian-integral approximation of log pi(y | theta) at one theta."""
    approx = newton_gaussian_approx(y, latent, obs, hyper, start=start)
    return approx.objective + 0.5 * approx.dim * LOG_2PI - 0.5 * approx.log_det


@dataclass(frozen=True)
class HyperGrid:
    """Deterministic integration grid over transformed hyperparameters.

    ``nodes[i]`` is one point in the transformed space named by ``names``
    (log precisions, kappa); ``log_pw[i]`` is the log of prior density times
    quadrature weight, so that summing ``exp(laplace + log_pw)`` over nodes
    approximates the integral of the marginal against the hyperprior.
    """

    names: tuple[str, ...]
    nodes: np.ndarray = field(repr=False)
    log_pw: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[0] == 0:
            raise ValueError("hyper grid needs at least one node")
        if self.nodes.shape != (self.log_pw.size, len(self.names)):
            raise ValueError("inconsistent hyper grid shapes")
        if not np.isfinite(self.log_pw).all():
            raise ValueError("hyper grid weights must be finite")

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def point(self, i: int) -> dict[str, float]:
        return dict(zip(self.names, self.nodes[i]))

    @classmethod
    def build(
        cls,
        latent: LatentSpec,
        obs: ObsSpec,
        nodes_per_dim: int | Mapping[str, int] = 9,
        q_lo: float = 0.01,
        q_hi: float = 0.99,
    ) -> "HyperGrid":
        """Place nodes at prior quantiles, one axis per hyperparameter.

        Precisions are gridded on the log scale (with the Jacobian folded
        into the node density); kappa is gridded directly. Weights are
        trapezoid widths in the transformed space; a single-node axis gets
        unit weight.
        """

        def n_for(name):
            if isinstance(nodes_per_dim, Mapping):
                return int(nodes_per_dim.get(name, 9))
            return int(nodes_per_dim)

        def log_scale_axis(name, prior: GammaPrior):
            qs = np.linspace(q_lo, q_hi, n_for(name))
            tau = prior.ppf(qs)
            nodes = np.log(tau)
            dens = prior.log_pdf(tau) + nodes  # density of log(tau)
            return name, nodes, dens

        def normal_axis(name, prior: NormalPrior):
            qs = np.linspace(q_lo, q_hi, n_for(name))
            nodes = prior.ppf(qs)
            return name, nodes, prior.log_pdf(nodes)

        axes = [log_scale_axis("log_prec_x", latent.precision_prior)]
        if latent.kind == "ar1":
            axes.append(normal_axis("kappa", latent.kappa_prior))
        if obs.kind == "gaussian-identity":
            axes.append(log_scale_axis("log_prec_y", obs.noise_precision_prior))

        names = tuple(a[0] for a in axes)
        per_axis = []
        for _, nodes, dens in axes:
            if nodes.size == 1:
                logw = np.zeros(1)
            else:
                width = np.empty(nodes.size)
                width[0] = 0.5 * (nodes[1] - nodes[0])
                width[-1] = 0.5 * (nodes[-1] - nodes[-2])
                width[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
                logw = np.log(width)
            per_axis.append((nodes, dens + logw))

        combos = list(itertools.product(*[range(n.size) for n, _ in per_axis]))
        grid_nodes = np.array(
            [[per_axis[d][0][idx[d]] for d in range(len(per_axis))] for idx in combos]
        )
        log_pw = np.array(
            [sum(per_axis[d][1][idx[d]] for d in range(len(per_axis))) for idx in combos]
        )
        return cls(names=names, nodes=grid_nodes, log_pw=log_pw)


def hyper_grid_log_marginal(
    y,
    latent: LatentSpec,
    obs: ObsSpec,
    grid: HyperGrid,
    diagnostics: dict | None = None,
    node_starts: list | None = None,
) -> float:
    """Integrate the Laplace marginal over the hyperparameter grid.

    Node failures are dropped from the sum (and counted in ``diagnostics``
    under ``"failed_nodes"``); a segment where every node fails comes back
    as ``-inf``. ``node_starts`` may hold one ``(x, intercept)`` warm start
    per node and, when given, is updated in place with the converged modes;
    warm starts only affect iteration counts, never the fixpoint.
    """
    y = np.asarray(y, dtype=float)
    vals = np.full(grid.size, -np.inf)
    warm = None
    failed = 0
    for i in range(grid.size):
        hyper = grid.point(i)
        start = warm
        if node_starts is not None and node_starts[i] is not None:
            start = node_starts[i]
        try:
            approx = newton_gaussian_approx(y, latent, obs, hyper, start=start)
        except NewtonError:
            failed += 1
            warm = None
            continue
        warm = (approx.x, approx.intercept)
        if node_starts is not None:
            node_starts[i] = warm
        vals[i] = (
            approx.objective
            + 0.5 * approx.dim * LOG_2PI
            - 0.5 * approx.log_det
            + grid.log_pw[i]
        )
    if diagnostics is not None:
        diagnostics["failed_nodes"] = diagnostics.get("failed_nodes", 0) + failed
    mx = vals.max()
    if not np.isfinite(mx):
        return -np.inf
    return float(mx + np.log(np.exp(vals - mx).sum()))


class GmrfMarginalProvider(SegmentModel):
    """Segment marginal provider backed by the Laplace + hyper-grid pipeline.

    Values are cached per (start, end) pair; the cache only ever stores
    deterministic results so concurrent refills are harmless.
    """

    min_segment_len = GMRF_MIN_SEGMENT_LEN

    def __init__(self, y, latent: LatentSpec, obs: ObsSpec, grid: HyperGrid):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("need a nonempty 1-d series")
        if obs.kind == "poisson-log":
            if np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValueError("poisson observations must be nonnegative integers")
        self.y = y
        self.latent = latent
        self.obs = obs
        self.grid = grid
        self.failed_nodes = 0
        self._cache: dict[tuple[int, int], float] = {}

    @property
    def n(self) -> int:
        return int(self.y.size)

    def log_marginal(self, t: int, s: int) -> float:
        self._check_range(t, s)
        if s - t + 1 < self.min_segment_len:
            return -np.inf
        key = (int(t), int(s))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        diag = {}
        val = hyper_grid_log_marginal(
            self.y[t - 1 : s], self.latent, self.obs, self.grid, diagnostics=diag
        )
        self.failed_nodes += diag.get("failed_nodes", 0)
        self._cache[key] = val
        return val

    def log_marginal_many(self, ts, ss) -> np.ndarray:
        """Batched evaluation; rows sharing one start index reuse node modes.

        When the starts are constant and the ends ascend (the access pattern
        of a table fill), each node's converged mode is carried to the next,
        longer segment as a warm start, padded with its own last value.
        """
        ts = np.asarray(ts, dtype=np.int64)
        ss = np.asarray(ss, dtype=np.int64)
        if ts.size == 0:
            return np.empty(0)
        same_start = np.all(ts == ts[0])
        ascending = np.all(np.diff(ss) > 0) if ss.size > 1 else True
        if not (same_start and ascending):
            return np.array([self.log_marginal(int(t), int(s)) for t, s in zip(ts, ss)])
        t = int(ts[0])
        self._check_range(ts, ss)
        node_starts: list = [None] * self.grid.size
        out = np.empty(ss.size)
        for j, s_raw in enumerate(ss):
            s = int(s_raw)
            m = s - t + 1
            if m < self.min_segment_len:
                out[j] = -np.inf
                continue
            key = (t, s)
            hit = self._cache.get(key)
            if hit is not None:
                out[j] = hit
                continue
            starts = [
                None if w is None else (_extend_mode(w[0], m), w[1])
                for w in node_starts
            ]
            diag = {}
            val = hyper_grid_log_marginal(
                self.y[t - 1 : s],
                self.latent,
                self.obs,
                self.grid,
                diagnostics=diag,
                node_starts=starts,
            )
            node_starts = starts
            self.failed_nodes += diag.get("failed_nodes", 0)
            self._cache[key] = val
            out[j] = val
        return out

    def segment_summary(self, t: int, s: int) -> dict:
        """Hyper point maximizing prior-weighted Laplace value on y[t..s]."""
        self._check_range(t, s)
        y = self.y[t - 1 : s]
        best = None
        warm = None
        for i in range(self.grid.size):
            hyper = self.grid.point(i)
            try:
                approx = newton_gaussian_approx(y, self.latent, self.obs, hyper, start=warm)
            except NewtonError:
                warm = None
                continue
            warm = (approx.x, approx.intercept)
            score = (
                approx.objective
                + 0.5 * approx.dim * LOG_2PI
                - 0.5 * approx.log_det
                + self.grid.log_pw[i]
            )
            if best is None or score > best[0]:
                best = (score, hyper, approx)
        if best is None:
            return {"failed": True}
        _, hyper, approx = best
        out = {"log_prec_x": hyper["log_prec_x"], "sigma_x": float(np.exp(-0.5 * hyper["log_prec_x"]))}
        if "kappa" in hyper:
            out["kappa"] = hyper["kappa"]
            out["phi"] = float(phi_from_kappa(hyper["kappa"]))
        if "log_prec_y" in hyper:
            out["log_prec_y"] = hyper["log_prec_y"]
            out["sigma_y"] = float(np.exp(-0.5 * hyper["log_prec_y"]))
        if approx.intercept is not None:
            out["intercept_mode"] = float(approx.intercept)
        return out
