"""Sample average approximation of the smoothed tail objective.

Sampling contract: draws come from the counter-based Philox generator keyed
by the seed, mapped to open-interval uniforms via (h + 0.5) / 2^53 over
53-bit integers, then to normals by the inverse CDF (scipy's ndtri) and
scaled by the distribution's mean and standard deviation.  The stream is a
pure function of (seed, N, omega_dim), so equal seeds reproduce draws
bit-for-bit and the whole pipeline downstream of them.

The objective approximates the smoothed conditional value-at-risk of the
merit loss theta(z, w) over N draws:

    Nhat(z, Theta) = Theta + (alpha N)^{-1} sum_j [theta(z, w_j) - Theta]_mu

with gradient assembled from the per-draw merit gradients J_j^T R_j weighted
by the smoothed-plus derivative at theta_j - Theta, and Theta-derivative
1 - (alpha N)^{-1} sum_j p'(theta_j - Theta).  theta_star solves the strictly
increasing Theta-derivative for its unique root by bracketed bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .problem import DistributionSpec, ProblemSpec, realize_batch
from .reformulate import MixPoint
from .risk import SmoothingKind, smooth_plus, smooth_plus_deriv

_MAX_SEED = 2**64 - 1


@dataclass(eq=False)
class SampleSet:
    """N draws of the random vector plus the seed that produced them."""

    draws: np.ndarray  # (N, omega_dim)
    seed: int
    N: int

    def __post_init__(self) -> None:
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 2:
            raise ValueError(f"draws must be 2-d, got shape {self.draws.shape}")
        if self.draws.shape[0] != self.N:
            raise ValueError(f"N={self.N} does not match draws.shape[0]={self.draws.shape[0]}")
        if not 0 <= self.seed <= _MAX_SEED:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(eq=False)
class SAAPoint:
    """A spatial point plus the tail threshold Theta."""

    p: MixPoint
    Theta: float

    def __post_init__(self) -> None:
        self.Theta = float(self.Theta)
        if not np.isfinite(self.Theta):
            raise ValueError("Theta must be finite")


def draw_samples(dist: DistributionSpec, omega_dim: int, N: int, seed: int) -> SampleSet:
    """Draw an (N, omega_dim) table of iid normals; deterministic in the seed."""
    if dist.kind != "iid_normal":
        raise ValueError(f"unsupported distribution kind {dist.kind!r}")
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise ValueError(f"N must be an integer >= 1, got {N!r}")
    if not (isinstance(omega_dim, (int, np.integer)) and omega_dim >= 1):
        raise ValueError(f"omega_dim must be an integer >= 1, got {omega_dim!r}")
    if not (isinstance(seed, (int, np.integer)) and 0 <= int(seed) <= _MAX_SEED):
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    h = gen.integers(0, 2**53, size=(int(N), int(omega_dim)), dtype=np.uint64)
    uniforms = (h.astype(float) + 0.5) / 2**53
    z = ndtri(uniforms)
    return SampleSet(dist.mean + dist.std * z, int(seed), int(N))


class SampleEvaluator:
    """Vectorized residual/Jacobian/merit evaluation over a fixed sample.

    Realizes T(w_j), r(w_j) once for the whole sample and evaluates batches
    with a handful of array contractions; agrees with the per-draw functions
    in reformulate and merit to rounding error.
    """

    def __init__(self, spec: ProblemSpec, draws) -> None:
        self.spec = spec
        self.k = spec.dims.k
        self.l = spec.dims.l
        self.dim = self.k + self.l + 1
        T, r = realize_batch(spec, draws)
        self.N = T.shape[0]
        k = self.k
        self.A = T[:, :k, :k]
        self.B = T[:, :k, k:]
        self.C = T[:, k:, :k]
        self.D = T[:, k:, k:]
        self.p = r[:, :k]
        self.q = r[:, k:]
        self.col_a = self.A.sum(axis=1)  # e^T A, (N, k)
        self.col_b = self.B.sum(axis=1)  # e^T B, (N, l)
        self.row_a = self.A.sum(axis=2)  # A e,   (N, k)
        self.row_c = self.C.sum(axis=2)  # C e,   (N, l)
        self.sum_a = self.col_a.sum(axis=1)  # e^T A e, (N,)
        # flattened views of the data blocks so the per-point contractions
        # run as single BLAS products instead of batched einsums
        n = self.N
        self.A2 = np.ascontiguousarray(self.A).reshape(n * k, k)
        self.B2 = np.ascontiguousarray(self.B).reshape(n * k, self.l)
        self.C2 = np.ascontiguousarray(self.C).reshape(n * self.l, k)
        self.D2 = np.ascontiguousarray(self.D).reshape(n * self.l, self.l)
        # sample means of the data blocks, reused by every mean-Jacobian call
        self.A_bar = self.A.mean(axis=0)
        self.B_bar = self.B.mean(axis=0)
        self.C_bar = self.C.mean(axis=0)
        self.D_bar = self.D.mean(axis=0)
        self.col_a_bar = self.col_a.mean(axis=0)
        self.col_b_bar = self.col_b.mean(axis=0)
        self.row_c_bar = self.row_c.mean(axis=0)
        self.sum_a_bar = float(self.sum_a.mean())

    def _g1_v(self, p: MixPoint) -> tuple[np.ndarray, np.ndarray]:
        # one pass over the data blocks: G1 = A x + B u + p, v = C x + D u + q
        n, k, l = self.N, self.k, self.l
        x_full = p.x_m + p.t
        g1 = (self.A2 @ x_full).reshape(n, k) + (self.B2 @ p.u).reshape(n, k) + self.p
        v = (self.C2 @ x_full).reshape(n, l) + (self.D2 @ p.u).reshape(n, l) + self.q
        return g1, v

    def residuals(self, p: MixPoint, g1v: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        """Stacked residuals, shape (N, k+l+1)."""
        k, l = self.k, self.l
        g1, v = self._g1_v(p) if g1v is None else g1v
        out = np.empty((self.N, self.dim))
        out[:, :k] = np.hypot(p.x_m, g1)
        out[:, :k] -= p.x_m + g1
        # t (C x + D u + q) + u e^T (A x + B u + p) equals the quoted head block
        out[:, k : k + l] = p.t * v + g1.sum(axis=1)[:, None] * p.u
        out[:, k + l] = p.t * p.t - float(p.u @ p.u)
        return out

    def thetas(self, p: MixPoint, res: np.ndarray | None = None) -> np.ndarray:
        """Merit losses 0.5 ||R_j||^2, shape (N,)."""
        if res is None:
            res = self.residuals(p)
        return 0.5 * np.einsum("ni,ni->n", res, res)

    def jacobians(self, p: MixPoint) -> np.ndarray:
        """Residual Jacobians, shape (N, k+l+1, k+l+1)."""
        k, l, n = self.k, self.l, self.N
        x_full = p.x_m + p.t
        g1 = np.einsum("nij,j->ni", self.A, x_full) + np.einsum("nij,j->ni", self.B, p.u) + self.p
        norm = np.hypot(p.x_m, g1)
        safe = norm > 0
        da = np.where(safe, np.divide(p.x_m, norm, out=np.zeros_like(norm), where=safe) - 1.0, -1.0)
        db = np.where(safe, np.divide(g1, norm, out=np.zeros_like(norm), where=safe) - 1.0, -1.0)

        out = np.zeros((n, self.dim, self.dim))
        # FB rows: D_a + D_b A for x_m, D_b [B | A e] for (u, t)
        out[:, :k, :k] = db[:, :, None] * self.A
        idx = np.arange(k)
        out[:, idx, idx] += da
        out[:, :k, k : k + l] = db[:, :, None] * self.B
        out[:, :k, k + l] = db * self.row_a

        # equality rows: head block then the norm row
        out[:, k : k + l, :k] = p.t * self.C + p.u[None, :, None] * self.col_a[:, None, :]
        s1 = g1.sum(axis=1)
        idx_l = np.arange(l)
        out[:, k + idx_l, k + idx_l] = s1[:, None]
        out[:, k : k + l, k : k + l] += p.u[None, :, None] * self.col_b[:, None, :] + p.t * self.D
        out[:, k : k + l, k + l] = (
            np.einsum("nij,j->ni", self.C, x_full)
            + p.t * self.row_c
            + np.outer(self.sum_a, p.u)
            + np.einsum("nij,j->ni", self.D, p.u)
            + self.q
        )
        out[:, k + l, :k] = 0.0
        out[:, k + l, k : k + l] = -2.0 * p.u
        out[:, k + l, k + l] = 2.0 * p.t
        return out

    def merit_grads(self, p: MixPoint, res: np.ndarray | None = None, jac: np.ndarray | None = None) -> np.ndarray:
        """Per-draw merit gradients J_j^T R_j, shape (N, k+l+1)."""
        if res is None:
            res = self.residuals(p)
        if jac is None:
            jac = self.jacobians(p)
        return np.einsum("nij,ni->nj", jac, res)

    def _fb_and_data(self, p: MixPoint, g1v: tuple[np.ndarray, np.ndarray] | None = None):
        # shared pieces of the Jacobian rows: G1, v and the FB coefficients
        g1, v = self._g1_v(p) if g1v is None else g1v
        norm = np.hypot(p.x_m, g1)
        safe = norm > 0
        da = np.where(safe, np.divide(p.x_m, norm, out=np.zeros_like(norm), where=safe) - 1.0, -1.0)
        db = np.where(safe, np.divide(g1, norm, out=np.zeros_like(norm), where=safe) - 1.0, -1.0)
        return g1, v, da, db

    def weighted_merit_grad(
        self,
        p: MixPoint,
        w,
        res: np.ndarray | None = None,
        g1v: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> np.ndarray:
        """(1/N) sum_j w_j J_j^T R_j as one vector, no (N, dim, dim) arrays.

        The contraction is written block by block against the stored data
        blocks; agrees with weighting merit_grads to rounding error.
        """
        k, l, n = self.k, self.l, self.N
        if res is None:
            res = self.residuals(p, g1v)
        w = np.broadcast_to(np.asarray(w, dtype=float), (n,))
        g1, v, da, db = self._fb_and_data(p, g1v)

        fb = res[:, :k]
        h = res[:, k : k + l]
        tail = res[:, k + l]
        wfb_db = (w[:, None] * fb) * db  # (N, k)
        wh = w[:, None] * h  # (N, l)
        wt_sum = float(w @ tail)
        s1 = g1.sum(axis=1)
        whu = w * (h @ p.u)  # (N,)

        wfb_flat = wfb_db.reshape(n * k)
        wh_flat = wh.reshape(n * l)
        gx = ((w[:, None] * fb) * da).sum(axis=0)
        gx += self.A2.T @ wfb_flat
        gx += p.t * (self.C2.T @ wh_flat)
        gx += whu @ self.col_a

        gu = self.B2.T @ wfb_flat
        gu += ((w * s1)[:, None] * h).sum(axis=0)
        gu += whu @ self.col_b
        gu += p.t * (self.D2.T @ wh_flat)
        gu -= 2.0 * p.u * wt_sum

        tcol = v + p.t * self.row_c + np.outer(self.sum_a, p.u)
        gt = float((self.row_a * wfb_db).sum())
        gt += float((tcol * wh).sum())
        gt += 2.0 * p.t * wt_sum

        return np.concatenate([gx, gu, [gt]]) / n

    def mean_jacobian_residual(
        self,
        p: MixPoint,
        res: np.ndarray | None = None,
        g1v: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Sample means of the Jacobians and residuals, assembled blockwise."""
        k, l = self.k, self.l
        if res is None:
            res = self.residuals(p, g1v)
        g1, v, da, db = self._fb_and_data(p, g1v)
        jbar = np.zeros((self.dim, self.dim))
        jbar[:k, :k] = np.einsum("ni,nij->ij", db, self.A) / self.N
        jbar[np.arange(k), np.arange(k)] += da.mean(axis=0)
        jbar[:k, k : k + l] = np.einsum("ni,nij->ij", db, self.B) / self.N
        jbar[:k, k + l] = (db * self.row_a).mean(axis=0)
        jbar[k : k + l, :k] = p.t * self.C_bar + np.outer(p.u, self.col_a_bar)
        jbar[k : k + l, k : k + l] = (
            float(g1.sum(axis=1).mean()) * np.eye(l)
            + np.outer(p.u, self.col_b_bar)
            + p.t * self.D_bar
        )
        jbar[k : k + l, k + l] = v.mean(axis=0) + p.t * self.row_c_bar + self.sum_a_bar * p.u
        jbar[k + l, k : k + l] = -2.0 * p.u
        jbar[k + l, k + l] = 2.0 * p.t
        return jbar, res.mean(axis=0)


def objective(
    spec: ProblemSpec,
    s: SampleSet,
    q: SAAPoint,
    alpha: float,
    mu: float,
    kind: SmoothingKind = SmoothingKind.CHKS,
) -> float:
    """Nhat(z, Theta) = Theta + (alpha N)^{-1} sum_j [theta_j - Theta]_mu."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    ev = SampleEvaluator(spec, s.draws)
    thetas = ev.thetas(q.p)
    return q.Theta + float(np.mean(smooth_plus(thetas - q.Theta, mu, kind))) / alpha


def gradient(
    spec: ProblemSpec,
    s: SampleSet,
    q: SAAPoint,
    alpha: float,
    mu: float,
    kind: SmoothingKind = SmoothingKind.CHKS,
) -> np.ndarray:
    """Gradient of the objective in (x_m, u, t, Theta); length k + l + 2."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    ev = SampleEvaluator(spec, s.draws)
    res = ev.residuals(q.p)
    thetas = ev.thetas(q.p, res)
    w = smooth_plus_deriv(thetas - q.Theta, mu, kind)
    grads = ev.merit_grads(q.p, res)
    spatial = (w[:, None] * grads).mean(axis=0) / alpha
    theta_comp = 1.0 - float(np.mean(w)) / alpha
    return np.concatenate([spatial, [theta_comp]])


def theta_star(
    losses,
    alpha: float,
    mu: float,
    kind: SmoothingKind = SmoothingKind.CHKS,
    bracket: tuple[float, float] | None = None,
) -> float:
    """Unique minimizer of Theta + (alpha N)^{-1} sum [theta_j - Theta]_mu.

    Solves 1 - (alpha N)^{-1} sum p'(theta_j - Theta) = 0 by bisection on a
    bracket around the sample range, expanded geometrically until the signs
    differ, to absolute tolerance 1e-10 (1 + |Theta|).  A caller that knows
    the root's whereabouts (warm starts in the solver loop) may pass a small
    initial bracket instead; it is expanded the same way when it misses.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size < 1:
        raise ValueError(f"losses must be a nonempty 1-d vector, got shape {losses.shape}")
    if not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    mu = float(mu)
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")

    kind = SmoothingKind(kind)
    if kind is SmoothingKind.CHKS or kind is SmoothingKind.AUTO_SCALING_IP:
        # inline the derivative (both kinds share it) and reuse two scratch
        # buffers; this sits inside the innermost bisection loop of every
        # objective evaluation
        four_mu2 = 4.0 * mu * mu
        scale = 1.0 / (2.0 * alpha * losses.size)
        base = 1.0 - float(losses.size) * scale
        b1 = np.empty_like(losses)
        b2 = np.empty_like(losses)

        def h(theta: float) -> float:
            np.subtract(losses, theta, out=b1)
            np.multiply(b1, b1, out=b2)
            np.add(b2, four_mu2, out=b2)
            np.sqrt(b2, out=b2)
            np.divide(b1, b2, out=b1)
            return base - float(np.add.reduce(b1)) * scale

    else:

        def h(theta: float) -> float:
            return 1.0 - float(np.mean(smooth_plus_deriv(losses - theta, mu, kind))) / alpha

    # h is strictly increasing with limits 1 - 1/alpha < 0 and 1 > 0
    if bracket is None:
        off = 1.0 + 2.0 * mu / alpha
        lo = float(losses.min()) - off
        hi = float(losses.max()) + off
        while h(lo) > 0.0:
            off *= 2.0
            lo = float(losses.min()) - off
        while h(hi) < 0.0:
            off *= 2.0
            hi = float(losses.max()) + off
    else:
        lo, hi = float(bracket[0]), float(bracket[1])
        if not lo < hi:
            raise ValueError(f"bracket must satisfy lo < hi, got {bracket!r}")
        off = hi - lo
        while h(lo) > 0.0:
            lo -= off
            off *= 2.0
        while h(hi) < 0.0:
            hi += off
            off *= 2.0
    while hi - lo > 1e-10 * (1.0 + 0.5 * (abs(lo) + abs(hi))):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
