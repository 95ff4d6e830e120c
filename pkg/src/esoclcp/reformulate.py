"""Reduction of the cone complementarity problem to a mixed one on the orthant.

A solution (x, u) of the cone problem with u != 0 satisfies, with t = ||u||
and the shifted variable x_m = x - t e, a mixed complementarity system on the
nonnegative orthant in the unknowns (x_m, u, t):

    G1(x_m, u, t, w) = A(w) (x_m + t e) + B(w) u + p(w)            (k rows)
    G2(x_m, u, t, w) = ([t C(w) + u e^T A(w)] (x_m + t e)
                        + u e^T [B(w) u + p(w)] + t [D(w) u + q(w)];
                        t^2 - ||u||^2)                             (l + 1 rows)

where x_m and G1 must be complementary nonnegative vectors and G2 must
vanish.  This module evaluates G1, G2 and their Jacobian with respect to
(x_m, u, t), and converts points between the two coordinate systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import ConePoint
from .problem import ProblemSpec, realize


@dataclass(eq=False)
class MixPoint:
    """A point (x_m, u, t) of the reformulated problem."""

    x_m: np.ndarray
    u: np.ndarray
    t: float

    def __post_init__(self) -> None:
        self.x_m = np.asarray(self.x_m, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.t = float(self.t)
        if self.x_m.ndim != 1 or self.u.ndim != 1:
            raise ValueError("x_m and u must be 1-d vectors")
        if not (np.all(np.isfinite(self.x_m)) and np.all(np.isfinite(self.u)) and np.isfinite(self.t)):
            raise ValueError("mix point must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x_m, self.u, [self.t]])

    @staticmethod
    def from_vector(z, k: int, l: int) -> "MixPoint":
        z = np.asarray(z, dtype=float)
        if z.shape != (k + l + 1,):
            raise ValueError(f"expected a vector of length {k + l + 1}, got shape {z.shape}")
        return MixPoint(z[:k], z[k : k + l], z[k + l])


@dataclass(eq=False)
class JacobianBlocks:
    """Blocks of the Jacobian of (G1, G2) with respect to (x_m, (u, t))."""

    A_tilde: np.ndarray  # (k, k)      dG1/dx_m
    B_tilde: np.ndarray  # (k, l+1)    dG1/d(u, t)
    C_tilde: np.ndarray  # (l+1, k)    dG2/dx_m
    D_tilde: np.ndarray  # (l+1, l+1)  dG2/d(u, t)


def _check_mix(spec: ProblemSpec, p: MixPoint) -> None:
    if p.x_m.shape != (spec.dims.k,):
        raise ValueError(f"x_m must have length {spec.dims.k}, got shape {p.x_m.shape}")
    if p.u.shape != (spec.dims.l,):
        raise ValueError(f"u must have length {spec.dims.l}, got shape {p.u.shape}")


def _realized_blocks(spec: ProblemSpec, omega):
    real = realize(spec, omega)
    k = spec.dims.k
    A = real.T[:k, :k]
    B = real.T[:k, k:]
    C = real.T[k:, :k]
    D = real.T[k:, k:]
    return A, B, C, D, real.r[:k], real.r[k:]


def f1_eval(spec: ProblemSpec, omega, p: MixPoint) -> np.ndarray:
    """First block G1 = A(w) (x_m + t e) + B(w) u + p(w)."""
    _check_mix(spec, p)
    A, B, _, _, p_vec, _ = _realized_blocks(spec, omega)
    x_full = p.x_m + p.t
    return A @ x_full + B @ p.u + p_vec


def f2_eval(spec: ProblemSpec, omega, p: MixPoint) -> np.ndarray:
    """Second block G2; the last component is t^2 - ||u||^2."""
    _check_mix(spec, p)
    A, B, C, D, p_vec, q_vec = _realized_blocks(spec, omega)
    x_full = p.x_m + p.t
    col_a = A.sum(axis=0)  # e^T A
    head = (p.t * C + np.outer(p.u, col_a)) @ x_full
    head += p.u * float(np.sum(B @ p.u + p_vec))
    head += p.t * (D @ p.u + q_vec)
    tail = p.t * p.t - float(p.u @ p.u)
    return np.concatenate([head, [tail]])


def jacobian_blocks(spec: ProblemSpec, omega, p: MixPoint) -> JacobianBlocks:
    """Jacobian blocks of (G1, G2) at p with respect to (x_m, u, t)."""
    _check_mix(spec, p)
    A, B, C, D, p_vec, q_vec = _realized_blocks(spec, omega)
    k, l = spec.dims.k, spec.dims.l
    x_full = p.x_m + p.t
    g1 = A @ x_full + B @ p.u + p_vec
    col_a = A.sum(axis=0)  # e^T A
    col_b = B.sum(axis=0)  # e^T B

    a_t = A.copy()
    b_t = np.hstack([B, A.sum(axis=1, keepdims=True)])  # [B | A e]

    c_t = np.vstack([p.t * C + np.outer(p.u, col_a), np.zeros((1, k))])

    ul = float(np.sum(g1)) * np.eye(l) + np.outer(p.u, col_b) + p.t * D
    ur = C @ x_full + p.t * C.sum(axis=1) + p.u * float(col_a.sum()) + D @ p.u + q_vec
    bottom = np.concatenate([-2.0 * p.u, [2.0 * p.t]])
    d_t = np.vstack([np.hstack([ul, ur[:, None]]), bottom[None, :]])
    return JacobianBlocks(a_t, b_t, c_t, d_t)


def recover_lcp_point(p: MixPoint) -> ConePoint:
    """Map (x_m, u, t) back to the cone variables (x_m + t e, u)."""
    return ConePoint(p.x_m + p.t, p.u.copy())


def init_from_lcp(x, u) -> MixPoint:
    """Map cone variables (x, u) to (x - ||u|| e, u, ||u||)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    t = float(np.linalg.norm(u))
    return MixPoint(x - t, u, t)
