"""Fischer-Burmeister merit function for the reformulated problem.

The scalar C-function

    psi(a, b) = sqrt(a^2 + b^2) - (a + b)

vanishes exactly when a >= 0, b >= 0 and a b = 0.  Applying it componentwise
to the complementary pair (x_m, G1) and stacking the equality block G2 gives
the residual map

    R(x_m, u, t, w) = (psi((x_m)_1, (G1)_1), ..., psi((x_m)_k, (G1)_k), G2),

whose zeros are exactly the solutions of the mixed problem at the draw w.
The merit function is theta = 0.5 ||R||^2; its gradient is J^T R where J is
the residual Jacobian assembled from the blocks of dG/d(x_m, u, t) scaled by
the partial derivatives of psi.
"""

from __future__ import annotations

import numpy as np

from .problem import ProblemSpec
from .reformulate import MixPoint, f1_eval, f2_eval, jacobian_blocks


def fb_psi(a: float, b: float) -> float:
    """psi(a, b) = sqrt(a^2 + b^2) - (a + b); zero iff a, b >= 0 and a b = 0."""
    return float(np.hypot(a, b) - (a + b))


def fb_grad(a: float, b: float) -> tuple[float, float]:
    """Partial derivatives of psi; the convention at the origin is (-1, -1).

    Away from (0, 0) these are (a / sqrt(a^2+b^2) - 1, b / sqrt(a^2+b^2) - 1),
    each lying in [-2, 0].
    """
    n = np.hypot(a, b)
    if n == 0.0:
        return (-1.0, -1.0)
    return (float(a / n - 1.0), float(b / n - 1.0))


def residual(spec: ProblemSpec, omega, p: MixPoint) -> np.ndarray:
    """Stacked residual of length k + l + 1: FB block then equality block."""
    g1 = f1_eval(spec, omega, p)
    g2 = f2_eval(spec, omega, p)
    fb = np.hypot(p.x_m, g1) - (p.x_m + g1)
    return np.concatenate([fb, g2])


def merit_theta(spec: ProblemSpec, omega, p: MixPoint) -> float:
    """theta = 0.5 ||R||^2 over all k + l + 1 residual components."""
    r = residual(spec, omega, p)
    return 0.5 * float(r @ r)


def merit_jacobian(spec: ProblemSpec, omega, p: MixPoint) -> np.ndarray:
    """Jacobian of the residual, shape (k+l+1, k+l+1).

    Rows 1..k are the FB rows D_a + D_b * dG1/d(x_m, u, t) with
    D_a = diag(dpsi/da), D_b = diag(dpsi/db) evaluated at ((x_m)_i, (G1)_i);
    the remaining rows are the Jacobian blocks of G2 unchanged.
    """
    g1 = f1_eval(spec, omega, p)
    blocks = jacobian_blocks(spec, omega, p)
    k = spec.dims.k
    n = np.hypot(p.x_m, g1)
    safe = n > 0
    da = np.where(safe, np.divide(p.x_m, n, out=np.zeros_like(n), where=safe) - 1.0, -1.0)
    db = np.where(safe, np.divide(g1, n, out=np.zeros_like(n), where=safe) - 1.0, -1.0)
    top_left = np.diag(da) + db[:, None] * blocks.A_tilde
    top_right = db[:, None] * blocks.B_tilde
    top = np.hstack([top_left, top_right])
    bottom = np.hstack([blocks.C_tilde, blocks.D_tilde])
    return np.vstack([top, bottom])


def merit_grad(spec: ProblemSpec, omega, p: MixPoint) -> np.ndarray:
    """Gradient of theta with respect to (x_m, u, t): J^T R."""
    return merit_jacobian(spec, omega, p).T @ residual(spec, omega, p)
