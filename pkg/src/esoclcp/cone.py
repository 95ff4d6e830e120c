"""Extended second order cones and their complementarity structure.

The cone L(k, l) collects pairs (x, u) in R^k x R^l with x >= ||u||_2 * e
componentwise, where e is the all-ones vector.  Its dual M(k, l) collects the
pairs with e^T x >= ||u||_2 and x >= 0.  A pair of points ((x, u), (y, v))
with (x, u) in L and (y, v) in M is complementary when the full inner product
x.y + u.v vanishes; every complementary pair falls into exactly one of four
mutually exclusive cases depending on whether u and v vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-8

CASE_NONE = "none"
CASE_ORDER = ("I", "II", "III", "IV")


@dataclass(frozen=True)
class ConeDims:
    """Dimensions (k, l) of the cone: k ordered components, l free components."""

    k: int
    l: int

    def __post_init__(self) -> None:
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")
        if not (isinstance(self.l, (int, np.integer)) and self.l >= 1):
            raise ValueError(f"l must be an integer >= 1, got {self.l!r}")

    @property
    def m(self) -> int:
        return self.k + self.l


@dataclass(eq=False)
class ConePoint:
    """A point (x, u) with x in R^k and u in R^l."""

    x: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        self.x = _as_vector(self.x, "x")
        self.u = _as_vector(self.u, "u")


@dataclass(eq=False)
class CompCase:
    """Outcome of a complementarity classification.

    ``case`` is one of "I", "II", "III", "IV" or "none"; ``lam`` is the
    positive multiplier v = -lam * u and is present only for case IV;
    ``residuals`` maps condition names of the matched (or nearest) case to
    their violation magnitudes, all of which are <= tol iff the case matched.
    """

    case: str
    lam: float | None = None
    residuals: dict[str, float] = field(default_factory=dict)


def _as_vector(a, name: str) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    if out.ndim != 1 or out.size < 1:
        raise ValueError(f"{name} must be a nonempty 1-d vector, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    return out


def _check_point(dims: ConeDims, x: np.ndarray, u: np.ndarray) -> None:
    if x.shape != (dims.k,):
        raise ValueError(f"x has length {x.shape[0]}, expected k={dims.k}")
    if u.shape != (dims.l,):
        raise ValueError(f"u has length {u.shape[0]}, expected l={dims.l}")


def in_L(dims: ConeDims, p: ConePoint, tol: float = DEFAULT_TOL) -> bool:
    """Whether (x, u) lies in L(k, l): min_i x_i >= ||u|| - tol."""
    _check_point(dims, p.x, p.u)
    return bool(np.min(p.x) >= float(np.linalg.norm(p.u)) - tol)


def in_M(dims: ConeDims, p: ConePoint, tol: float = DEFAULT_TOL) -> bool:
    """Whether (x, u) lies in the dual cone M(k, l).

    Requires e^T x >= ||u|| - tol and min_i x_i >= -tol.
    """
    _check_point(dims, p.x, p.u)
    return bool(
        np.sum(p.x) >= float(np.linalg.norm(p.u)) - tol and np.min(p.x) >= -tol
    )


def _orthant_residuals(a: np.ndarray, b: np.ndarray) -> dict[str, float]:
    # complementarity on the nonnegative orthant: a >= 0, b >= 0, a_i b_i = 0
    return {
        "x_neg": float(max(0.0, -np.min(a))),
        "y_neg": float(max(0.0, -np.min(b))),
        "pairing": float(np.max(np.abs(a * b))),
    }


def _case_residuals(
    x: np.ndarray, u: np.ndarray, y: np.ndarray, v: np.ndarray
) -> dict[str, dict[str, float]]:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    out: dict[str, dict[str, float]] = {}

    out["I"] = {"u_norm": nu, "v_norm": nv, **_orthant_residuals(x, y)}

    # u = 0, v != 0 is encoded as a requirement that ||v|| exceed tol; the
    # violation stored is how far ||v|| falls short of being nonzero, which the
    # matcher turns into the condition nv > tol.
    out["II"] = {
        "u_norm": nu,
        "tail_short": float(max(0.0, nv - np.sum(y))),
        **_orthant_residuals(x, y),
    }

    out["III"] = {
        "v_norm": nv,
        "cone_gap": float(max(0.0, nu - np.min(x))),
        **_orthant_residuals(x, y),
    }

    lam = nv / nu if nu > 0 else float("inf")
    if np.isfinite(lam):
        parallel = float(np.linalg.norm(v + lam * u))
        shifted = x - nu * np.ones_like(x)
        out["IV"] = {
            "parallel": parallel,
            "tail": float(abs(np.sum(y) - nv)),
            **_orthant_residuals(shifted, y),
        }
    else:
        out["IV"] = {"parallel": float("inf"), "tail": float("inf"), "x_neg": float("inf"), "y_neg": float("inf"), "pairing": float("inf")}
    return out


def classify_complementarity(
    dims: ConeDims,
    x,
    u,
    y,
    v,
    tol: float = DEFAULT_TOL,
) -> CompCase:
    """Classify a complementary tuple ((x, u), (y, v)) into one of four cases.

    Cases are tried in order and the first match is returned:

    I.   u = 0, v = 0, and (x, y) complementary on the nonnegative orthant.
    II.  u = 0, v != 0, e^T y >= ||v||, and (x, y) complementary.
    III. u != 0, v = 0, x >= ||u|| e, and (x, y) complementary.
    IV.  u != 0, v != 0, v = -lam u with lam = ||v||/||u|| > 0, e^T y = ||v||,
         and (x - ||u|| e, y) complementary on the nonnegative orthant.

    A vector counts as zero when its norm is <= tol, and each residual is
    accepted when <= tol.  If nothing matches, the case is "none" and the
    residuals of the nearest case (smallest worst violation) are reported.
    """
    x = _as_vector(x, "x")
    u = _as_vector(u, "u")
    y = _as_vector(y, "y")
    v = _as_vector(v, "v")
    _check_point(dims, x, u)
    _check_point(dims, y, v)
    if tol < 0:
        raise ValueError("tol must be nonnegative")

    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    u_zero = nu <= tol
    v_zero = nv <= tol
    res = _case_residuals(x, u, y, v)

    def orthant_ok(r: dict[str, float]) -> bool:
        return r["x_neg"] <= tol and r["y_neg"] <= tol and r["pairing"] <= tol

    if u_zero and v_zero and orthant_ok(res["I"]):
        return CompCase("I", None, res["I"])
    if u_zero and not v_zero and res["II"]["tail_short"] <= tol and orthant_ok(res["II"]):
        return CompCase("II", None, res["II"])
    if not u_zero and v_zero and res["III"]["cone_gap"] <= tol and orthant_ok(res["III"]):
        return CompCase("III", None, res["III"])
    if (
        not u_zero
        and not v_zero
        and res["IV"]["parallel"] <= tol
        and res["IV"]["tail"] <= tol
        and orthant_ok(res["IV"])
    ):
        return CompCase("IV", nv / nu, res["IV"])

    # no match: report the case with the smallest worst violation
    def worst(name: str) -> float:
        vals = [val for key, val in res[name].items() if key not in ("u_norm", "v_norm")]
        # zero-requirements on u/v participate for the cases that demand them
        if name in ("I", "II"):
            vals.append(res[name]["u_norm"])
        if name == "I":
            vals.append(res[name]["v_norm"])
        if name == "III":
            vals.append(res[name]["v_norm"])
        return max(vals)

    best = min(CASE_ORDER, key=lambda name: (worst(name), CASE_ORDER.index(name)))
    return CompCase(CASE_NONE, None, res[best])
