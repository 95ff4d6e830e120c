"""Problem data model: file format, realization, builtin instance, F."""

import numpy as np
import pytest

from esoclcp.problem import (
    ProblemParseError,
    ProblemValidationError,
    builtin_example,
    f_eval,
    load_problem,
    realize,
    realize_batch,
    serialize_problem,
)

T_ROWS = [
    (41, -3, -31, 18, 19),
    (28, 22, -33, 25, -29),
    (-23, -29, 11, -21, -43),
    (-9, -31, -20, -12, 47),
    (-8, 46, 50, -22, 21),
]
R_BASE = (-26, 4, 23, 44, -19)


def test_builtin_matrices():
    spec = builtin_example()
    assert spec.dims.k == 3 and spec.dims.l == 2 and spec.omega_dim == 3
    assert np.array_equal(spec.T_base, np.array(T_ROWS, dtype=float))
    assert np.array_equal(spec.r_base, np.array(R_BASE, dtype=float))
    assert spec.distribution.kind == "iid_normal"
    assert spec.distribution.mean == 0.0 and spec.distribution.std == 1.0


def test_realize_zero_omega_is_base():
    spec = builtin_example()
    real = realize(spec, np.zeros(3))
    assert np.array_equal(real.T, spec.T_base)
    assert np.array_equal(real.r, spec.r_base)


def test_realize_perturbations():
    spec = builtin_example()
    real = realize(spec, np.array([1.0, 0.0, 0.0]))
    assert real.T[0][0] == 42.0
    base_mask = np.ones((5, 5), dtype=bool)
    base_mask[0, 0] = False
    assert np.array_equal(real.T[base_mask], spec.T_base[base_mask])

    real = realize(spec, np.array([0.0, 2.0, 1.0]))
    assert real.T[3][2] == -20 + 2 * 2
    assert real.r[1] == 4 - 1


def test_realize_is_affine_in_omega():
    spec = builtin_example()
    rng = np.random.default_rng(3)
    for _ in range(50):
        w1 = rng.normal(size=3)
        w2 = rng.normal(size=3)
        lhs_T = realize(spec, w1 + w2).T + spec.T_base
        rhs_T = realize(spec, w1).T + realize(spec, w2).T
        assert np.allclose(lhs_T, rhs_T, atol=1e-12)
        lhs_r = realize(spec, w1 + w2).r + spec.r_base
        rhs_r = realize(spec, w1).r + realize(spec, w2).r
        assert np.allclose(lhs_r, rhs_r, atol=1e-12)


def test_realize_batch_matches_single():
    spec = builtin_example()
    rng = np.random.default_rng(11)
    omegas = rng.normal(size=(40, 3))
    T_all, r_all = realize_batch(spec, omegas)
    for i in (0, 7, 39):
        single = realize(spec, omegas[i])
        assert np.array_equal(T_all[i], single.T)
        assert np.array_equal(r_all[i], single.r)


def test_f_eval_zero_point_gives_r():
    spec = builtin_example()
    w = np.array([0.3, -1.2, 0.5])
    out = f_eval(spec, w, np.zeros(3), np.zeros(2))
    assert np.array_equal(out, realize(spec, w).r)


def test_f_eval_paper_solution():
    spec = builtin_example()
    out = f_eval(spec, np.zeros(3), np.array([1.546, 0.261, 1.059]), np.array([0.124, -0.254]))
    expect = np.array([1.20, 28.57, -0.18, -12.62, 25.51])
    assert np.all(np.abs(out - expect) <= 0.05), out


def test_f_eval_is_linear_in_point():
    spec = builtin_example()
    rng = np.random.default_rng(19)
    w = rng.normal(size=3)
    for _ in range(30):
        x1, x2 = rng.normal(size=(2, 3))
        u1, u2 = rng.normal(size=(2, 2))
        a, b = rng.normal(size=2)
        lhs = f_eval(spec, w, a * x1 + b * x2, a * u1 + b * u2)
        rhs = (
            a * f_eval(spec, w, x1, u1)
            + b * f_eval(spec, w, x2, u2)
            - (a + b - 1) * realize(spec, w).r
        )
        scale = 1 + np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_serialize_round_trip():
    spec = builtin_example()
    text = serialize_problem(spec)
    again = load_problem(text)
    assert again.dims == spec.dims
    assert again.omega_dim == spec.omega_dim
    assert np.array_equal(again.T_base, spec.T_base)
    assert np.array_equal(again.r_base, spec.r_base)
    assert again.T_perturb == spec.T_perturb
    assert again.r_perturb == spec.r_perturb
    assert again.distribution == spec.distribution


def test_load_rejects_out_of_range_omega_index():
    spec = builtin_example()
    text = serialize_problem(spec).replace('"omega": 2', '"omega": 3')
    with pytest.raises(ProblemValidationError):
        load_problem(text)


def test_load_rejects_wrong_T_shape():
    text = """
    {"k": 3, "l": 2, "omega_dim": 3,
     "T_base": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]],
     "r_base": [0,0,0,0,0],
     "T_perturb": [], "r_perturb": [],
     "distribution": {"kind": "iid_normal", "mean": 0, "std": 1}}
    """
    with pytest.raises(ProblemValidationError):
        load_problem(text)


def test_load_rejects_unknown_keys():
    spec = builtin_example()
    text = serialize_problem(spec).replace('"k":', '"extra": 1, "k":', 1)
    with pytest.raises((ProblemParseError, ProblemValidationError)):
        load_problem(text)


def test_load_rejects_malformed_text():
    with pytest.raises(ProblemParseError):
        load_problem("{not json")


def test_f_eval_identity_spec():
    text = """
    {"k": 1, "l": 1, "omega_dim": 1,
     "T_base": [[1,0],[0,1]], "r_base": [0,0],
     "T_perturb": [], "r_perturb": [],
     "distribution": {"kind": "iid_normal", "mean": 0, "std": 1}}
    """
    spec = load_problem(text)
    out = f_eval(spec, np.zeros(1), np.array([3.0]), np.array([4.0]))
    assert np.array_equal(out, [3.0, 4.0])
