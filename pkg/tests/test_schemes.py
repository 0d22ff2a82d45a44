import math

import numpy as np
import pytest
from scipy.optimize import brentq

from emdisc.analysis import fit_rate, ErrorTable, ErrorRow
from emdisc.randomness import BrownianPath, SeedSpec, coarsen, generate_block, generate_path
from emdisc.schemes import (
    ContinuousEmEval,
    EmPath,
    em_continuous_on_fine,
    em_discrete,
    linear_interpolant_eval,
    linear_interpolant_on_fine,
    sign_change_occupation,
    transformed_em,
    transformed_em_continuous_on_fine,
)
from emdisc.sde_model import FunctionSpec, PiecewiseDrift, SdeProblem
from emdisc.transform import build_transform, transformed_problem

SEED = SeedSpec(7)


def _problem(mu, sigma, x0=0.0):
    return SdeProblem(x0, PiecewiseDrift.lipschitz(mu), sigma)


def test_deterministic_euler():
    p = _problem(FunctionSpec.constant(1), FunctionSpec.constant(0))
    path = em_discrete(p, np.zeros(4), 4)
    np.testing.assert_array_equal(path.values, [0, 0.25, 0.5, 0.75, 1.0])


def test_pure_noise():
    p = _problem(FunctionSpec.constant(0), FunctionSpec.constant(1))
    bp = generate_path(SEED, 0, 64)
    path = em_discrete(p, coarsen(bp, 16), 16)
    np.testing.assert_array_equal(path.values, bp.values[::4])


def test_linear_drift_hand_recursion():
    p = _problem(FunctionSpec.affine(0, 1), FunctionSpec.constant(0), x0=1.0)
    np.testing.assert_array_equal(em_discrete(p, np.zeros(2), 2).values, [1, 1.5, 2.25])


def test_count_mismatch(p1):
    with pytest.raises(ValueError):
        em_discrete(p1, np.zeros(3), 4)


def test_continuous_equals_discrete_when_grids_coincide(p1):
    bp = generate_path(SEED, 1, 32)
    cont = em_continuous_on_fine(p1, bp, 32)
    np.testing.assert_array_equal(cont.values, em_discrete(p1, bp.increments, 32).values)


@pytest.mark.parametrize("n", [1, 4, 16, 64])
def test_grid_consistency(p1, two_breaks, n):
    bp = generate_path(SEED, 2, 256)
    for prob in (p1, two_breaks):
        cont = em_continuous_on_fine(prob, bp, n)
        disc = em_discrete(prob, coarsen(bp, n), n)
        np.testing.assert_array_equal(cont.node_values(), disc.values)


def test_continuous_zero_noise_is_piecewise_linear():
    p = _problem(FunctionSpec.affine(0, 1), FunctionSpec.constant(0), x0=1.0)
    cont = em_continuous_on_fine(p, BrownianPath(np.zeros(9)), 2)
    np.testing.assert_allclose(cont.values, np.interp(np.arange(9) / 8, [0, 0.5, 1], [1, 1.5, 2.25]),
                               rtol=1e-15)


def test_continuous_divisibility(p1):
    with pytest.raises(ValueError):
        em_continuous_on_fine(p1, generate_path(SEED, 0, 12), 5)


def test_batch_matches_single(two_breaks):
    block = generate_block(SEED, range(5), 128)
    batch = em_continuous_on_fine(two_breaks, block, 8).values
    for i in range(5):
        single = em_continuous_on_fine(two_breaks, generate_path(SEED, i, 128), 8).values
        np.testing.assert_array_equal(batch[i], single)


def test_interpolant():
    path = EmPath(4, np.array([0.0, 1.0, -1.0, 3.0, 2.0]))
    for i in range(5):
        assert linear_interpolant_eval(path, i / 4) == path.values[i]
    assert linear_interpolant_eval(EmPath(1, np.array([0.0, 1.0])), 0.5) == 0.5
    assert linear_interpolant_eval(path, 1.0) == 2.0
    assert linear_interpolant_eval(path, 0.375) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        linear_interpolant_eval(path, 1.5)
    fine = linear_interpolant_on_fine(path, 16)
    np.testing.assert_array_equal(fine[::4], path.values)
    np.testing.assert_allclose(fine, linear_interpolant_eval(path, np.arange(17) / 16))


def test_transformed_identity_matches_em(gbm):
    t = build_transform(gbm)
    tp = transformed_problem(t, gbm)
    inc = coarsen(generate_path(SEED, 3, 64), 64)
    np.testing.assert_array_equal(transformed_em(gbm, tp, t, inc, 64).values,
                                  em_discrete(gbm, inc, 64).values)


def _oracle_transformed(alpha, xi, nu, x0, dw):
    """Straight-line scalar recursion for G(X) with a single step-drift jump."""
    def phi(u):
        return (1 - u * u) ** 3 if abs(u) <= 1 else 0.0

    def dphi(u):
        return -6 * u * (1 - u * u) ** 2 if abs(u) <= 1 else 0.0

    def d2phi(u):
        return (1 - u * u) * (30 * u * u - 6) if abs(u) <= 1 else 0.0

    def G(x):
        d = x - xi
        return x + alpha * d * abs(d) * phi(d / nu)

    def Gp(x):
        d = x - xi
        return 1 + alpha * (2 * abs(d) * phi(d / nu) + d * abs(d) * dphi(d / nu) / nu)

    def Gpp(x):
        d = x - xi
        if d == 0:
            return 2 * alpha
        return alpha * (2 * math.copysign(1, d) * phi(d / nu) + 4 * abs(d) * dphi(d / nu) / nu
                        + d * abs(d) * d2phi(d / nu) / nu ** 2)

    def inv(z):
        return brentq(lambda x: G(x) - z, z - 1, z + 1, xtol=1e-15, rtol=1e-15)

    def mu(x):
        return 1.0 if x < xi else -1.0

    n = len(dw)
    z = G(x0)
    out = [inv(z)]
    for k in range(n):
        x = inv(z)
        z = z + (Gp(x) * mu(x) + 0.5 * Gpp(x)) / n + Gp(x) * dw[k]
        out.append(inv(z))
    return np.array(out)


def test_transformed_em_against_scalar_oracle(p1):
    t = build_transform(p1)
    tp = transformed_problem(t, p1)
    for idx in range(5):
        inc = 0.05 * generate_path(SEED, idx, 3).increments
        got = transformed_em(p1, tp, t, inc, 3).values
        want = _oracle_transformed(1.0, 0.0, t.nu, p1.x0, inc)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_transformed_continuous_consistent_at_nodes(p1):
    t = build_transform(p1)
    tp = transformed_problem(t, p1)
    bp = generate_path(SEED, 4, 256)
    cont = transformed_em_continuous_on_fine(p1, tp, t, bp, 16)
    np.testing.assert_array_equal(cont.node_values(),
                                  transformed_em(p1, tp, t, coarsen(bp, 16), 16).values)


def test_ode_limit_is_first_order():
    p = _problem(FunctionSpec.affine(0, 1), FunctionSpec.constant(0), x0=1.0)
    ns = [2 ** e for e in range(3, 11)]
    rows = []
    for n in ns:
        x1 = em_discrete(p, np.zeros(n), n).values[-1]
        rows.append(ErrorRow(n, abs(math.e - x1), 0.0, 1))
    fit = fit_rate(ErrorTable(tuple(rows)))
    assert fit.slope == pytest.approx(-1.0, abs=0.05)


def test_occupation_trivial_cases():
    above = ContinuousEmEval(2, 8, np.full(9, 10.0))
    assert sign_change_occupation(above, 0.0) == 0.0
    flat = ContinuousEmEval(2, 8, np.zeros(9))
    assert sign_change_occupation(flat, 0.0) == 1.0
    v = np.full(9, 1.0)
    v[2] = -1.0  # node below is index 0, value above xi
    assert sign_change_occupation(ContinuousEmEval(2, 8, v), 0.0) == 1 / 8


def test_occupation_in_unit_interval(p1):
    block = generate_block(SEED, range(20), 256)
    for n in (4, 32, 256):
        occ = sign_change_occupation(em_continuous_on_fine(p1, block, n), 0.0)
        assert np.all((occ >= 0) & (occ <= 1))


def test_occupation_refinement_stability():
    def f(t):
        return np.sin(2 * np.pi * 3 * t + 0.3)

    crossings = 6
    n = 4
    vals = []
    for n_fine in (1024, 2048):
        t = np.arange(n_fine + 1) / n_fine
        vals.append(sign_change_occupation(ContinuousEmEval(n, n_fine, f(t)), 0.0))
    assert abs(vals[0] - vals[1]) <= 2 * crossings / 1024
