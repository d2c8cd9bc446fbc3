import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from landau import data
from landau.grid import make_grid
from landau.inequalities import (
    C_of_eps, InequalityError, critical_split, flLq_weight, hls_exponents_ok, hls_singular_check,
    level_inequality_check, level_survey, poincare_direct_lhs, poincare_sides, psi_ratio_sup, explicit_thresholds,
    sliding_slopes, sphere_area, splitting_terms, tail_bound_check, tail_sup,
)


def gauss(spec, center, width):
    c = np.asarray(center, float).reshape((spec.d,) + (1,) * spec.d)
    return np.exp(-0.5 * np.sum((spec.coords - c) ** 2, axis=0) / width ** 2)


def test_zero_test_function():
    spec = make_grid(3, 8, 3.0)
    assert poincare_sides(spec, data.maxwellian(spec), np.zeros(spec.shape), -1.0) == (0.0, 0.0, 0.0)


@given(st.integers(0, 2 ** 31), st.sampled_from([-0.5, -1.0, -1.5]))
def test_lhs_nonnegative(seed, gamma):
    spec = make_grid(3, 8, 3.0)
    rng = np.random.default_rng(seed)
    lhs, dt, l2 = poincare_sides(spec, rng.random(spec.shape), rng.standard_normal(spec.shape), gamma)
    assert lhs >= 0 and dt >= 0 and l2 >= 0


@pytest.mark.parametrize("gamma,lam", [(-1.0, -1.0), (-1.0, 0.0), (-0.5, -0.5)])
def test_lhs_matches_direct_double_sum(gamma, lam):
    spec = make_grid(3, 16, 6.0)
    f, phi = data.maxwellian(spec), gauss(spec, [0.5, 0, 0], 0.8)
    lhs, _, _ = poincare_sides(spec, f, phi, gamma, lambda_choice=lam)
    assert lhs == pytest.approx(poincare_direct_lhs(spec, f, phi, lam), rel=1e-12)


def test_lhs_refinement():
    vals = []
    for n in (16, 32):
        spec = make_grid(3, n, 6.0)
        vals.append(poincare_sides(spec, data.maxwellian(spec), gauss(spec, [0.5, 0, 0], 0.8), -1.0)[0])
    assert vals[1] == pytest.approx(vals[0], rel=1e-2)


def test_lambda_rules():
    spec = make_grid(2, 8, 3.0)
    f = data.maxwellian(spec)
    with pytest.raises(InequalityError):
        poincare_sides(spec, f, f, -2.0)
    with pytest.raises(InequalityError):
        poincare_sides(spec, f, f, -1.0, lambda_choice=0.5)


def test_splitting_inequality():
    spec = make_grid(3, 12, 4.0)
    f = data.bimodal(spec)
    for gamma in (-0.5, -1.0, -2.0):
        for center in ([0, 0, 0], [1.5, -0.5, 0.5]):
            t = splitting_terms(spec, f, gauss(spec, center, 0.7), gamma)
            assert 0 < t["I"] <= t["bound"]


@given(arrays(float, (5,), elements=st.floats(0, 10)), arrays(float, (5,), elements=st.floats(0, 10)),
       arrays(float, (5,), elements=st.floats(0.1, 10)))
def test_C_of_eps_nonincreasing(lhs, dt, l2):
    eps = np.logspace(-3, 2, 40)
    C, _ = C_of_eps(eps, lhs, dt, l2)
    assert np.all(np.diff(C) <= 1e-12 * (1 + np.abs(C[:-1])))


def test_sliding_slopes_of_power_law():
    eps = np.logspace(-3, 0, 31)
    for m, _, s in [(None, None, x[2]) for x in sliding_slopes(eps, 3 * eps ** -0.75)]:
        assert s == pytest.approx(-0.75, abs=1e-12)


def test_sphere_constant():
    assert sphere_area(3) / (3 - 2) == pytest.approx(4 * math.pi)


@pytest.fixture(scope="module")
def crit():
    spec = make_grid(3, 16, 4.0)
    f = data.bimodal(spec) + 20 * gauss(spec, [0.2, 0.1, 0], 0.4)
    phis = [gauss(spec, c, w) for c, w in (([0, 0, 0], 0.5), ([1, 0, 0], 1.0), ([0, -1, 1], 0.7))]
    return spec, f, phis


def test_critical_split_bounds(crit):
    spec, f, phis = crit
    for phi in phis:
        cs = critical_split(spec, f, phi, R1=2.0)
        assert cs.J1 <= cs.J1_bound
        assert cs.J2_minus <= cs.J2_minus_bound_discrete
        assert cs.ball_constant == pytest.approx(4 * math.pi)


def test_J2_plus_decreases_to_zero(crit):
    spec, f, phis = crit
    vals = [critical_split(spec, f, phis[0], R1).J2_plus for R1 in (1.1, 2, 4, 8, 16, 1e3)]
    assert np.all(np.diff(vals) <= 0) and vals[0] > 0 and vals[-1] == 0


def test_psi_ratio_sup():
    assert psi_ratio_sup(9.0, 4.0) == pytest.approx(1 / 9)
    # brute-force sup of (1+r)/r^(s/2) over r >= sqrt(R1) - 1
    r = np.linspace(math.sqrt(10) - 1, 200, 200001)
    assert tail_sup(10.0, 4.0) == pytest.approx(np.max((1 + r) / r ** 2), rel=1e-12)


def test_maxwellian_tail_bound():
    spec = make_grid(3, 32, 8.0)
    f = data.maxwellian(spec)
    for R1 in (10.0, 100.0):
        for R2 in (4.0, 16.0):
            tb = tail_bound_check(spec, f, R1, R2, s=4.0)
            assert tb.lhs <= tb.rhs
            assert tb.rhs_signed_entropy < tb.rhs
    lhs = [tail_bound_check(spec, f, R1, 4.0, 4.0).lhs for R1 in (2, 5, 10, 50, 100, 1e4)]
    assert np.all(np.diff(lhs) <= 0)


def test_signed_entropy_variant_fails_for_maxwellian():
    spec = make_grid(3, 32, 8.0)
    tb = tail_bound_check(spec, data.maxwellian(spec), 100.0, 4.0, 4.0)
    assert tb.rhs_signed_entropy < 0


def test_threshold_branch_rules():
    spec = make_grid(3, 24, 8.0)
    f = data.bimodal(spec)
    with pytest.raises(InequalityError):
        tail_bound_check(spec, f, 3.9, 4.0, 4.0, threshold_branch=True)
    tail_bound_check(spec, f, 3.9, 4.0, 4.0)
    for eps in (1.0, 0.1, 0.01):
        th = explicit_thresholds(spec, f, 4.0, eps, 1.0)
        assert th.ok and th.R1 >= 4


def test_hls_exponents():
    assert hls_exponents_ok()
    assert not hls_exponents_ok(2.0, 9 / 8)


def test_hls_J_R_nonincreasing():
    spec = make_grid(3, 32, 2.0)
    r = np.sqrt(spec.speed_squared)
    f = data.bimodal(spec) + 100 * np.maximum(r, spec.spacing / 2) ** -1.0 * np.exp(-r * r)
    phi = gauss(spec, [0, 0, 0], 1.0)
    J = [hls_singular_check(spec, f, phi, R).J_R for R in (1.0, math.e ** 2, math.e ** 4, math.e ** 8)]
    assert J[0] > 0 and np.all(np.diff(J) <= 0)
    with pytest.raises(InequalityError):
        hls_singular_check(make_grid(2, 8, 1.0), np.ones((8, 8)), np.ones((8, 8)), 2.0)


def test_flLq_weight():
    assert flLq_weight(3, -1.0, 3.0) == pytest.approx(3.0)
    with pytest.raises(InequalityError):
        flLq_weight(3, -1.0, 10 / 3)


def test_level_above_max_is_trivial():
    spec = make_grid(3, 16, 4.0)
    f = data.bimodal(spec)
    chk = level_inequality_check(spec, f, 0.5 * f.max(), 1.01 * f.max(), "flL2", -1.0)
    assert chk.lhs == 0.0 and chk.implied_constant == 0.0


def test_level_inequality_argument_checks():
    spec = make_grid(3, 8, 4.0)
    f = data.bimodal(spec)
    for which, kw in (("flLp", dict(p=3.0)), ("flLq", dict(q=2.5)), ("flLd", dict(s=2.0)), ("nope", {})):
        with pytest.raises(InequalityError):
            level_inequality_check(spec, f, 0.0, 0.1, which, -1.0, **kw)
    with pytest.raises(InequalityError):
        level_inequality_check(spec, f, 0.2, 0.1, "flL2", -1.0)


@pytest.mark.parametrize("which,gamma,kw", [("flL2", -1.0, {}), ("flLp", -1.0, dict(p=2.0)),
                                            ("flLq", -1.0, dict(q=3.0)), ("flLd", -2.0, dict(s=4.0))])
def test_level_constants_refinement_stable(which, gamma, kw):
    a = level_survey(make_grid(3, 24, 4.0), which, gamma, **kw).max_constant
    b = level_survey(make_grid(3, 32, 4.0), which, gamma, **kw).max_constant
    assert np.isfinite(a) and a > 0
    assert b == pytest.approx(a, rel=0.2)
