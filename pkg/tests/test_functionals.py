import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from landau import data
from landau.functionals import (
    D_sp, FunctionalError, FunctionalRequest, M_sp, check_cadence, energy_from_profile, energy_functional, entropy,
    level_truncate, parse_requests, positive_entropy, psi_moment,
)
from landau.grid import make_grid
from landau.solver import SolverConfig, run
from oracles import maxwellian_grad_sq_integral


@pytest.fixture(scope="module")
def fine3():
    spec = make_grid(3, 64, 8.0)
    return spec, data.maxwellian(spec)


def test_maxwellian_M02(fine3):
    spec, f = fine3
    assert M_sp(spec, f, 0, 2) == pytest.approx((4 * math.pi) ** -1.5, rel=1e-10)


def test_maxwellian_entropy(fine3):
    spec, f = fine3
    assert entropy(spec, f) == pytest.approx(-1.5 * math.log(2 * math.pi) - 1.5, rel=1e-10)
    assert positive_entropy(spec, f) == 0.0


def test_maxwellian_psi_moment(fine3):
    spec, f = fine3
    assert psi_moment(spec, f, 4.0) == pytest.approx(15.0, rel=1e-8)


def test_maxwellian_dirichlet_converges_to_radial_oracle():
    exact = maxwellian_grad_sq_integral(2)
    assert exact == pytest.approx((4 * math.pi) ** -1.0, rel=1e-10)
    vals = []
    for n in (64, 128, 256):
        spec = make_grid(2, n, 8.0)
        vals.append(D_sp(spec, data.maxwellian(spec), 0, 2))
    errs = [abs(v - exact) for v in vals]
    assert math.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.1)
    richardson = (4 * vals[2] - vals[1]) / 3
    assert richardson == pytest.approx(exact, rel=1e-4)


def test_rejects_bad_exponents():
    spec = make_grid(3, 8, 2.0)
    f = data.maxwellian(spec)
    with pytest.raises(FunctionalError):
        M_sp(spec, f, 0, 1.0)
    with pytest.raises(FunctionalError):
        D_sp(spec, f, 0, 0.5)
    with pytest.raises(FunctionalError):
        psi_moment(spec, f, 2.0)
    with pytest.raises(FunctionalError):
        FunctionalRequest("nope")
    with pytest.raises(FunctionalError):
        level_truncate(f, -1.0)


def test_request_columns():
    reqs = parse_requests([{"kind": "Msp", "s": 3, "p": 2}, {"kind": "Dsp", "s": 0, "p": 1.5},
                           {"kind": "moment", "s": 4}, {"kind": "entropy"}])
    assert [r.column for r in reqs] == ["M3_2", "D0_1.5", "m4", "H"]


@given(st.integers(0, 2 ** 31), st.floats(0.0, 2.0))
def test_level_truncate_pointwise(seed, level):
    f = np.random.default_rng(seed).standard_normal(200) * 2
    g = level_truncate(f, level)
    assert np.all(g >= 0)
    assert np.all(g <= np.maximum(f, 0))
    assert np.all((g > 0) <= (f > level))
    assert np.allclose(g + np.minimum(f, level), np.maximum(f, level) + np.minimum(f, level) - level)


def test_energy_from_profile_by_hand():
    t = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    half = np.array([4.0, 3.0, 2.0, 1.0, 0.5])
    diss = np.array([2.0, 2.0, 1.0, 1.0, 0.0])
    # from T1 = 0.25: half 3.5, diss 2 by interpolation, then trapezoids
    got = energy_from_profile(t, half, diss, 0.25, 2.0, 1.0)
    cands = [3.5, 3.0 + 0.5, 2.0 + 0.5 + 0.75, 1.0 + 0.5 + 0.75 + 0.5]
    assert got == pytest.approx(max(cands))


def test_cadence_check():
    t = np.linspace(0, 1, 11)
    with pytest.raises(FunctionalError):
        check_cadence(t, 0.0, 1.0)
    check_cadence(np.linspace(0, 1, 33), 0.0, 1.0)


@pytest.fixture(scope="module")
def short_traj():
    spec = make_grid(3, 12, 5.0)
    return run(spec, data.bimodal(spec), SolverConfig(gamma=-1.0, cfl_factor=1.0, t_end=0.2, snapshot_interval=0.01))


def test_energy_functional_decreasing_in_level(short_traj):
    top = max(float(np.max(f)) for f in short_traj.snapshots)
    levels = np.linspace(0, top, 7)
    vals = [energy_functional(short_traj, k, 0.0, 0.2, 0.5).value for k in levels]
    assert np.all(np.diff(vals) <= 1e-15)
    assert vals[-1] == 0.0


def test_energy_functional_increasing_in_c0(short_traj):
    a = energy_functional(short_traj, 0.0, 0.0, 0.2, 0.1).value
    b = energy_functional(short_traj, 0.0, 0.0, 0.2, 1.0).value
    assert b >= a > 0


def test_energy_functional_window_checks(short_traj):
    with pytest.raises(FunctionalError):
        energy_functional(short_traj, 0.0, 0.1, 0.5, 1.0)
    with pytest.raises(FunctionalError):
        energy_functional(short_traj, 0.0, 0.0, 0.2, 0.0)
