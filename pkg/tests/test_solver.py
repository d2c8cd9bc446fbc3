import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from landau import data
from landau.grid import integrate, make_grid
from landau.solver import (
    SolverConfig, SolverError, collision_rhs, moments, normalize_initial, run, step, transport_coefficients,
    write_diagnostics_csv, max_dt,
)


def test_config_validation():
    for bad in (dict(cfl_factor=0.0), dict(cfl_factor=1.5), dict(t_end=0), dict(gamma=0.0), dict(gamma=-2.5),
                dict(scheme="rk4"), dict(snapshot_interval=-1)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_normalized_maxwellian_is_fixed_point():
    spec = make_grid(3, 24, 7.0)
    f = normalize_initial(spec, data.maxwellian(spec))
    g = normalize_initial(spec, f)
    assert np.max(np.abs(g - f)) <= 1e-12 * np.max(f)


def test_shifted_maxwellian_recentred():
    spec = make_grid(3, 24, 8.0)
    f = normalize_initial(spec, data.shifted_maxwellian(spec, [0.7, -0.4, 0.2]))
    mass, mom, energy = moments(spec, f)
    assert np.max(np.abs(mom)) <= 1e-12
    # the recentred datum is the normalised Maxwellian again, up to the spline resampling error
    ref = normalize_initial(spec, data.maxwellian(spec))
    assert np.max(np.abs(f - ref)) <= 1e-2 * np.max(ref)


def test_callable_source_recentred_exactly():
    spec = make_grid(3, 24, 8.0)
    u = np.array([0.7, -0.4, 0.2]).reshape((3, 1, 1, 1))
    f = normalize_initial(spec, lambda v: np.exp(-np.sum((v - u) ** 2, axis=0) / (2 * 1.3 ** 2)))
    ref = normalize_initial(spec, data.maxwellian(spec))
    assert np.max(np.abs(f - ref)) <= 1e-8 * np.max(ref)


def test_two_bumps_normalised():
    spec = make_grid(3, 24, 8.0)
    f = data.bimodal(spec)
    assert integrate(spec, f) == pytest.approx(1.0, abs=1e-10)
    assert integrate(spec, f * spec.speed_squared) == pytest.approx(3.0, abs=1e-10)
    assert np.max(np.abs(moments(spec, f)[1])) <= 1e-10


@given(st.integers(0, 2 ** 31), st.sampled_from([-0.5, -1.0, -2.0]))
def test_rhs_conserves_mass_momentum_energy(seed, gamma):
    spec = make_grid(3, 8, 3.0)
    f = np.random.default_rng(seed).random(spec.shape)
    r = collision_rhs(spec, f, transport_coefficients(spec, f, gamma))
    scale = np.max(np.abs(r)) * spec.cells * spec.cell_volume * 10
    assert abs(integrate(spec, r)) <= 1e-13 * scale
    for j in range(3):
        assert abs(integrate(spec, r * spec.coords[j])) <= 1e-13 * scale * spec.half_width
    assert abs(integrate(spec, r * spec.speed_squared)) <= 1e-13 * scale * spec.half_width ** 2


def test_step_mass_relative(rng):
    spec = make_grid(3, 16, 6.0)
    f = data.bimodal(spec)
    co = transport_coefficients(spec, f, -1.0)
    g = step(spec, f, co, max_dt(spec, co))
    assert integrate(spec, g) == pytest.approx(integrate(spec, f), rel=1e-13)


def test_step_rejects_cfl_violation():
    spec = make_grid(3, 8, 3.0)
    f = data.bimodal(spec)
    co = transport_coefficients(spec, f, -1.0)
    with pytest.raises(SolverError):
        step(spec, f, co, 2 * max_dt(spec, co))


def _dense_difference(n, d, axis, h):
    N = n ** d
    D = np.zeros((N, N))
    for flat in range(N):
        idx = list(np.unravel_index(flat, (n,) * d))
        for k, sgn in ((1, 1.0), (-1, -1.0)):
            j = list(idx)
            j[axis] += k
            if 0 <= j[axis] < n:
                D[flat, np.ravel_multi_index(j, (n,) * d)] = sgn / (2 * h)
    return D


@pytest.mark.parametrize("d", [2, 3])
def test_step_matches_dense_operator(d, rng):
    n = 8
    spec = make_grid(d, n, 2.0)
    f = rng.random(spec.shape)
    co = transport_coefficients(spec, f, -1.0)
    N = n ** d
    Ds = [_dense_difference(n, d, j, spec.spacing) for j in range(d)]
    interior = np.ones(spec.shape, bool)
    interior[(slice(1, -1),) * d] = False
    P = np.diag((~interior).ravel().astype(float))
    L = np.zeros((N, N))
    for i in range(d):
        Fi = sum(np.diag(co.A[i, j].ravel()) @ Ds[j] for j in range(d)) - np.diag(co.drift[i].ravel())
        L += Ds[i] @ P @ Fi
    dt = 0.5 * max_dt(spec, co)
    ref = f.ravel() + dt * (L @ f.ravel())
    got = step(spec, f, co, dt).ravel()
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(f))


def test_maxwellian_stationary_at_order_two():
    errs, ns = [], (64, 128, 256)
    for n in ns:
        spec = make_grid(2, n, 6.0)
        f = data.FAMILY["maxwellian"](spec)
        errs.append(np.max(np.abs(collision_rhs(spec, f, transport_coefficients(spec, f, -1.0)))))
    orders = [math.log(errs[k] / errs[k + 1]) / math.log(2) for k in range(2)]
    assert orders[-1] >= 1.8, orders


def test_maxwellian_run_constant_entropy_and_energy():
    spec = make_grid(3, 16, 6.0)
    f = data.FAMILY["maxwellian"](spec)
    traj = run(spec, f, SolverConfig(gamma=-1.0, cfl_factor=1.0, t_end=1.0, snapshot_interval=0.25))
    rep = traj.drift_report()
    H = traj.column("entropy")
    assert np.max(np.abs(H - H[0])) <= 1e-2  # stationary up to the O(h^2) residual at n=16
    assert rep["energy_drift"] < 1e-6 and rep["mass_drift"] < 1e-13


def test_anisotropic_entropy_nonincreasing():
    spec = make_grid(3, 16, 7.0)
    f = data.anisotropic_gaussian(spec)
    traj = run(spec, f, SolverConfig(gamma=-1.0, cfl_factor=1.0, t_end=0.3, snapshot_interval=0.1))
    H = traj.column("entropy")
    assert np.all(np.diff(H) <= 1e-12)
    assert H[-1] < H[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_aborts_with_last_valid_state():
    spec = make_grid(3, 8, 3.0)
    f = data.bimodal(spec)
    cfg = SolverConfig(gamma=-1.0, t_end=0.1, snapshot_interval=0.05)
    bad = f.copy()
    bad[3, 3, 3] = 1e308
    with pytest.raises(SolverError) as exc:
        run(spec, bad, cfg)
    assert exc.value.trajectory is not None and len(exc.value.trajectory.rows) >= 1


def test_restart_is_bit_exact(tmp_path):
    spec = make_grid(3, 12, 6.0)
    f = data.bimodal(spec)
    cfg = SolverConfig(gamma=-1.0, cfl_factor=1.0, t_end=0.2, snapshot_interval=0.05)
    saved = []
    full = run(spec, f, cfg, checkpoint=lambda tr, st: saved.append(pickle.dumps((tr, st))), checkpoint_every=1)
    tr, st = pickle.loads(saved[1])
    resumed = run(spec, None, cfg, resume=(tr, st))
    write_diagnostics_csv(full, tmp_path / "a.csv")
    write_diagnostics_csv(resumed, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert np.array_equal(full.snapshots[-1], resumed.snapshots[-1])


def test_diagnostic_columns_exact_order():
    spec = make_grid(3, 8, 3.0)
    traj = run(spec, data.bimodal(spec), SolverConfig(t_end=0.01, snapshot_interval=0.01,
                                                      functionals=[{"kind": "Msp", "s": 0, "p": 2}]))
    assert traj.columns == ["time", "dt", "mass", "mom_x", "mom_y", "mom_z", "energy", "entropy", "k0", "M0_2"]
