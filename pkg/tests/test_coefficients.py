import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from landau import data
from landau.coefficients import (
    KernelError, build_kernels, compute_coefficients, convolve, estimate_K0, padded_offsets, symmetric_eigen_extremes,
    a_kernel, b_kernel, c_kernel,
)
from landau.grid import make_grid

from oracles import direct_convolution, radial_gaussian_convolution


def _at(spec, table, z):
    """Entry of a padded kernel table at the integer offset z."""
    N = 2 * spec.n
    return table[tuple(k % N for k in z)]


def test_trace_of_a_is_d_minus_one_times_power():
    spec = make_grid(3, 8, 2.0)  # h = 0.5, so offset (4,0,0) is |z| = 2
    off = padded_offsets(spec)
    tr = sum(a_kernel(spec, -1.0, off, i, i) for i in range(3))
    assert _at(spec, tr, (4, 0, 0)) == pytest.approx(2 * 2.0, rel=1e-14)
    assert _at(spec, tr, (2, 2, 2)) == pytest.approx(2 * math.sqrt(3), rel=1e-14)


def test_c_kernel_value_gamma_minus_two():
    spec = make_grid(3, 8, 2.0)
    c = c_kernel(spec, -2.0, padded_offsets(spec))
    assert _at(spec, c, (4, 0, 0)) == pytest.approx(-0.5, rel=1e-14)


def test_b_origin_is_zero_and_odd():
    spec = make_grid(3, 8, 2.0)
    off = padded_offsets(spec)
    b = b_kernel(spec, -1.5, off, 0)
    assert _at(spec, b, (0, 0, 0)) == 0.0
    assert _at(spec, b, (3, 1, 0)) == pytest.approx(-_at(spec, b, (-3, -1, 0)), rel=1e-15)


def test_nonintegrable_c_rejected():
    spec = make_grid(2, 8, 1.0)
    with pytest.raises(KernelError):
        c_kernel(spec, -2.0, padded_offsets(spec))
    with pytest.raises(KernelError):
        build_kernels(spec, 0.5)


def test_single_cell_mass_reproduces_kernel():
    spec = make_grid(3, 8, 2.0)
    ks = build_kernels(spec, -1.0)
    f = np.zeros(spec.shape)
    m = 2.5
    f[3, 4, 2] = m / spec.cell_volume
    out = convolve(spec, ks.tables["c_gamma"], f)
    for v in [(0, 0, 0), (7, 7, 7), (5, 1, 6)]:
        z = tuple(a - b for a, b in zip(v, (3, 4, 2)))
        assert out[v] == pytest.approx(m * _at(spec, ks.tables["c_gamma"], z), rel=1e-12)


@pytest.mark.parametrize("name", ["a01", "a11", "b1", "c_gamma", "c_gamma_plus_1"])
def test_fft_matches_direct_sum_2d(name, rng):
    spec = make_grid(2, 8, 1.5)
    f = rng.random(spec.shape)
    ks = build_kernels(spec, -0.7)
    fast = convolve(spec, ks.tables[name], f)
    slow = direct_convolution(name, f, 2, 8, 1.5, -0.7)
    assert np.max(np.abs(fast - slow)) <= 1e-12 * np.max(np.abs(slow))


def test_maxwellian_c_gamma_matches_radial_quadrature():
    spec = make_grid(3, 64, 5.0)
    M = np.exp(-0.5 * spec.speed_squared) / (2 * math.pi) ** 1.5
    c = convolve(spec, build_kernels(spec, -1.0).tables["c_gamma"], M)
    for p in [(32, 32, 32), (34, 32, 32), (36, 35, 32), (40, 38, 30), (45, 32, 32)]:
        r = float(np.linalg.norm(spec.coords[(slice(None),) + p]))
        ref = -(2 * 2) * radial_gaussian_convolution(-1.0, r)
        assert c[p] == pytest.approx(ref, rel=1e-3)


def test_zero_field_gives_zero_coefficients():
    spec = make_grid(3, 8, 2.0)
    co = compute_coefficients(spec, np.zeros(spec.shape), build_kernels(spec, -1.0))
    for x in (co.A, co.b, co.c_gamma, co.c_gamma_plus_1, co.drift):
        assert np.all(x == 0)
    assert estimate_K0(spec, co, -1.0) == 0.0


def test_trace_identity(rng):
    spec = make_grid(3, 12, 3.0)
    f = rng.random(spec.shape)
    gamma = -1.3
    co = compute_coefficients(spec, f, build_kernels(spec, gamma))
    off = padded_offsets(spec)
    r = np.sqrt(np.sum((off * spec.spacing) ** 2, axis=0))
    table = np.where(r > 0, r, 1.0) ** (gamma + 2)
    table[r == 0] = sum(_at(spec, a_kernel(spec, gamma, off, i, i), (0, 0, 0)) for i in range(3)) / 2
    ref = 2 * convolve(spec, table, f)
    assert np.max(np.abs(np.trace(co.A) - ref)) <= 1e-12 * np.max(np.abs(ref))


@given(st.integers(0, 2 ** 31), st.sampled_from([-0.5, -1.0, -2.0]))
def test_c_nonpositive_for_nonnegative_f(seed, gamma):
    spec = make_grid(3, 8, 2.0)
    f = np.random.default_rng(seed).random(spec.shape)
    co = compute_coefficients(spec, f, build_kernels(spec, gamma), parts=("c",))
    assert np.all(co.c_gamma <= 0) and np.all(co.c_gamma_plus_1 <= 0)


def test_K0_linear_in_f(rng):
    spec = make_grid(3, 16, 5.0)
    f = data.bimodal(spec)
    ks = build_kernels(spec, -1.0)
    k1 = estimate_K0(spec, compute_coefficients(spec, f, ks, ("A",)), -1.0)
    k2 = estimate_K0(spec, compute_coefficients(spec, 2 * f, ks, ("A",)), -1.0)
    assert k1 > 0 and k2 == pytest.approx(2 * k1, rel=1e-12)


def test_K0_lower_bound_on_random_pairs(rng):
    spec = make_grid(3, 16, 5.0)
    f = data.maxwellian(spec)
    gamma = -1.0
    co = compute_coefficients(spec, f, build_kernels(spec, gamma), ("A",))
    K0 = estimate_K0(spec, co, gamma)
    cells = rng.integers(0, spec.n, size=(1000, 3))
    xi = rng.standard_normal((1000, 3))
    for c, x in zip(cells, xi):
        A = co.A[(slice(None), slice(None)) + tuple(c)]
        w = (1 + np.sum(spec.coords[(slice(None),) + tuple(c)] ** 2)) ** (gamma / 2)
        assert x @ A @ x >= K0 * w * (x @ x) * (1 - 1e-12)


def test_K0_maxwellian_refinement():
    vals = []
    for n in (32, 48):
        spec = make_grid(3, n, 8.0)
        f = data.FAMILY["maxwellian"](spec)
        vals.append(estimate_K0(spec, compute_coefficients(spec, f, build_kernels(spec, -1.0), ("A",)), -1.0))
    assert vals[0] > 0 and abs(vals[1] / vals[0] - 1) <= 0.05


def test_eigen_extremes_match_numpy(rng):
    A = rng.standard_normal((3, 3, 50))
    A = A + A.transpose(1, 0, 2)
    lo, hi = symmetric_eigen_extremes(A)
    ev = np.linalg.eigvalsh(np.moveaxis(A, -1, 0))
    assert np.allclose(lo, ev[:, 0], atol=1e-10) and np.allclose(hi, ev[:, -1], atol=1e-10)
