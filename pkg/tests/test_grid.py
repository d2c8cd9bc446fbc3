import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from landau.grid import (
    GridError, GridSpec, divergence, gradient, inner, integrate, make_grid, read_snapshot, write_snapshot,
)


def test_spacing_and_cells():
    assert make_grid(3, 32, 8.0).spacing == 0.5
    assert make_grid(2, 8, 4.0).cells == 64


def test_node_nearest_origin():
    spec = make_grid(3, 8, 1.0)
    r2 = spec.speed_squared
    i = np.unravel_index(np.argmin(r2), r2.shape)
    assert np.allclose(np.abs(spec.coords[(slice(None),) + i]), 0.125)
    assert np.count_nonzero(np.isclose(r2, r2.min())) == 8


@pytest.mark.parametrize("args", [(4, 8, 1.0), (3, 7, 1.0), (3, 8, -1.0), (3, 4, 1.0)])
def test_bad_grids_rejected(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_maxwellian_mass_and_energy():
    spec = make_grid(3, 32, 8.0)
    M = np.exp(-0.5 * spec.speed_squared) / (2 * math.pi) ** 1.5
    assert integrate(spec, M) == pytest.approx(1.0, abs=1e-10)
    assert integrate(spec, M * spec.speed_squared) == pytest.approx(3.0, abs=1e-9)


def test_integrate_matches_resummation(rng):
    spec = make_grid(3, 16, 2.0)
    f = rng.random(spec.shape)
    ref = math.fsum(f.ravel().tolist()) * spec.cell_volume
    assert integrate(spec, f) == pytest.approx(ref, rel=1e-13)


def test_integrate_weight_is_bracket(rng):
    spec = make_grid(2, 8, 2.0)
    f = rng.random(spec.shape)
    ref = sum(f[i, j] * (1 + spec.axis[i] ** 2 + spec.axis[j] ** 2) ** 1.5 for i in range(8) for j in range(8))
    assert integrate(spec, f, 3.0) == pytest.approx(ref * spec.cell_volume, rel=1e-13)


def test_gradient_exact_on_linear_interior():
    spec = make_grid(3, 12, 3.0)
    G = gradient(spec, spec.coords[0])
    inner_cells = (slice(1, -1),) * 3
    assert np.allclose(G[0][inner_cells], 1.0, atol=1e-14)
    assert np.allclose(G[1:][(slice(None),) + inner_cells], 0.0, atol=1e-14)


def test_div_grad_is_wide_stencil_laplacian():
    spec = make_grid(2, 12, 3.0)
    f = spec.speed_squared + 0.3 * spec.coords[0] * spec.coords[1]
    lap = divergence(spec, gradient(spec, f))
    h = spec.spacing
    ref = np.zeros_like(f)
    for ax in range(2):
        ref += (np.roll(f, -2, ax) - 2 * f + np.roll(f, 2, ax)) / (4 * h * h)
    sl = (slice(2, -2),) * 2
    assert np.allclose(lap[sl], ref[sl], rtol=1e-12, atol=1e-12)
    # exact on quadratics: Laplacian of |v|^2 is 2d
    assert np.allclose(lap[sl], 4.0, rtol=1e-12)


@given(st.integers(0, 2 ** 31))
def test_summation_by_parts(seed):
    rng = np.random.default_rng(seed)
    spec = make_grid(3, 8, 1.0)
    f = rng.standard_normal(spec.shape)
    G = rng.standard_normal((3,) + spec.shape)
    lhs = inner(spec, gradient(spec, f), G) + inner(spec, f, divergence(spec, G))
    assert abs(lhs) <= 1e-12 * (1 + np.abs(f).sum() * np.abs(G).sum() * spec.cell_volume / spec.spacing)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_linear(a, b):
    rng = np.random.default_rng(1)
    spec = make_grid(2, 8, 1.0)
    f, g = rng.random(spec.shape), rng.random(spec.shape)
    assert integrate(spec, a * f + b * g) == pytest.approx(a * integrate(spec, f) + b * integrate(spec, g), abs=1e-12)


def test_derivative_order_two():
    errs = []
    for n in (32, 64, 128):
        spec = make_grid(2, n, 6.0)
        g = np.exp(-spec.speed_squared)
        exact = -2 * spec.coords[0] * g
        sl = (slice(1, -1),) * 2
        errs.append(np.max(np.abs(gradient(spec, g)[0][sl] - exact[sl])))
    assert math.log2(errs[0] / errs[1]) > 1.8 and math.log2(errs[1] / errs[2]) > 1.9


def test_quadrature_converges():
    # midpoint rule on a Gaussian converges spectrally, faster than order two
    exact = math.pi * math.exp(-0.25)
    errs = []
    for n in (16, 32):
        spec = make_grid(2, n, 6.0)
        errs.append(abs(integrate(spec, np.exp(-spec.speed_squared) * np.cos(spec.coords[0])) - exact))
    assert errs[0] < 1e-5 and errs[1] < 1e-13


def test_snapshot_roundtrip(tmp_path, rng):
    spec = make_grid(3, 8, 2.0)
    f = rng.standard_normal(spec.shape)
    write_snapshot(tmp_path / "s.bin", spec, f, time=0.25)
    spec2, g, header = read_snapshot(tmp_path / "s.bin")
    assert spec2 == spec and header["time"] == 0.25
    assert np.array_equal(f, g)
