"""Nonlocal Landau coefficients by zero-padded FFT convolution with singular kernels.

Kernels (z != 0):

    a_ij(z) = |z|^(g+2) (delta_ij - z_i z_j / |z|^2)
    b_i(z)  = -(d-1) z_i |z|^g
    c_l(z)  = -(d-1)(l+d) |z|^l,   l in {g, g+1}

The origin cell is replaced by an equal-volume ball of radius rho (rho^d times
the unit-ball volume equals h^d).
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec, check_scalar, gradient

ALL_PARTS = ("A", "b", "c", "drift")


class KernelError(ValueError):
    pass


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("LANDAU_THREADS", "1")))
    except ValueError:
        return 1


def ball_radius(spec: GridSpec) -> float:
    h = spec.spacing
    if spec.d == 3:
        return h * (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)
    return h / np.sqrt(np.pi)


def ball_average_power(spec: GridSpec, lam: float) -> float:
    """Mean of |z|^lam over the equal-volume ball (requires lam + d > 0)."""
    if lam + spec.d <= 0:
        raise KernelError(f"|z|^{lam} is not locally integrable in d={spec.d}")
    return spec.d / (spec.d + lam) * ball_radius(spec) ** lam


def padded_offsets(spec: GridSpec) -> np.ndarray:
    """Integer offsets of the (2n)^d circular table, shape (d, 2n, ..., 2n)."""
    N = 2 * spec.n
    k = np.arange(N)
    m = np.where(k < spec.n, k, k - N).astype(float)
    return np.stack(np.meshgrid(*([m] * spec.d), indexing="ij"))


def _radius(spec: GridSpec, offsets: np.ndarray):
    z = offsets * spec.spacing
    r2 = np.sum(z * z, axis=0)
    origin = r2 == 0
    safe = np.where(origin, 1.0, r2)
    return z, safe, origin


def power_kernel(spec: GridSpec, lam: float, offsets: np.ndarray) -> np.ndarray:
    """|z|^lam with the ball-averaged origin cell."""
    _, r2, origin = _radius(spec, offsets)
    out = r2 ** (0.5 * lam)
    out[origin] = ball_average_power(spec, lam)
    return out


def a_kernel(spec: GridSpec, gamma: float, offsets: np.ndarray, i: int, j: int) -> np.ndarray:
    z, r2, origin = _radius(spec, offsets)
    out = r2 ** (0.5 * (gamma + 2.0)) * ((1.0 if i == j else 0.0) - z[i] * z[j] / r2)
    # angular average of the projector at radius rho
    out[origin] = (spec.d - 1.0) / spec.d * ball_radius(spec) ** (gamma + 2.0) if i == j else 0.0
    return out


def b_kernel(spec: GridSpec, gamma: float, offsets: np.ndarray, i: int) -> np.ndarray:
    z, r2, origin = _radius(spec, offsets)
    out = -(spec.d - 1.0) * z[i] * r2 ** (0.5 * gamma)
    out[origin] = 0.0
    return out


def c_kernel(spec: GridSpec, lam: float, offsets: np.ndarray) -> np.ndarray:
    if lam + spec.d <= 0:
        raise KernelError(f"lambda + d must be positive, got {lam + spec.d}")
    return -(spec.d - 1.0) * (lam + spec.d) * power_kernel(spec, lam, offsets)


def matrix_index_pairs(d: int):
    return [(i, j) for i in range(d) for j in range(i, d)]


@dataclass
class KernelSet:
    """Kernel tables on the padded (2n)^d difference grid and their spectra."""

    spec: GridSpec
    gamma: float
    tables: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _spectra: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def names(self, parts: Iterable[str] = ALL_PARTS):
        d = self.spec.d
        out = []
        if "A" in parts:
            out += [f"a{i}{j}" for i, j in matrix_index_pairs(d)]
        if "b" in parts:
            out += [f"b{i}" for i in range(d)]
        if "c" in parts:
            out += ["c_gamma", "c_gamma_plus_1"]
        return out

    def spectrum(self, name: str) -> np.ndarray:
        with self._lock:
            if name not in self._spectra:
                self._spectra[name] = sfft.rfftn(self.tables[name], workers=fft_workers())
            return self._spectra[name]


_CACHE: Dict[tuple, KernelSet] = {}
_CACHE_LOCK = threading.Lock()


def build_kernels(spec: GridSpec, gamma: float) -> KernelSet:
    gamma = float(gamma)
    if not (-2.0 <= gamma < 0.0):
        raise KernelError(f"gamma must lie in [-2, 0), got {gamma}")
    key = (spec.d, spec.n, spec.half_width, gamma)
    with _CACHE_LOCK:
        cached = _CACHE.get(key)
        if cached is not None:
            return cached
    offsets = padded_offsets(spec)
    tables = {}
    for i, j in matrix_index_pairs(spec.d):
        tables[f"a{i}{j}"] = a_kernel(spec, gamma, offsets, i, j)
    for i in range(spec.d):
        tables[f"b{i}"] = b_kernel(spec, gamma, offsets, i)
    tables["c_gamma"] = c_kernel(spec, gamma, offsets)
    tables["c_gamma_plus_1"] = c_kernel(spec, gamma + 1.0, offsets)
    ks = KernelSet(spec, gamma, tables)
    with _CACHE_LOCK:
        return _CACHE.setdefault(key, ks)


def padded_transform(spec: GridSpec, f: np.ndarray) -> np.ndarray:
    """rfftn of f zero-padded to (2n)^d, one axis at a time so padded rows are never transformed."""
    N, w = 2 * spec.n, fft_workers()
    out = sfft.rfft(f, n=N, axis=-1, workers=w)
    for ax in range(spec.d - 2, -1, -1):
        out = sfft.fft(out, n=N, axis=ax, workers=w)
    return out


def cropped_inverse(spec: GridSpec, x_hat: np.ndarray) -> np.ndarray:
    """First n^d entries of irfftn(x_hat) over the (2n)^d grid, cropping after each axis."""
    n, w = spec.n, fft_workers()
    for ax in range(spec.d - 1):
        x_hat = sfft.ifft(x_hat, axis=ax, workers=w)[(slice(None),) * ax + (slice(0, n),)]
    return sfft.irfft(x_hat, n=2 * n, axis=-1, workers=w)[..., :n]


def convolve_transformed(spec: GridSpec, kernel_hat: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    return cropped_inverse(spec, kernel_hat * f_hat) * spec.cell_volume


def convolve(spec: GridSpec, kernel_table: np.ndarray, f) -> np.ndarray:
    """Linear convolution h^d sum_w K(v - w) f(w) of a padded kernel table with f."""
    f = check_scalar(spec, f)
    if kernel_table.shape != (2 * spec.n,) * spec.d:
        raise KernelError(
            f"kernel table shape {kernel_table.shape} does not match padded grid of {spec.shape}"
        )
    k_hat = sfft.rfftn(kernel_table, workers=fft_workers())
    return convolve_transformed(spec, k_hat, padded_transform(spec, f))


@dataclass
class CoefficientSet:
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    c_gamma: Optional[np.ndarray] = None
    c_gamma_plus_1: Optional[np.ndarray] = None
    # a * (centred gradient of f); equals b * f up to O(h^2)
    drift: Optional[np.ndarray] = None


def assemble(spec: GridSpec, kernels: KernelSet, f_hat, grad_hats=None, parts=ALL_PARTS) -> CoefficientSet:
    """Coefficients from padded transforms of f (and of its gradient for the drift)."""
    conv = lambda name, x_hat: convolve_transformed(spec, kernels.spectrum(name), x_hat)
    d = spec.d
    out = CoefficientSet()
    pairs = matrix_index_pairs(d)
    if "A" in parts:
        A = np.empty((d, d) + spec.shape)
        for i, j in pairs:
            A[i, j] = conv(f"a{i}{j}", f_hat)
            if i != j:
                A[j, i] = A[i, j]
        out.A = A
    if "b" in parts:
        out.b = np.stack([conv(f"b{i}", f_hat) for i in range(d)])
    if "c" in parts:
        out.c_gamma = conv("c_gamma", f_hat)
        out.c_gamma_plus_1 = conv("c_gamma_plus_1", f_hat)
    if "drift" in parts:
        # sum_j a_ij * G_j, summed in the spectral domain: one inverse FFT per i
        drift = np.empty((d,) + spec.shape)
        for i in range(d):
            acc = None
            for j in range(d):
                name = f"a{min(i, j)}{max(i, j)}"
                term = kernels.spectrum(name) * grad_hats[j]
                acc = term if acc is None else acc + term
            drift[i] = cropped_inverse(spec, acc) * spec.cell_volume
        out.drift = drift
    return out


def compute_coefficients(spec: GridSpec, f, kernels: KernelSet, parts: Iterable[str] = ALL_PARTS) -> CoefficientSet:
    """All requested coefficients of f; one padded transform of f is shared by every kernel."""
    f = check_scalar(spec, f)
    if kernels.spec != spec:
        raise KernelError("kernel set was built for a different grid")
    parts = set(parts)
    grad_hats = None
    if "drift" in parts:
        grad_hats = [padded_transform(spec, g) for g in gradient(spec, f)]
    return assemble(spec, kernels, padded_transform(spec, f), grad_hats, parts)


def symmetric_eigen_extremes(A: np.ndarray):
    """Closed-form (lambda_min, lambda_max) of a field of symmetric 2x2 or 3x3 matrices."""
    d = A.shape[0]
    if d == 2:
        m = 0.5 * (A[0, 0] + A[1, 1])
        r = np.hypot(0.5 * (A[0, 0] - A[1, 1]), A[0, 1])
        return m - r, m + r
    q = (A[0, 0] + A[1, 1] + A[2, 2]) / 3.0
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    B00 = (A[0, 0] - q) / safe
    B11 = (A[1, 1] - q) / safe
    B22 = (A[2, 2] - q) / safe
    B01 = A[0, 1] / safe
    B02 = A[0, 2] / safe
    B12 = A[1, 2] / safe
    det = B00 * (B11 * B22 - B12 ** 2) - B01 * (B01 * B22 - B12 * B02) + B02 * (B01 * B12 - B11 * B02)
    phi = np.arccos(np.clip(0.5 * det, -1.0, 1.0)) / 3.0
    lmax = q + 2.0 * p * np.cos(phi)
    lmin = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return np.where(p > 0, lmin, q), np.where(p > 0, lmax, q)


def estimate_K0(spec: GridSpec, coeffs: CoefficientSet, gamma: float, rtol: float = 1e-12) -> float:
    """min over cells of lambda_min(A(v)) / <v>^gamma; 0 if some cell is not PSD."""
    A = coeffs.A
    if A is None or not np.all(np.isfinite(A)):
        raise KernelError("coefficient set has no finite diffusion matrix")
    lmin, lmax = symmetric_eigen_extremes(A)
    scale = float(np.max(np.abs(lmax))) if lmax.size else 0.0
    if scale == 0.0 or np.min(lmin) < -rtol * scale:
        return 0.0
    return max(0.0, float(np.min(lmin / spec.bracket(gamma))))
