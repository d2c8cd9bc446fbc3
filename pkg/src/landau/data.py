"""Normalised initial data (mass 1, momentum 0, energy d) on a grid."""

from __future__ import annotations

import numpy as np

from .grid import GridSpec
from .solver import normalize_initial


def _gauss(pts, center, sigma):
    d = pts.shape[0]
    c = np.asarray(center, dtype=float).reshape((d,) + (1,) * (pts.ndim - 1))
    r2 = np.sum((pts - c) ** 2, axis=0)
    return np.exp(-0.5 * r2 / sigma ** 2) / (2 * np.pi * sigma ** 2) ** (d / 2)


def maxwellian(spec: GridSpec) -> np.ndarray:
    """Standard Maxwellian sampled on the nodes (not re-normalised)."""
    return _gauss(spec.coords, np.zeros(spec.d), 1.0)


def shifted_maxwellian(spec: GridSpec, u) -> np.ndarray:
    return _gauss(spec.coords, u, 1.0)


def bimodal(spec: GridSpec, separation: float = 2.0, sigma: float = 0.6) -> np.ndarray:
    e = np.zeros(spec.d)
    e[0] = separation / 2

    def raw(p):
        return _gauss(p, e, sigma) + _gauss(p, -e, sigma)

    return normalize_initial(spec, raw)


def anisotropic_gaussian(spec: GridSpec, ratios=(2.0, 0.7, 0.5)) -> np.ndarray:
    ratios = np.asarray(ratios[: spec.d], dtype=float)

    def raw(p):
        q = p / ratios.reshape((spec.d,) + (1,) * (p.ndim - 1))
        return np.exp(-0.5 * np.sum(q * q, axis=0))

    return normalize_initial(spec, raw)


def compact_bump(spec: GridSpec, radius: float = 3.0) -> np.ndarray:
    def raw(p):
        r2 = np.sum(p * p, axis=0) / radius ** 2
        inside = r2 < 1
        out = np.zeros(r2.shape)
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    return normalize_initial(spec, raw)


def ring(spec: GridSpec, radius: float = 1.5, width: float = 0.4) -> np.ndarray:
    def raw(p):
        r = np.sqrt(np.sum(p * p, axis=0))
        return np.exp(-0.5 * ((r - radius) / width) ** 2)

    return normalize_initial(spec, raw)


def tall_bump(spec: GridSpec, bump_mass: float = 0.6, bump_sigma: float = None, background_sigma: float = 1.2,
              sigma_cells: float = 1.0) -> np.ndarray:
    """Narrow tall Gaussian at the origin on top of a wide background.

    The bump width is ``sigma_cells`` grid spacings unless ``bump_sigma`` is
    given, so its L^2 norm is far above what the equation allows at positive times.
    """
    sigma0 = sigma_cells * spec.spacing if bump_sigma is None else bump_sigma
    zero = np.zeros(spec.d)

    def raw(p):
        return bump_mass * _gauss(p, zero, sigma0) + (1 - bump_mass) * _gauss(p, zero, background_sigma)

    return normalize_initial(spec, raw)


def spike(spec: GridSpec, mass: float = 1.0) -> np.ndarray:
    """Mass spread evenly over the cells nearest the origin; no moment normalisation."""
    r = np.sum(np.abs(spec.coords), axis=0)
    f = np.isclose(r, r.min()).astype(float)
    return mass * f / (np.sum(f) * spec.cell_volume)


def blob(spec: GridSpec, sigma_cells: float = 4.0, mass: float = 1.0) -> np.ndarray:
    """Gaussian of width ``sigma_cells`` grid spacings at the origin; no moment normalisation."""
    f = _gauss(spec.coords, np.zeros(spec.d), sigma_cells * spec.spacing)
    return mass * f / (np.sum(f) * spec.cell_volume)


FAMILY = {
    "maxwellian": lambda spec: normalize_initial(spec, maxwellian(spec)),
    "bimodal": bimodal,
    "anisotropic": anisotropic_gaussian,
    "compact_bump": compact_bump,
    "ring": ring,
    "tall_bump": tall_bump,
    "spike": spike,
    "blob": blob,
}


def make_datum(spec: GridSpec, name: str, **kwargs) -> np.ndarray:
    if name not in FAMILY:
        raise ValueError(f"unknown datum {name!r}; valid: {sorted(FAMILY)}")
    return FAMILY[name](spec, **kwargs)
