"""Scalar functionals of snapshots and trajectories."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .grid import GridSpec, check_scalar, gradient, integrate

log = logging.getLogger(__name__)

KINDS = ("moment", "Msp", "Dsp", "entropy", "psi_moment")


class FunctionalError(ValueError):
    pass


def nonnegative(f: np.ndarray) -> np.ndarray:
    """Clamp undershoots to zero for use inside functionals; logs the clamp size."""
    low = float(np.min(f)) if f.size else 0.0
    if low < 0:
        log.debug("clamped negative values inside functional, min f = %.3e", low)
        return np.maximum(f, 0.0)
    return f


def moment(spec: GridSpec, f, s: float) -> float:
    return integrate(spec, f, s)


def M_sp(spec: GridSpec, f, s: float, p: float) -> float:
    if p <= 1:
        raise FunctionalError(f"p must exceed 1, got {p}")
    f = nonnegative(check_scalar(spec, f))
    return integrate(spec, f ** p, s)


def dirichlet(spec: GridSpec, g) -> float:
    """Midpoint value of the integral of |grad g|^2 with the centred gradient."""
    G = gradient(spec, g)
    return float(np.sum(G * G) * spec.cell_volume)


def D_sp(spec: GridSpec, f, s: float, p: float) -> float:
    if p <= 1:
        raise FunctionalError(f"p must exceed 1, got {p}")
    f = nonnegative(check_scalar(spec, f))
    return dirichlet(spec, spec.bracket(0.5 * s) * f ** (0.5 * p))


def entropy(spec: GridSpec, f) -> float:
    f = nonnegative(check_scalar(spec, f))
    pos = f > 0
    return float(np.sum(f[pos] * np.log(f[pos])) * spec.cell_volume)


def positive_entropy(spec: GridSpec, f) -> float:
    """Integral of f (log f)_+, the part of the entropy carried by {f > 1}."""
    f = nonnegative(check_scalar(spec, f))
    big = f > 1
    return float(np.sum(f[big] * np.log(f[big])) * spec.cell_volume)


def psi_moment(spec: GridSpec, f, s_psi: float) -> float:
    """Integral of f(v) Psi(|v|^2) with Psi(r) = r^(s/2)."""
    if s_psi <= 2:
        raise FunctionalError(f"Psi must be superlinear: need s_psi > 2, got {s_psi}")
    f = check_scalar(spec, f)
    return float(np.sum(f * spec.speed_squared ** (0.5 * s_psi)) * spec.cell_volume)


def level_truncate(f, level: float) -> np.ndarray:
    if level < 0:
        raise FunctionalError(f"level must be nonnegative, got {level}")
    f = np.asarray(f, dtype=float)
    return np.where(f >= level, f - level, 0.0)


@dataclass(frozen=True)
class FunctionalRequest:
    kind: str
    s: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FunctionalError(f"unknown functional kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("Msp", "Dsp") and self.p <= 1:
            raise FunctionalError(f"p must exceed 1 for {self.kind}")
        if self.kind == "psi_moment" and self.s <= 2:
            raise FunctionalError("psi_moment needs s > 2")

    @property
    def column(self) -> str:
        s, p = _fmt(self.s), _fmt(self.p)
        return {
            "moment": f"m{s}",
            "Msp": f"M{s}_{p}",
            "Dsp": f"D{s}_{p}",
            "entropy": "H",
            "psi_moment": f"mpsi{s}",
        }[self.kind]

    def __call__(self, spec: GridSpec, f) -> float:
        if self.kind == "moment":
            return moment(spec, f, self.s)
        if self.kind == "Msp":
            return M_sp(spec, f, self.s, self.p)
        if self.kind == "Dsp":
            return D_sp(spec, f, self.s, self.p)
        if self.kind == "entropy":
            return entropy(spec, f)
        return psi_moment(spec, f, self.s)


def _fmt(x: float) -> str:
    return f"{x:g}"


def parse_requests(items: Iterable) -> List[FunctionalRequest]:
    out = []
    for it in items:
        if isinstance(it, FunctionalRequest):
            out.append(it)
        else:
            out.append(FunctionalRequest(**it))
    return out


@dataclass(frozen=True)
class EnergyFunctionalValue:
    level: float
    window: tuple
    value: float
    c0: float


def level_profile(spec: GridSpec, snapshots: Sequence[np.ndarray], level: float, gamma: float):
    """Per-snapshot (1/2 ||f_l^+||^2, ||grad(<v>^(g/2) f_l^+)||^2)."""
    weight = spec.bracket(0.5 * gamma)
    half, diss = [], []
    for f in snapshots:
        fl = level_truncate(f, level)
        if not np.any(fl):
            half.append(0.0)
            diss.append(0.0)
            continue
        half.append(0.5 * float(np.sum(fl * fl)) * spec.cell_volume)
        diss.append(dirichlet(spec, weight * fl))
    return np.array(half), np.array(diss)


def _interp(times, values, t):
    return float(np.interp(t, times, values))


def energy_from_profile(times, half, diss, T1: float, T2: float, c0: float) -> float:
    times = np.asarray(times, dtype=float)
    inside = np.nonzero((times > T1) & (times < T2))[0]
    t_pts = np.concatenate([[T1], times[inside]])
    h_pts = np.concatenate([[_interp(times, half, T1)], half[inside]])
    d_pts = np.concatenate([[_interp(times, diss, T1)], diss[inside]])
    if t_pts.size == 1:
        return float(h_pts[0])
    steps = 0.5 * (d_pts[1:] + d_pts[:-1]) * np.diff(t_pts)
    acc = np.concatenate([[0.0], np.cumsum(steps)])
    return float(np.max(h_pts + c0 * acc))


def check_cadence(times, T1: float, T2: float) -> None:
    times = np.asarray(times, dtype=float)
    if T2 <= T1:
        return
    pts = np.concatenate([[T1], times[(times > T1) & (times < T2)], [T2]])
    gap = float(np.max(np.diff(pts)))
    if gap > (T2 - T1) / 16 * (1 + 1e-9):
        raise FunctionalError(
            f"snapshot cadence too coarse: gap {gap:.4g} exceeds (T2-T1)/16 = {(T2 - T1) / 16:.4g}"
        )


def energy_functional(traj, level: float, T1: float, T2: float, c0: float, strict: bool = True) -> EnergyFunctionalValue:
    """sup over stored t in [T1, T2) of 1/2||f_l^+(t)||^2 + c0 * int_T1^t ||grad(<v>^(g/2) f_l^+)||^2.

    The time integral is a trapezoid over stored snapshots; values at T1 are
    linearly interpolated when T1 falls between snapshots.
    """
    if c0 <= 0:
        raise FunctionalError("c0 must be positive")
    times = np.asarray(traj.times, dtype=float)
    if T1 < times[0] - 1e-12 or max(T1, T2) > times[-1] + 1e-12:
        raise FunctionalError(f"window [{T1}, {T2}] lies outside the trajectory [{times[0]}, {times[-1]}]")
    if strict:
        check_cadence(times, T1, T2)
    half, diss = level_profile(traj.spec, traj.snapshots, level, traj.gamma)
    value = energy_from_profile(times, half, diss, T1, T2, c0)
    return EnergyFunctionalValue(level, (T1, T2), value, c0)
