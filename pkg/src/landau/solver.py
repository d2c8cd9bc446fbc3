"""Explicit time integration of the homogeneous Landau equation in divergence form.

Discretisation
--------------
The flux is collocated at the cells.  With I the cells away from the outer
layer, D the centred difference (zero extension) and G = Df,

    F_v = sum_{w in I} a(v-w) (f_w G_v - f_v G_w) h^d      for v in I,
    F_v = 0                                               otherwise,

and ``df/dt = div F`` where div is the exact negative adjoint of D.  Pairing
with a test function phi gives

    sum_v Dphi_v . F_v = 1/2 sum_{v,w in I} (Dphi_v - Dphi_w) . a(v-w) (f_w G_v - f_v G_w) h^d.

On I the centred difference is exact on quadratics, so Dphi_v - Dphi_w is
0, e_j or 2(v-w) for phi = 1, v_j, |v|^2; with a(z) z = 0 mass, momentum and
energy are conserved to round-off for every f.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .coefficients import (
    CoefficientSet,
    assemble,
    build_kernels,
    padded_transform,
    symmetric_eigen_extremes,
)
from .functionals import FunctionalRequest, entropy, parse_requests
from .grid import GridSpec, boundary_mask, check_scalar, divergence, gradient, integrate

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class SolverConfig:
    gamma: float = -1.0
    cfl_factor: float = 0.4
    t_end: float = 1.0
    snapshot_interval: float = 0.1
    positivity_floor: float = 0.0
    scheme: str = "rk2"
    functionals: List[FunctionalRequest] = field(default_factory=list)
    record_k0: bool = True

    def __post_init__(self):
        self.functionals = parse_requests(self.functionals)
        if not (0 < self.cfl_factor <= 1):
            raise ValueError(f"cfl_factor must lie in (0, 1], got {self.cfl_factor}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.snapshot_interval > 0:
            raise ValueError("snapshot_interval must be positive")
        if self.scheme not in ("euler", "rk2"):
            raise ValueError(f"scheme must be 'euler' or 'rk2', got {self.scheme!r}")
        if not (-2.0 <= self.gamma < 0.0):
            raise ValueError(f"gamma must lie in [-2, 0), got {self.gamma}")
        if self.positivity_floor < 0:
            raise ValueError("positivity_floor must be nonnegative")


def diagnostic_columns(spec: GridSpec, config: SolverConfig) -> List[str]:
    mom = ["mom_x", "mom_y", "mom_z"][: spec.d]
    return ["time", "dt", "mass", *mom, "energy", "entropy", "k0"] + [r.column for r in config.functionals]


@dataclass
class Trajectory:
    spec: GridSpec
    config: SolverConfig
    times: List[float] = field(default_factory=list)
    snapshots: List[np.ndarray] = field(default_factory=list)
    rows: List[Dict[str, float]] = field(default_factory=list)
    # per-row extras that are not part of the CSV contract
    min_f: List[float] = field(default_factory=list)
    clip_log: List[tuple] = field(default_factory=list)

    @property
    def gamma(self) -> float:
        return self.config.gamma

    @property
    def columns(self) -> List[str]:
        return diagnostic_columns(self.spec, self.config)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def snapshot_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.snapshots[i]

    def drift_report(self) -> Dict[str, float]:
        first, last = self.rows[0], self.rows[-1]
        mom = [c for c in self.columns if c.startswith("mom_")]
        mom_drift = max(abs(r[c] - first[c]) for r in self.rows for c in mom)
        energy = self.column("energy")
        mass = self.column("mass")
        H = self.column("entropy")
        t = self.column("time")
        rises = np.diff(H)
        dts = np.diff(t)
        rate = float(np.max(np.where(dts > 0, rises / np.where(dts > 0, dts, 1.0), 0.0))) if dts.size else 0.0
        return {
            "mass_drift": float(np.max(np.abs(mass - mass[0])) / abs(mass[0])),
            "momentum_drift": float(mom_drift / max(abs(first["mass"]), 1e-300)),
            "energy_drift": float(np.max(np.abs(energy - energy[0])) / abs(energy[0])),
            "max_entropy_increase": float(max(0.0, np.max(rises))) if rises.size else 0.0,
            "max_entropy_increase_rate": max(0.0, rate),
            "min_f": float(min(self.min_f)) if self.min_f else float("nan"),
            "max_f0": float(np.max(self.snapshots[0])),
            "final_time": float(t[-1]),
            "steps": len(self.rows) - 1,
        }


def moments(spec: GridSpec, f: np.ndarray):
    """Discrete (mass, momentum vector, energy) with energy = int f |v|^2."""
    w = spec.cell_volume
    mass = float(np.sum(f) * w)
    mom = np.array([float(np.sum(f * spec.coords[j]) * w) for j in range(spec.d)])
    energy = float(np.sum(f * spec.speed_squared) * w)
    return mass, mom, energy


def _affine_sample(spec: GridSpec, source: Callable, scale: float, shift: np.ndarray, amp: float):
    pts = spec.coords * scale + shift.reshape((spec.d,) + (1,) * spec.d)
    return amp * np.maximum(source(pts), 0.0)


def _array_source(spec: GridSpec, f: np.ndarray) -> Callable:
    def source(pts):
        idx = (pts + spec.half_width) / spec.spacing - 0.5
        return ndimage.map_coordinates(f, idx, order=3, mode="constant", cval=0.0)

    return source


def is_normalized(spec: GridSpec, f: np.ndarray, tol: float = 1e-12) -> bool:
    mass, mom, energy = moments(spec, f)
    return abs(mass - 1) <= tol and np.max(np.abs(mom)) <= tol and abs(energy - spec.d) <= tol * spec.d


def normalize_initial(spec: GridSpec, f_raw, tol: float = 1e-13, max_iter: int = 60) -> np.ndarray:
    """Affine velocity change and amplitude scaling to mass 1, momentum 0, energy d.

    ``f_raw`` is either a grid array (resampled by cubic splines) or a callable
    evaluated on coordinate arrays of shape (d, ...).  The affine parameters are
    iterated until the discrete moments match to ``tol``.
    """
    if callable(f_raw):
        source = f_raw
        f0 = _affine_sample(spec, source, 1.0, np.zeros(spec.d), 1.0)
    else:
        f0 = check_scalar(spec, f_raw)
        if np.min(f0) < 0:
            raise ValueError("initial datum must be nonnegative")
        source = _array_source(spec, f0)
    mass, mom, energy = moments(spec, f0)
    if not mass > 0:
        raise ValueError("initial datum has zero mass")
    if not callable(f_raw) and is_normalized(spec, f0, max(tol, 1e-12)):
        return f0.copy()
    scale, shift, amp = 1.0, np.zeros(spec.d), 1.0
    f = f0
    for _ in range(max_iter):
        mass, mom, energy = moments(spec, f)
        u = mom / mass
        theta = (energy / mass - u @ u) / spec.d
        if abs(mass - 1) <= tol and np.max(np.abs(u)) <= tol and abs(theta - 1) <= tol:
            return f
        # a density with mean u and temperature theta becomes standard under
        # v -> u + sqrt(theta) v; compose with the current map
        shift = shift + scale * u
        scale = scale * math.sqrt(theta)
        amp = 1.0 / _sampled_mass(spec, source, scale, shift)
        f = _affine_sample(spec, source, scale, shift, amp)
    mass, mom, energy = moments(spec, f)
    if abs(mass - 1) > 1e-10 or np.max(np.abs(mom)) > 1e-10 or abs(energy - spec.d) > 1e-10 * spec.d:
        raise SolverError("normalisation did not converge")
    return f


def _sampled_mass(spec, source, scale, shift):
    return float(np.sum(_affine_sample(spec, source, scale, shift, 1.0)) * spec.cell_volume)


def transport_coefficients(spec: GridSpec, f: np.ndarray, gamma: float) -> CoefficientSet:
    """A = a * (f 1_I) and drift = a * (Df 1_I), the pieces of the flux."""
    outer = boundary_mask(spec)
    f_in = np.where(outer, 0.0, f)
    G = gradient(spec, f)
    G[:, outer] = 0.0
    grad_hats = [padded_transform(spec, g) for g in G]
    return assemble(spec, build_kernels(spec, gamma), padded_transform(spec, f_in), grad_hats, ("A", "drift"))


def flux(spec: GridSpec, f: np.ndarray, coeffs: CoefficientSet) -> np.ndarray:
    Df = gradient(spec, f)
    F = np.einsum("ij...,j...->i...", coeffs.A, Df)
    F -= f * coeffs.drift
    F[:, boundary_mask(spec)] = 0.0
    return F


def collision_rhs(spec: GridSpec, f: np.ndarray, coeffs: CoefficientSet) -> np.ndarray:
    return divergence(spec, flux(spec, f, coeffs))


def max_dt(spec: GridSpec, coeffs: CoefficientSet, cfl_factor: float = 1.0) -> float:
    _, lmax = symmetric_eigen_extremes(coeffs.A)
    top = float(np.max(lmax))
    if top <= 0:
        return math.inf
    return cfl_factor * spec.spacing ** 2 / (2 * spec.d * top)


def step(spec: GridSpec, f, coeffs: CoefficientSet, dt: float, cfl_factor: float = 1.0) -> np.ndarray:
    """One forward-Euler step with frozen coefficients."""
    f = check_scalar(spec, f)
    limit = max_dt(spec, coeffs, cfl_factor)
    if dt > limit * (1 + 1e-12):
        raise SolverError(f"dt={dt:.4g} violates the CFL limit {limit:.4g}")
    return f + dt * collision_rhs(spec, f, coeffs)


def _advance(spec, f, coeffs, dt, config):
    k1 = collision_rhs(spec, f, coeffs)
    if config.scheme == "euler":
        return f + dt * k1
    f1 = f + dt * k1
    k2 = collision_rhs(spec, f1, transport_coefficients(spec, f1, config.gamma))
    return f + 0.5 * dt * (k1 + k2)


@dataclass
class SolverState:
    f: np.ndarray
    time: float
    steps: int
    next_snapshot: int


def _diagnostics(spec, f, t, dt, coeffs, config) -> Dict[str, float]:
    mass, mom, energy = moments(spec, f)
    row = {"time": t, "dt": dt, "mass": mass}
    for name, val in zip(["mom_x", "mom_y", "mom_z"], mom):
        row[name] = float(val)
    row["energy"] = energy
    row["entropy"] = entropy(spec, f)
    if config.record_k0:
        lmin, _ = symmetric_eigen_extremes(coeffs.A)
        row["k0"] = max(0.0, float(np.min(lmin / spec.bracket(config.gamma))))
    else:
        row["k0"] = float("nan")
    for req in config.functionals:
        row[req.column] = req(spec, f)
    return row


def run(
    spec: GridSpec,
    f_in,
    config: SolverConfig,
    resume: Optional[tuple] = None,
    checkpoint: Optional[Callable[[Trajectory, SolverState], None]] = None,
    checkpoint_every: int = 0,
    progress: Optional[Callable[[float], None]] = None,
) -> Trajectory:
    """Integrate from ``f_in`` to ``config.t_end``.

    ``resume`` is a (Trajectory, SolverState) pair previously handed to
    ``checkpoint``; continuing from it reproduces the uninterrupted run bit for bit.
    """
    if resume is not None:
        traj, state = resume
        f, t, steps, next_snap = state.f.copy(), state.time, state.steps, state.next_snapshot
    else:
        f = check_scalar(spec, f_in).copy()
        traj = Trajectory(spec, config)
        t, steps, next_snap = 0.0, 0, 1
        coeffs = transport_coefficients(spec, f, config.gamma)
        traj.times.append(0.0)
        traj.snapshots.append(f.copy())
        traj.rows.append(_diagnostics(spec, f, 0.0, 0.0, coeffs, config))
        traj.min_f.append(float(np.min(f)))
    n_snap = int(math.floor(config.t_end / config.snapshot_interval + 1e-9))
    snap_times = [k * config.snapshot_interval for k in range(n_snap + 1)]
    if snap_times[-1] < config.t_end * (1 - 1e-12):
        snap_times.append(config.t_end)

    coeffs = transport_coefficients(spec, f, config.gamma)
    while t < config.t_end * (1 - 1e-14):
        target = snap_times[next_snap]
        dt = max_dt(spec, coeffs, config.cfl_factor)
        hit = False
        if t + dt >= target * (1 - 1e-13):
            dt = target - t
            hit = True
        f_new = _advance(spec, f, coeffs, dt, config)
        if not np.all(np.isfinite(f_new)):
            raise SolverError(f"non-finite values at t={t + dt:.6g}; returning last valid state", traj)
        t = target if hit else t + dt
        steps += 1
        f = f_new
        low = float(np.min(f))
        if config.positivity_floor > 0 and low < 0:
            mass0 = float(np.sum(f))
            f = np.maximum(f, 0.0)
            f *= mass0 / float(np.sum(f))
            traj.clip_log.append((t, low))
            log.info("clipped negative values at t=%.6g (min %.3e), mass renormalised", t, low)
        coeffs = transport_coefficients(spec, f, config.gamma)
        traj.rows.append(_diagnostics(spec, f, t, dt, coeffs, config))
        traj.min_f.append(low)
        if hit:
            traj.times.append(t)
            traj.snapshots.append(f.copy())
            next_snap += 1
            if checkpoint is not None and checkpoint_every and (next_snap - 1) % checkpoint_every == 0:
                checkpoint(traj, SolverState(f.copy(), t, steps, next_snap))
        if progress is not None:
            progress(t)
    return traj


def write_diagnostics_csv(traj: Trajectory, path) -> None:
    cols = traj.columns
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in traj.rows:
            fh.write(",".join(format_float(row[c]) for c in cols) + "\n")


def format_float(x: float) -> str:
    return repr(float(x)) if not np.isfinite(x) else f"{float(x):.17g}"


def config_dict(config: SolverConfig) -> dict:
    out = asdict(config)
    out["functionals"] = [asdict(r) for r in config.functionals]
    return out
