"""Rate and growth fits on trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..functionals import M_sp, moment


@dataclass(frozen=True)
class RateFit:
    window: Tuple[float, float]
    exponent: float
    residual: float
    target: float
    declined: Optional[str] = None

    @property
    def relative_error(self) -> float:
        return abs(self.exponent - self.target) / abs(self.target)


def appearance_target(d: int, p: float) -> float:
    return -d * (p - 1) / 2.0


def mu(s: float, p: float, gamma: float, d: int) -> float:
    """Moment order needed by the appearance estimate: (2s - gamma d (p-1)) / (2p)."""
    return (2 * s - gamma * d * (p - 1)) / (2 * p)


def series_M(traj, s: float, p: float):
    t = np.asarray(traj.times, dtype=float)
    M = np.array([M_sp(traj.spec, f, s, p) for f in traj.snapshots])
    return t, M


def fit_appearance_rate(traj, s: float, p: float, times=None, values=None, octaves: float = 1.0) -> RateFit:
    """Least-squares slope of log M_{s,p} against log t around the steepest decay.

    The window spans ``octaves`` factors of two on either side of the time of
    steepest local decay.  Declines the fit when M does not decay or is not
    monotone in the window.
    """
    target = appearance_target(traj.spec.d, p)
    if times is None:
        times, values = series_M(traj, s, p)
    t = np.asarray(times, dtype=float)
    M = np.asarray(values, dtype=float)
    keep = t > 0
    t, M = t[keep], M[keep]
    if t.size < 5 or not np.all(M > 0):
        return RateFit((math.nan, math.nan), math.nan, math.nan, target, "too few positive samples")
    if (M.max() - M.min()) <= 1e-3 * M.max():
        return RateFit((math.nan, math.nan), math.nan, math.nan, target, "no decay window")
    lt, lM = np.log(t), np.log(M)
    local = np.gradient(lM, lt)
    i = int(np.argmin(local))
    if local[i] >= 0:
        return RateFit((math.nan, math.nan), math.nan, math.nan, target, "no decay window")
    lo, hi = t[i] / 2 ** octaves, t[i] * 2 ** octaves
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    window = (float(t[sel].min()), float(t[sel].max()))
    if np.any(np.diff(M[sel]) > 0):
        return RateFit(window, math.nan, math.nan, target, "M not monotone in the window")
    A = np.vstack([lt[sel], np.ones(np.count_nonzero(sel))]).T
    coef, res, *_ = np.linalg.lstsq(A, lM[sel], rcond=None)
    resid = float(np.sqrt(res[0] / np.count_nonzero(sel))) if res.size else 0.0
    return RateFit(window, float(coef[0]), resid, target)


def plateau_bound(times, values, t_from: float = 1.0) -> Tuple[float, float]:
    """(max of M on t >= t_from, value of M at the first sample >= t_from)."""
    t = np.asarray(times)
    M = np.asarray(values)
    sel = t >= t_from - 1e-12
    if not np.any(sel):
        return math.nan, math.nan
    return float(np.max(M[sel])), float(M[sel][0])


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    residual: float
    envelope: float
    passed: bool


def fit_moment_growth(traj, s: float, envelope: float = 0.05, times=None, values=None) -> GrowthFit:
    """Linear fit of m_s(t); passes when every sample lies below (1 + envelope) times the line."""
    if times is None:
        t = np.asarray(traj.times, dtype=float)
        values = np.array([moment(traj.spec, f, s) for f in traj.snapshots])
    else:
        t = np.asarray(times, dtype=float)
    m = np.asarray(values, dtype=float)
    slope, icpt = np.polyfit(t, m, 1)
    line = icpt + slope * t
    resid = float(np.sqrt(np.mean((m - line) ** 2)))
    ok = bool(np.isfinite(slope) and np.all(m <= (1 + envelope) * line))
    return GrowthFit(float(slope), float(icpt), resid, envelope, ok)
