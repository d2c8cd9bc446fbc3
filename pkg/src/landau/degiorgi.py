"""Level-set (De Giorgi) iteration driven by computed trajectories.

Two modes:

* property mode bisects the smallest cap K whose truncated energy vanishes at
  the end of the ladder and checks how it scales with t_star;
* ledger mode back-solves the single constant C for which the measured energies
  satisfy the nonlinear recurrence, derives K(t_star, T) from it and checks the
  geometric decay E_n <= E_0 Q^-n along the ladder of that K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .functionals import check_cadence, energy_from_profile, level_profile, moment

N_MAX = 8


class DeGiorgiError(ValueError):
    pass


@dataclass(frozen=True)
class DeGiorgiConfig:
    t_star: float
    T: float
    gamma: float
    s: float
    d: int = 3
    p_gamma: Optional[float] = None
    alpha: Optional[float] = None
    K: Optional[float] = None
    n_max: int = N_MAX
    c0: Optional[float] = None
    constants: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not (0 < self.t_star < self.T):
            raise DeGiorgiError(f"need 0 < t_star < T, got t_star={self.t_star}, T={self.T}")
        if self.n_max < 1:
            raise DeGiorgiError("n_max must be at least 1")
        if self.K is not None and self.K <= 0:
            raise DeGiorgiError("K must be positive")
        if self.c0 is not None and self.c0 <= 0:
            raise DeGiorgiError("c0 must be positive")
        check_admissible(self.d, self.gamma, self.s, self.branch_parameter)

    @property
    def critical(self) -> bool:
        return self.gamma == -2.0

    @property
    def branch_parameter(self) -> float:
        if self.gamma == -2.0:
            return self.alpha if self.alpha is not None else 1.0 - 1.0 / self.s
        if self.p_gamma is None:
            raise DeGiorgiError("p_gamma is required when gamma > -2")
        return self.p_gamma


def check_admissible(d: int, gamma: float, s: float, par: float) -> None:
    if not (-2.0 <= gamma < 0.0):
        raise DeGiorgiError(f"gamma must lie in [-2, 0), got {gamma}")
    if gamma == -2.0:
        if s <= d:
            raise DeGiorgiError(f"gamma = -2 needs s > d, got s={s}")
        if not (0.5 < par < 1.0):
            raise DeGiorgiError(f"alpha must lie in (1/2, 1), got {par}")
        return
    if s <= 0.5 * d * abs(gamma):
        raise DeGiorgiError(f"need s > d|gamma|/2 = {0.5 * d * abs(gamma)}, got s={s}")
    lo = d / (d + gamma)
    hi = 3.0 if d <= 3 else min(3.0, d / (d - 2.0))
    if not (lo < par < hi):
        raise DeGiorgiError(f"p_gamma must lie in ({lo:g}, {hi:g}), got {par}")


def ladders(K: float, t_star: float, n_max: int = N_MAX):
    """Levels K(1 - 2^-n) and times t_star(1 - 2^-(n+1)) for n = 0..n_max."""
    if K <= 0 or t_star <= 0:
        raise DeGiorgiError("K and t_star must be positive")
    n = np.arange(n_max + 1, dtype=float)
    return K * (1.0 - 2.0 ** -n), t_star * (1.0 - 2.0 ** -(n + 1))


def compute_Q(d: int, gamma: float, s: float, par: float) -> float:
    """Geometric ratio Q of the target sequence E_0 Q^-n; ``par`` is p_gamma or alpha."""
    check_admissible(d, gamma, s, par)
    if gamma == -2.0:
        exps = (2.0, (4 * s + d * (s - 2)) / (2 * s - 2 * d), 2 * par / (2 * par - 1))
    else:
        p = par
        exps = ((d + 4) / 2.0, (4 * s + d * (gamma + s)) / (2 * s + d * gamma), (2 * d - (d - 4) * p) / (d - (d - 2) * p))
    return 2.0 ** max(exps)


def t_star_exponent(d: int, gamma: float, s: float) -> float:
    if gamma == -2.0:
        return -d * s / (4 * s - 2 * d)
    return -d * s / (4 * s + d * gamma)


@dataclass(frozen=True)
class KBound:
    K: float
    K1: float
    K2: float
    K3: float

    @property
    def rough_sum(self) -> float:
        return self.K1 + self.K2 + self.K3


def compute_K(t_star: float, E0: float, y_s: float, d: int, gamma: float, s: float, par: float,
              constants: Sequence[float] = (1.0, 1.0, 1.0)) -> KBound:
    """K(t_star, T) = max(K1, K2, K3) with prefactors ``constants`` on the three terms.

    For the critical branch the third term uses sup m_{1/(1-alpha)}, which is
    y_s when 1/(1-alpha) = s.
    """
    check_admissible(d, gamma, s, par)
    if E0 < 0 or y_s < 0:
        raise DeGiorgiError("E0 and y_s must be nonnegative")
    c1, c2, c3 = constants
    if gamma == -2.0:
        a = par
        K1 = c1 * E0 ** ((s - d) / (2 * s - d)) * y_s ** (d / (2 * s - d)) * t_star ** t_star_exponent(d, gamma, s)
        K2 = c2 * math.sqrt(E0)
        K3 = c3 * y_s ** (2 * (1 - a) / (2 * a - 1)) * E0
    else:
        g, p = abs(gamma), par
        K1 = c1 * E0 ** ((2 * s + d * gamma) / (4 * s + d * gamma)) * y_s ** (d * g / (4 * s + d * gamma)) * t_star ** t_star_exponent(d, gamma, s)
        K2 = c2 * math.sqrt(E0) * y_s ** (g * p * d / (2 * s * (d - p * (d - 2))))
        K3 = c3 * y_s ** (d * g / (4 * s)) * math.sqrt(E0)
    return KBound(max(K1, K2, K3), K1, K2, K3)


def K_constants_from_C(C: float, d: int, gamma: float, s: float, par: float, Q: float = 1.0) -> Tuple[float, float, float]:
    """Prefactors of K1, K2, K3 obtained by making each term of the one-step condition equal 1/3.

    Matching E_{n+1}^* = E_0 Q^-(n+1) against the recurrence leaves one factor Q
    on every term, so the condition actually reads Q C (term) <= 1/3; pass Q = 1
    to drop it.
    """
    if gamma == -2.0:
        e = (d * s / (4 * s - 2 * d), d / 4.0, 1.0 / (2 * par - 1))
    else:
        p = par
        e = (d * s / (4 * s + d * gamma), 1.0 / (2 / p + 4 / d - 2), d / 4.0)
    return tuple((3.0 * C * Q) ** x for x in e)


def recurrence_terms(n: int, E_n: float, K: float, t_star: float, y_s: float, d: int, gamma: float, s: float, par: float):
    """The three right-hand terms of E_{n+1} <= C (r1 + r2 + r3) with C = 1."""
    if gamma == -2.0:
        a = par
        e1 = (4 * s - 2 * d) / (d * s)
        r1 = y_s ** (2 / s) / t_star * K ** -e1 * 2.0 ** (n * (1 + e1)) * E_n ** (1 + (2 * s - 2 * d) / (d * s))
        r2 = K ** (-4 / d) * 2.0 ** (4 * n / d) * E_n ** (1 + 2 / d)
        r3 = y_s ** (2 * (1 - a)) * K ** (1 - 2 * a) * 2.0 ** (2 * a * n) * E_n ** (2 * a)
    else:
        p = par
        w = y_s ** (abs(gamma) / s)
        e1 = (4 * s + d * gamma) / (d * s)
        r1 = w / t_star * K ** -e1 * 2.0 ** (n * (1 + e1)) * E_n ** (1 + (2 * s + d * gamma) / (d * s))
        e2 = 2 / p - (d - 4) / d
        r2 = w * K ** (1 - e2) * 2.0 ** (n * e2) * E_n ** (1 / p + 2 / d)
        r3 = w * K ** (-4 / d) * 2.0 ** (n * (1 + 4 / d)) * E_n ** (1 + 2 / d)
    return r1, r2, r3


def calibrate_C(E: Sequence[float], K: float, t_star: float, y_s: float, d, gamma, s, par) -> float:
    """Smallest C with E_{n+1} <= C (r1 + r2 + r3)(E_n) along the measured ladder."""
    best = 0.0
    for n in range(len(E) - 1):
        if E[n + 1] <= 0:
            continue
        rhs = sum(recurrence_terms(n, E[n], K, t_star, y_s, d, gamma, s, par))
        if rhs <= 0:
            return math.inf
        best = max(best, E[n + 1] / rhs)
    return best


class _Profiles:
    """Caches per-level snapshot profiles so bisection does not recompute them."""

    def __init__(self, traj):
        self.traj = traj
        self.times = np.asarray(traj.times, dtype=float)
        self._cache: Dict[float, tuple] = {}

    def energy(self, level: float, T1: float, T2: float, c0: float) -> float:
        if level not in self._cache:
            self._cache[level] = level_profile(self.traj.spec, self.traj.snapshots, level, self.traj.gamma)
        half, diss = self._cache[level]
        return energy_from_profile(self.times, half, diss, T1, T2, c0)


def ladder_energies(prof: _Profiles, K: float, cfg: DeGiorgiConfig, c0: float) -> np.ndarray:
    levels, times = ladders(K, cfg.t_star, cfg.n_max)
    return np.array([prof.energy(float(l), float(t), cfg.T, c0) for l, t in zip(levels, times)])


def measured_sup(traj, t_from: float, T: float) -> float:
    times = np.asarray(traj.times)
    sel = np.nonzero((times >= t_from - 1e-12) & (times < T + 1e-12))[0]
    return float(max(np.max(traj.snapshots[i]) for i in sel))


def trajectory_c0(traj) -> float:
    """c0 = K0/4 with K0 the smallest recorded coercivity estimate."""
    k0 = np.asarray(traj.column("k0"), dtype=float)
    k0 = k0[np.isfinite(k0)]
    if k0.size == 0 or np.min(k0) <= 0:
        raise DeGiorgiError("trajectory has no positive coercivity estimate; supply c0")
    return float(np.min(k0)) / 4.0


def sup_moment(traj, s: float, T: float) -> float:
    times = np.asarray(traj.times)
    return float(max(moment(traj.spec, f, s) for t, f in zip(times, traj.snapshots) if t <= T + 1e-12))


@dataclass
class DeGiorgiTrace:
    config: DeGiorgiConfig
    K: float
    levels: np.ndarray
    times: np.ndarray
    E: np.ndarray
    Q: float
    target: np.ndarray
    K_bound: KBound
    sup_f: float
    c0: float
    y_s: float
    K_bisect: float
    C_hat: Optional[float] = None
    violations: List[int] = field(default_factory=list)

    @property
    def decay_ok(self) -> bool:
        """E_n <= E_0 Q^-n for every n, allowing one flagged miss at n = n_max."""
        bad = [n for n in self.violations if n != self.config.n_max]
        return not bad

    @property
    def flagged(self) -> List[int]:
        return [n for n in self.violations if n == self.config.n_max]

    @property
    def bound_holds(self) -> bool:
        return self.sup_f <= self.K_bound.K * (1 + 1e-12)

    def rows(self):
        return [(n, float(l), float(t), float(e), float(q)) for n, (l, t, e, q) in
                enumerate(zip(self.levels, self.times, self.E, self.target))]


def bisect_K(prof: _Profiles, cfg: DeGiorgiConfig, c0: float, E0: float, hi: float, rel: float = 1e-6) -> float:
    """Smallest K (to relative ``rel``) with E_{n_max} < 1e-12 E_0."""
    levels_t = ladders(1.0, cfg.t_star, cfg.n_max)[1]
    t_last = float(levels_t[-1])

    def vanishes(K):
        lvl = K * (1.0 - 2.0 ** -cfg.n_max)
        return prof.energy(lvl, t_last, cfg.T, c0) < 1e-12 * E0

    lo = 0.0
    while not vanishes(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if vanishes(mid):
            hi = mid
        else:
            lo = mid
    return hi


def iterate(traj, cfg: DeGiorgiConfig, mode: str = "property") -> DeGiorgiTrace:
    if mode not in ("property", "ledger"):
        raise DeGiorgiError(f"unknown mode {mode!r}")
    times = np.asarray(traj.times, dtype=float)
    if times[0] > 0.5 * cfg.t_star + 1e-12 or times[-1] < cfg.T - 1e-12:
        raise DeGiorgiError(f"trajectory [{times[0]}, {times[-1]}] does not cover [{cfg.t_star / 2}, {cfg.T}]")
    _, tl = ladders(1.0, cfg.t_star, cfg.n_max)
    check_cadence(times, float(tl[-1]), cfg.T)
    c0 = cfg.c0 if cfg.c0 is not None else trajectory_c0(traj)
    d, g, s, par = traj.spec.d, cfg.gamma, cfg.s, cfg.branch_parameter
    if d != cfg.d:
        raise DeGiorgiError(f"config is for d={cfg.d}, trajectory has d={d}")
    prof = _Profiles(traj)
    E0 = prof.energy(0.0, 0.5 * cfg.t_star, cfg.T, c0)
    sup_f = measured_sup(traj, cfg.t_star, cfg.T)
    y_s = sup_moment(traj, s, cfg.T)
    Q = compute_Q(d, g, s, par)
    K_bis = bisect_K(prof, cfg, c0, E0, hi=max(sup_f, 1e-300))
    C_hat = None
    if mode == "ledger":
        # the constant must hold on the ladder of the cap it produces: iterate to a fixed point
        C_hat, K_try = 0.0, sup_f
        for _ in range(20):
            C_new = calibrate_C(ladder_energies(prof, K_try, cfg, c0), K_try, cfg.t_star, y_s, d, g, s, par)
            if C_new <= C_hat * (1 + 1e-9) and C_hat > 0:
                break
            C_hat = max(C_hat, C_new)
            kb = compute_K(cfg.t_star, E0, y_s, d, g, s, par, K_constants_from_C(C_hat, d, g, s, par, Q))
            K_try = kb.K
        kb = compute_K(cfg.t_star, E0, y_s, d, g, s, par, K_constants_from_C(C_hat, d, g, s, par, Q))
        K = kb.K if cfg.K is None else cfg.K
    else:
        kb = compute_K(cfg.t_star, E0, y_s, d, g, s, par, cfg.constants)
        K = cfg.K if cfg.K is not None else K_bis
    levels, ltimes = ladders(K, cfg.t_star, cfg.n_max)
    E = ladder_energies(prof, K, cfg, c0)
    target = E0 * Q ** -np.arange(cfg.n_max + 1, dtype=float)
    tol = 1e-12 * max(E0, 1e-300)
    violations = [n for n in range(cfg.n_max + 1) if E[n] > target[n] + tol]
    return DeGiorgiTrace(cfg, K, levels, ltimes, E, Q, target, kb, sup_f, c0, y_s, K_bis, C_hat, violations)


@dataclass(frozen=True)
class ScalingFit:
    t_stars: Tuple[float, ...]
    K: Tuple[float, ...]
    slope: float
    intercept: float
    target: float

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.target) / abs(self.target)


def t_star_scaling(traj, base: DeGiorgiConfig, t_stars=(0.1, 0.2, 0.4, 0.8)) -> ScalingFit:
    """Power-law fit of the bisected cap against t_star."""
    Ks = []
    for ts in t_stars:
        cfg = DeGiorgiConfig(**{**base.__dict__, "t_star": ts, "K": None})
        Ks.append(iterate(traj, cfg, "property").K_bisect)
    lx, ly = np.log(t_stars), np.log(Ks)
    slope, icpt = np.polyfit(lx, ly, 1)
    return ScalingFit(tuple(t_stars), tuple(Ks), float(slope), float(icpt), t_star_exponent(base.d, base.gamma, base.s))
