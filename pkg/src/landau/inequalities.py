"""Numerical checks of the functional inequalities behind the L^p and L^inf estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermeval

from .coefficients import ball_average_power, c_kernel, convolve, padded_offsets
from .functionals import dirichlet, level_truncate, positive_entropy, psi_moment
from .grid import GridSpec, check_scalar
from .lorentz import lp_norm


class InequalityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# direct double sums


def coarsen(spec: GridSpec, f: np.ndarray, n_target: int):
    """Block-average f onto a grid with n_target points per axis (same box)."""
    if spec.n <= n_target:
        return spec, np.asarray(f, dtype=float)
    if spec.n % n_target:
        raise InequalityError(f"cannot coarsen n={spec.n} to n={n_target}")
    r = spec.n // n_target
    shape = []
    for _ in range(spec.d):
        shape += [n_target, r]
    blocks = np.asarray(f, dtype=float).reshape(shape)
    out = blocks.mean(axis=tuple(range(1, 2 * spec.d, 2)))
    return GridSpec(spec.d, n_target, spec.half_width), out


def pair_integral(
    spec: GridSpec,
    left: np.ndarray,
    right: np.ndarray,
    weight: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    chunk: int = 256,
) -> float:
    """sum_{v,w} left(v) W(v, w) right(w) h^2d by explicit summation over pairs.

    ``weight(V, Wc, r)`` receives the chunk of v-coordinates (m, d), all
    w-coordinates (N, d) and the distances r (m, N); r == 0 marks the singular cell.
    """
    pts = spec.coords.reshape(spec.d, -1).T
    lv = np.asarray(left, dtype=float).ravel()
    rw = np.asarray(right, dtype=float).ravel()
    keep_v = np.nonzero(lv)[0]
    keep_w = np.nonzero(rw)[0]
    if keep_v.size == 0 or keep_w.size == 0:
        return 0.0
    W = pts[keep_w]
    rr = rw[keep_w]
    total = 0.0
    for start in range(0, keep_v.size, chunk):
        idx = keep_v[start:start + chunk]
        V = pts[idx]
        diff = V[:, None, :] - W[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=2))
        total += float(lv[idx] @ (weight(V, W, r) @ rr))
    return total * spec.cell_volume ** 2


def power_weight(spec: GridSpec, lam: float, region: Optional[Callable] = None):
    """|v - w|^lam with the ball-averaged singular cell, optionally restricted to a region."""
    origin_value = ball_average_power(spec, lam)
    tol = 0.25 * spec.spacing

    def weight(V, W, r):
        out = np.where(r > tol, np.maximum(r, tol) ** lam, origin_value)
        if region is not None:
            out = out * region(V, W, r)
        return out

    return weight


# ---------------------------------------------------------------------------
# epsilon-Poincare inequality


def poincare_sides(spec: GridSpec, f, phi, gamma: float, lambda_choice: Optional[float] = None, c_field=None):
    """(lhs, d_term, l2_term) = (-int phi^2 c_lam[f], int |grad(<v>^(g/2) phi)|^2, int phi^2 <v>^g)."""
    lam = gamma if lambda_choice is None else lambda_choice
    if lam + spec.d <= 0:
        raise InequalityError(f"lambda + d must be positive, got {lam + spec.d}")
    phi = check_scalar(spec, phi)
    if c_field is None:
        c_field = c_lambda_field(spec, f, gamma, lam)
    w = spec.cell_volume
    phi2 = phi * phi
    lhs = -float(np.sum(phi2 * c_field) * w)
    d_term = dirichlet(spec, spec.bracket(0.5 * gamma) * phi)
    l2_term = float(np.sum(phi2 * spec.bracket(gamma)) * w)
    return lhs, d_term, l2_term


def c_lambda_field(spec: GridSpec, f, gamma: float, lam: float) -> np.ndarray:
    """c_lam[f] by FFT with only the one kernel table that is needed."""
    if not (-2.0 <= gamma < 0.0):
        raise InequalityError(f"gamma must lie in [-2, 0), got {gamma}")
    if abs(lam - gamma) > 1e-15 and abs(lam - (gamma + 1)) > 1e-15:
        raise InequalityError("lambda_choice must be gamma or gamma + 1")
    return convolve(spec, c_kernel(spec, lam, padded_offsets(spec)), check_scalar(spec, f))


def poincare_direct_lhs(spec: GridSpec, f, phi, lam: float) -> float:
    """(d-1)(lam+d) sum_{v,w} |v-w|^lam phi^2(v) f(w) by explicit pairs."""
    k = (spec.d - 1) * (lam + spec.d)
    return k * pair_integral(spec, np.asarray(phi) ** 2, f, power_weight(spec, lam))


def splitting_terms(spec: GridSpec, f, phi, gamma: float) -> Dict[str, float]:
    """I[phi], I_1, I_2 of the near/far splitting and the bound 2^-g (d-1)(g+d)(I_1+I_2)."""
    phi2 = np.asarray(phi) ** 2
    k = (spec.d - 1) * (gamma + spec.d)
    I = k * pair_integral(spec, phi2, f, power_weight(spec, gamma))

    def far(V, W, r):
        bracket = np.sqrt(1 + np.sum(V * V, axis=1))[:, None]
        return (r >= 0.5 * bracket).astype(float)

    def near_weight(V, W, r):
        bracket_v = np.sqrt(1 + np.sum(V * V, axis=1))[:, None]
        bracket_w = np.sqrt(1 + np.sum(W * W, axis=1))[None, :]
        base = power_weight(spec, gamma)(V, W, r)
        return base * (r < 0.5 * bracket_v) * bracket_v ** gamma * bracket_w ** (-gamma)

    weighted = phi2 * spec.bracket(gamma)
    I1 = pair_integral(spec, weighted, f, lambda V, W, r: far(V, W, r))
    I2 = pair_integral(spec, phi2, f, near_weight)
    return {"I": I, "I1": I1, "I2": I2, "bound": 2.0 ** (-gamma) * k * (I1 + I2)}


def _gaussian(spec: GridSpec, center, width) -> np.ndarray:
    c = np.asarray(center, dtype=float).reshape((spec.d,) + (1,) * spec.d)
    return np.exp(-0.5 * np.sum((spec.coords - c) ** 2, axis=0) / width ** 2)


@dataclass(frozen=True)
class TestFamily:
    """Seeded family of test functions phi.

    Members: lattice Gaussians (centres on {-c, 0, c}^d, three widths),
    Hermite-modulated Gaussians of total degree <= 2, ``n_random`` band-limited
    random fields under a Gaussian envelope and, optionally, Gaussians of
    log-spaced widths centred at ``focus`` (for resolving concentrated data).
    """

    seed: int = 0
    lattice_step: float = 2.0
    widths: Tuple[float, ...] = (0.5, 1.0, 2.0)
    n_random: int = 64
    focus: Optional[Tuple[float, ...]] = None
    focus_widths: Tuple[float, ...] = ()

    def describe(self) -> str:
        parts = [
            f"lattice_gaussians(step={self.lattice_step}, widths={list(self.widths)})",
            "hermite_gaussians(degree<=2)",
            f"band_limited_random(n={self.n_random}, seed={self.seed})",
        ]
        if self.focus is not None and self.focus_widths:
            parts.append(f"focused_gaussians(center={list(self.focus)}, {len(self.focus_widths)} widths "
                         f"{min(self.focus_widths):.3g}..{max(self.focus_widths):.3g})")
        return "; ".join(parts)

    def resolved_ids(self, spec: GridSpec) -> List[str]:
        """Focused members that are neither at the grid floor, at the top of the ladder, nor box-truncated."""
        if self.focus is None or len(self.focus_widths) < 3:
            return []
        ws = sorted(self.focus_widths)[1:-1]
        return [f"focus(w={w:.4g})" for w in ws if w <= spec.half_width / 4]

    def members(self, spec: GridSpec) -> Iterator[Tuple[str, np.ndarray]]:
        d = spec.d
        grid = np.array(np.meshgrid(*([[-self.lattice_step, 0.0, self.lattice_step]] * d), indexing="ij")).reshape(d, -1).T
        for w in self.widths:
            for c in grid:
                yield f"gauss(c={tuple(float(x) for x in c)},w={w})", _gaussian(spec, c, w)
        env = _gaussian(spec, np.zeros(d), 1.0)
        for alpha in np.ndindex(*([3] * d)):
            if sum(alpha) > 2:
                continue
            poly = np.ones(spec.shape)
            for j, k in enumerate(alpha):
                coef = np.zeros(k + 1)
                coef[k] = 1.0
                poly = poly * hermeval(spec.coords[j], coef)
            yield f"hermite{alpha}", poly * env
        rng = np.random.default_rng(self.seed)
        kmax = 3
        ks = np.arange(-kmax, kmax + 1)
        scale = 2 * np.pi / spec.half_width
        waves = [np.exp(1j * scale * np.outer(ks, spec.axis)) for _ in range(d)]
        letters = "abc"[:d]
        expr = letters.upper() + "," + ",".join(f"{L.upper()}{L}" for L in letters) + "->" + letters
        k2 = sum(np.meshgrid(*([ks ** 2] * d), indexing="ij"))
        for m in range(self.n_random):
            amp = rng.standard_normal(k2.shape) / (1.0 + k2)
            phase = rng.uniform(0, 2 * np.pi, k2.shape)
            field_ = np.einsum(expr, amp * np.exp(1j * phase), *waves).real
            width = 1.0 + 2.0 * rng.random()
            yield f"random{m}", field_ * _gaussian(spec, np.zeros(d), width)
        if self.focus is not None:
            for w in self.focus_widths:
                yield f"focus(w={w:.4g})", _gaussian(spec, self.focus, w)


@dataclass
class PoincareReport:
    gamma: float
    eps: np.ndarray
    C: np.ndarray
    argmax_id: List[str]
    slope: float
    intercept: float
    window: Tuple[float, float]
    target_slope: float
    family: str
    seed: int
    window_slopes: List[Tuple[float, float, float]] = field(default_factory=list)

    @property
    def decades(self) -> float:
        lo, hi = self.window
        return math.log10(hi / lo) if lo > 0 else float("nan")

    def rows(self):
        return [(float(e), float(c), a) for e, c, a in zip(self.eps, self.C, self.argmax_id)]


def poincare_table(spec: GridSpec, f, gamma: float, family: TestFamily, lambda_choice=None):
    """Per-member (ids, lhs, d_term, l2_term)."""
    lam = gamma if lambda_choice is None else lambda_choice
    c_field = c_lambda_field(spec, f, gamma, lam)
    ids, lhs, dt, l2 = [], [], [], []
    for name, phi in family.members(spec):
        a, b, c = poincare_sides(spec, f, phi, gamma, lam, c_field=c_field)
        ids.append(name)
        lhs.append(a)
        dt.append(b)
        l2.append(c)
    if not ids:
        raise InequalityError("empty test family")
    return ids, np.array(lhs), np.array(dt), np.array(l2)


def C_of_eps(eps, lhs, dt, l2):
    """C(eps) = max over members of (lhs - eps d_term) / l2_term, with the maximiser."""
    eps = np.asarray(eps, dtype=float)
    vals = (lhs[None, :] - eps[:, None] * dt[None, :]) / l2[None, :]
    arg = np.argmax(vals, axis=1)
    return vals[np.arange(eps.size), arg], arg


def log_slope(x, y):
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (m, b), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(m), float(b)


def estimate_C_of_eps(spec: GridSpec, f, gamma: float, eps_list, family: TestFamily, lambda_choice=None, table=None) -> PoincareReport:
    """Measured C(eps) over a test family and its log-log slope.

    The slope is fitted where the maximiser is a resolved member of the focused
    multiscale ladder: C(eps) is then set by the concentration of f, not by the
    grid floor or the box.  Without a focused ladder the fit falls back to the
    eps values with C(eps) > 2 C(eps_max) > 0.
    """
    eps = np.sort(np.asarray(eps_list, dtype=float))
    ids, lhs, dt, l2 = table if table is not None else poincare_table(spec, f, gamma, family, lambda_choice)
    C, arg = C_of_eps(eps, lhs, dt, l2)
    resolved = set(family.resolved_ids(spec))
    if resolved:
        sel = np.array([ids[i] in resolved for i in arg]) & (C > 0)
    else:
        sel = (C > 2 * C[-1]) & (C[-1] > 0)
    if np.count_nonzero(sel) >= 2:
        slope, icpt = log_slope(eps[sel], C[sel])
        window = (float(eps[sel].min()), float(eps[sel].max()))
    else:
        slope, icpt, window = float("nan"), float("nan"), (float("nan"), float("nan"))
    return PoincareReport(
        gamma=gamma,
        eps=eps,
        C=C,
        argmax_id=[ids[i] for i in arg],
        slope=slope,
        intercept=icpt,
        window=window,
        target_slope=gamma / (2 + gamma) if gamma > -2 else float("-inf"),
        family=family.describe(),
        seed=family.seed,
        window_slopes=sliding_slopes(eps, C),
    )


def sliding_slopes(eps, C, per_decade: float = 1.0):
    """Local log-log slopes over sliding windows one decade wide."""
    eps = np.asarray(eps)
    C = np.asarray(C)
    out = []
    le = np.log10(eps)
    for i in range(eps.size):
        j = np.searchsorted(le, le[i] + per_decade + 1e-9, side="right")
        if j - i < 3 or le[j - 1] - le[i] < per_decade - 1e-9:
            continue
        sl = slice(i, j)
        if np.any(C[sl] <= 0):
            continue
        m, _ = log_slope(eps[sl], C[sl])
        out.append((float(eps[i]), float(eps[j - 1]), m))
    return out


# ---------------------------------------------------------------------------
# critical case gamma = -2


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass
class TruncationSplit:
    R1: float
    F: np.ndarray
    F_plus: np.ndarray
    F_minus: np.ndarray

    @property
    def F_plus_L1(self) -> float:
        return float(np.sum(self.F_plus))


def truncation_split(spec: GridSpec, f, R1: float, gamma: float = -2.0) -> TruncationSplit:
    F = spec.bracket(-gamma) * check_scalar(spec, f)
    plus = np.where(F > R1, F, 0.0)
    return TruncationSplit(R1, F, plus, F - plus)


@dataclass
class CriticalSplit:
    J1: float
    J2_minus: float
    J2_plus: float
    J1_bound: float
    J2_minus_bound: float
    J2_minus_bound_discrete: float
    F_plus_L1: float
    grad_psi_sq: float
    ball_constant: float


def critical_split(spec: GridSpec, f, phi, R1: float, n_coarse: int = 16) -> CriticalSplit:
    """J = int |v-w|^-2 F(w) psi^2(v) with F = <v>^2 f, psi = phi/<v>, split at |v-w| = 1 and F = R1."""
    cs, fc = coarsen(spec, f, n_coarse)
    _, pc = coarsen(spec, phi, n_coarse)
    psi = pc / cs.bracket(1.0)
    split = truncation_split(cs, fc, R1)
    far = power_weight(cs, -2.0, lambda V, W, r: (r > 1.0).astype(float))
    near = power_weight(cs, -2.0, lambda V, W, r: (r <= 1.0).astype(float))
    psi2 = psi * psi
    J1 = pair_integral(cs, psi2, split.F, far)
    Jm = pair_integral(cs, psi2, split.F_minus, near)
    Jp = pair_integral(cs, psi2, split.F_plus, near)
    w = cs.cell_volume
    psi_l2 = float(np.sum(psi2) * w)
    F_l1 = float(np.sum(split.F) * w)
    ball = sphere_area(cs.d) / (cs.d - 2)
    # discrete counterpart of int_{|z|<=1} |z|^-2 dz on this grid
    k = np.arange(-cs.n + 1, cs.n) * cs.spacing
    Z = np.meshgrid(*([k] * cs.d), indexing="ij")
    r = np.sqrt(sum(z * z for z in Z))
    disc = np.where(r > 0, np.where(r > 0, r, 1.0) ** -2.0, ball_average_power(cs, -2.0))
    ball_disc = float(np.sum(disc[r <= 1.0]) * w)
    return CriticalSplit(
        J1=J1,
        J2_minus=Jm,
        J2_plus=Jp,
        J1_bound=F_l1 * psi_l2,
        J2_minus_bound=ball * R1 * psi_l2,
        J2_minus_bound_discrete=ball_disc * R1 * psi_l2,
        F_plus_L1=float(np.sum(split.F_plus) * w),
        grad_psi_sq=dirichlet(cs, psi),
        ball_constant=ball,
    )


@dataclass
class TailBound:
    lhs: float
    rhs: float
    terms: Tuple[float, float, float, float]
    entropy_used: float
    rhs_signed_entropy: float


def tail_bound_check(spec: GridSpec, f, R1: float, R2: float, s: float, threshold_branch: bool = False) -> TailBound:
    """||F^+_{R1}||_{L^1} against the four-term bound with Psi(r) = r^(s/2).

    The entropy term uses the positive part int f (log f)_+; with the signed
    entropy the bound is false whenever H(f) < 0 (e.g. a Maxwellian).
    ``threshold_branch`` selects the explicit-threshold branch, which needs R1 >= 4.
    """
    if s <= 2:
        raise InequalityError("need s > 2")
    if R1 <= 1 or R2 <= 0:
        raise InequalityError("need R1 > 1 and R2 > 0")
    if threshold_branch and R1 < 4:
        raise InequalityError(f"the threshold branch needs R1 >= 4, got {R1}")
    f = check_scalar(spec, f)
    w = spec.cell_volume
    lhs = float(np.sum(truncation_split(spec, f, R1).F_plus) * w)
    H_plus = positive_entropy(spec, f)
    f_pos = np.maximum(f, 0.0)
    H = float(np.sum(f_pos[f_pos > 0] * np.log(f_pos[f_pos > 0])) * w)
    energy = float(np.sum(f * spec.speed_squared) * w)
    m_psi = psi_moment(spec, f, s)
    t1 = 2 * (1 + R2) / math.log(R1) * H_plus
    t2 = energy / R2
    t3 = m_psi * R2 ** ((2 - s) / 2)
    t4 = m_psi * tail_sup(R1, s)
    rhs = t1 + t2 + t3 + t4
    signed = 2 * (1 + R2) / math.log(R1) * H + t2 + t3 + t4
    return TailBound(lhs, rhs, (t1, t2, t3, t4), H_plus, signed)


def tail_sup(R1: float, s: float) -> float:
    """sup_{r >= sqrt(R1) - 1} (1 + r) / r^(s/2); the map is decreasing for s > 2."""
    r = math.sqrt(R1) - 1
    if r <= 0:
        return math.inf
    return (1 + r) / r ** (s / 2)


def psi_ratio_sup(R2: float, s: float) -> float:
    """sup_{r >= R2} r / Psi(r) = R2^((2-s)/2)."""
    return R2 ** ((2 - s) / 2)


@dataclass
class Thresholds:
    R1: float
    R2: float
    scaled_rhs: float
    eps: float
    C_tilde: float

    @property
    def ok(self) -> bool:
        return self.scaled_rhs <= self.eps * (1 + 1e-12)


def explicit_thresholds(spec: GridSpec, f, s: float, eps: float, C_tilde: float) -> Thresholds:
    """Explicit (R1, R2) making C_tilde * (four-term bound) <= eps."""
    if s <= 2 or eps <= 0 or C_tilde <= 0:
        raise InequalityError("need s > 2, eps > 0, C_tilde > 0")
    f = check_scalar(spec, f)
    w = spec.cell_volume
    energy = float(np.sum(f * spec.speed_squared) * w)
    m_psi = psi_moment(spec, f, s)
    H_plus = positive_entropy(spec, f)
    e = 2.0 / (s - 2)
    R2 = max(4 * C_tilde / eps * energy, (4 * C_tilde / eps * m_psi) ** e)
    R1 = max(4.0, math.exp(min(700.0, 8 * C_tilde * (1 + R2) / eps * H_plus)), ((8 * C_tilde / eps * m_psi) ** e + 1) ** 2)
    tb = tail_bound_check(spec, f, R1, R2, s, threshold_branch=True)
    return Thresholds(R1, R2, C_tilde * tb.rhs, eps, C_tilde)


def empirical_tail_constant(spec: GridSpec, pairs: Iterable[Tuple[np.ndarray, np.ndarray]], R1: float, n_coarse: int = 16) -> float:
    """max over (f, phi) of J_2^+ / (||F^+||_{L^1} ||grad psi||^2)."""
    best = 0.0
    for f, phi in pairs:
        cs = critical_split(spec, f, phi, R1, n_coarse)
        den = cs.F_plus_L1 * cs.grad_psi_sq
        if den > 0:
            best = max(best, cs.J2_plus / den)
    return best


# ---------------------------------------------------------------------------
# HLS route (d = 3)

HLS_P = 9.0 / 4.0
HLS_R = 9.0 / 8.0


def hls_exponents_ok(p: float = HLS_P, r: float = HLS_R) -> bool:
    return abs(1 / p + 2 / 3 - (2 - 1 / r)) < 1e-14


@dataclass
class HLSCheck:
    R: float
    J_R: float
    norm_product: float
    ratio: float
    chained: float
    theta: float


def hls_singular_check(spec: GridSpec, f, phi, R: float, s: float = 4.0, C_hls: float = 1.0, n_coarse: int = 16) -> HLSCheck:
    """J_R = int_{|v-w|<=1} f 1_{f>R}(w) |v-w|^-2 phi^2(v) and its HLS-type bounds.

    ``norm_product`` is ||f 1_{f>R}||_{9/4} ||phi||_{9/4}^2, ``ratio`` the
    implied HLS constant, ``chained`` the bound after Lebesgue interpolation and
    the entropy estimate (times C_hls).
    """
    if spec.d != 3:
        raise InequalityError("the HLS route is implemented for d = 3 only")
    if R < 1:
        raise InequalityError("need R >= 1")
    cs, fc = coarsen(spec, f, n_coarse)
    _, pc = coarsen(spec, phi, n_coarse)
    big = np.where(fc > R, fc, 0.0)
    near = power_weight(cs, -2.0, lambda V, W, r: (r <= 1.0).astype(float))
    J = pair_integral(cs, pc * pc, big, near)
    prod = lp_norm(cs, big, HLS_P) * lp_norm(cs, pc, HLS_P) ** 2
    theta = 1 - 2 / s
    w = cs.cell_volume
    ms = float(np.sum(cs.bracket(s) * fc) * w)
    fpos = np.maximum(fc, 0)
    flogf = float(np.sum(np.abs(fpos[fpos > 0] * np.log(fpos[fpos > 0]))) * w)
    L6 = lp_norm(cs, fc / cs.bracket(1.0), 6.0)
    big_part = ms ** ((1 - theta) / 3) * (flogf / math.log(R)) ** (theta / 3) * L6 ** (2 / 3) if R > 1 else math.inf
    chained = C_hls * big_part * lp_norm(cs, pc, HLS_P) ** 2
    return HLSCheck(R, J, prod, J / prod if prod > 0 else 0.0, chained, theta)


# ---------------------------------------------------------------------------
# level-change inequalities


@dataclass
class LevelCheck:
    which: str
    lhs: float
    rhs: float
    implied_constant: float
    weight_s: Optional[float] = None


def flLq_weight(d: int, gamma: float, q: float) -> float:
    """s = -gamma d / (2d + 4 - q d)."""
    den = 2 * d + 4 - q * d
    if den <= 0:
        raise InequalityError(f"q={q} is at or beyond the endpoint (2d+4)/d")
    return -gamma * d / den


def level_inequality_check(spec: GridSpec, f, k: float, ell: float, which: str, gamma: float,
                           p: float = None, q: float = None, s: float = None) -> LevelCheck:
    """Both sides of a level-change inequality with the constant stripped.

    which: "flL2", "flLp" (needs p), "flLq" (needs q), "flLd" (needs s > 2; gamma = -2 weight).
    """
    if not (0 <= k < ell):
        raise InequalityError(f"need 0 <= k < ell, got k={k}, ell={ell}")
    d = spec.d
    f = check_scalar(spec, f)
    w = spec.cell_volume
    fl = level_truncate(f, ell)
    fk = level_truncate(f, k)
    gap = ell - k
    l2 = lambda g: float(np.sqrt(np.sum(g * g) * w))
    weight_s = None
    if which == "flL2":
        lhs = l2(spec.bracket(0.5 * gamma) * fl) ** 2
        rhs = gap ** (-4 / d) * dirichlet(spec, spec.bracket(0.5 * gamma) * fk) * l2(fk) ** (4 / d)
    elif which == "flLp":
        if p is None or not (1 <= p < d / (d - 2)):
            raise InequalityError(f"flLp needs p in [1, d/(d-2)), got {p}")
        lhs = lp_norm(spec, spec.bracket(gamma) * fl, p)
        rhs = (gap ** (-(2 / p - (d - 4) / d)) * dirichlet(spec, spec.bracket(0.5 * gamma) * fk)
               * l2(fk) ** (2 / p + (4 - 2 * d) / d))
    elif which == "flLq":
        if q is None or not ((2 * d + 2) / d < q < (2 * d + 4) / d):
            raise InequalityError(f"flLq needs q in ((2d+2)/d, (2d+4)/d), got {q}")
        weight_s = flLq_weight(d, gamma, q)
        ms = float(np.sum(spec.bracket(weight_s) * fk) * w)
        lhs = l2(fl) ** 2
        rhs = (gap ** (-(q - 2)) * ms ** ((2 * d + 4) / d - q) * l2(fk) ** (2 * (q - (2 * d + 2) / d))
               * dirichlet(spec, spec.bracket(0.5 * gamma) * fk))
    elif which == "flLd":
        if s is None or s <= 2:
            raise InequalityError("flLd needs s > 2")
        weight_s = s
        ms = float(np.sum(spec.bracket(s) * fk) * w)
        lhs = lp_norm(spec, fl, d / (d - 1)) ** 2
        rhs = (gap ** (-2 * (s - 1) / s) * ms ** (2 / s) * l2(fk) ** (2 * (s - 2) / s)
               * dirichlet(spec, spec.bracket(-1.0) * fk))
    else:
        raise InequalityError(f"unknown inequality {which!r}")
    return LevelCheck(which, lhs, rhs, lhs / rhs if rhs > 0 else 0.0, weight_s)


@dataclass
class LevelSurvey:
    which: str
    max_constant: float
    argmax: int
    constants: np.ndarray
    weight_s: Optional[float]


def smooth_field_family(spec: GridSpec, seed: int = 0, count: int = 16) -> Iterator[np.ndarray]:
    """Seeded sums of one to three Gaussians; defined in the continuum, so comparable across grids."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        f = np.zeros(spec.shape)
        for _ in range(int(rng.integers(1, 4))):
            c = rng.uniform(-0.4, 0.4, spec.d) * spec.half_width
            w = rng.uniform(0.6, 1.2) * spec.half_width / 4
            f += rng.uniform(0.5, 1.5) * _gaussian(spec, c, w)
        yield f


def level_survey(spec: GridSpec, which: str, gamma: float, seed: int = 0, count: int = 16,
                 levels=(0.2, 0.5), **exponents) -> LevelSurvey:
    """Largest implied constant of a level-change inequality over the seeded family.

    ``levels`` are (k, ell) as fractions of the analytic peak scale 1.
    """
    k, ell = levels
    vals, ws = [], None
    for f in smooth_field_family(spec, seed, count):
        chk = level_inequality_check(spec, f, k, ell, which, gamma, **exponents)
        vals.append(chk.implied_constant)
        ws = chk.weight_s
    vals = np.array(vals)
    i = int(np.argmax(vals))
    return LevelSurvey(which, float(vals[i]), i, vals, ws)
