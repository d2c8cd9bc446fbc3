"""Lorentz-space self-test: identities, inequalities and the Sobolev scale check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..grid import make_grid
from ..lorentz import (
    distribution,
    holder_lorentz_ratio,
    interpolation_ratio,
    lorentz_norm,
    lorentz_norm_distribution,
    lp_norm,
    rearrangement,
    sobolev_lorentz_ratio,
)


@dataclass(frozen=True)
class SelfTestRow:
    test: str
    lhs: float
    rhs: float
    ratio: float
    passed: bool


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _close(name, lhs, rhs, tol) -> SelfTestRow:
    err = _rel(lhs, rhs)
    return SelfTestRow(name, float(lhs), float(rhs), float(lhs / rhs) if rhs else float("nan"), bool(err <= tol))


def _bound(name, ratio) -> SelfTestRow:
    return SelfTestRow(name, float(ratio), 1.0, float(ratio), bool(ratio <= 1 + 1e-12))


def random_field(rng, spec, kind: int) -> np.ndarray:
    """Seeded fields with ties, heavy tails and smooth structure."""
    shape = spec.shape
    if kind == 0:
        return rng.standard_normal(shape)
    if kind == 1:
        return np.round(rng.random(shape) * 5) / 5
    if kind == 2:
        return rng.pareto(2.5, shape)
    w = 0.5 + rng.random()
    c = rng.uniform(-1, 1, spec.d).reshape((spec.d,) + (1,) * spec.d)
    return np.exp(-0.5 * np.sum((spec.coords - c) ** 2, axis=0) / w ** 2) * (1 + 0.1 * rng.standard_normal(shape))


def lorentz_selftest(seed: int = 0, fields: int = 200) -> List[SelfTestRow]:
    rng = np.random.default_rng(seed)
    spec = make_grid(3, 8, 2.0)
    rows: List[SelfTestRow] = []

    # equimeasurability: the rearrangement has the same distribution function, exactly
    for k in range(8):
        f = random_field(rng, spec, k % 4)
        d1 = distribution(spec, f)
        st = rearrangement(spec, f)
        vals = np.repeat(st.values, np.round(np.diff(st.breaks) / spec.cell_volume).astype(int))
        d2 = distribution(spec.cell_volume, vals)
        same = np.array_equal(d1.breaks, d2.breaks) and np.array_equal(d1.values, d2.values)
        rows.append(SelfTestRow(f"equimeasurable[{k}]", float(d1.values.sum()), float(d2.values.sum()), 1.0, bool(same)))

    # the t-side and s-side formulas of the quasi-norm
    for k in range(8):
        f = random_field(rng, spec, k % 4)
        for p, q in ((1.5, 1.0), (2.0, 3.0), (3.0, 2.0), (4.0, np.inf)):
            rows.append(_close(f"two_formulas[{k}](p={p},q={q})", lorentz_norm(spec, f, p, q),
                               lorentz_norm_distribution(spec, f, p, q), 1e-10))

    # indicator of measure m: (p/q)^(1/q) m^(1/p)
    for cells in (1, 7, 100):
        f = np.zeros(spec.shape)
        f.ravel()[:cells] = 1.0
        m = cells * spec.cell_volume
        for p, q in ((2.0, 1.0), (3.0, 2.0), (1.5, 4.0)):
            rows.append(_close(f"indicator(m={m:.4g},p={p},q={q})", lorentz_norm(spec, f, p, q),
                               (p / q) ** (1 / q) * m ** (1 / p), 1e-10))

    # L^{p,p} = L^p
    for k in range(8):
        f = random_field(rng, spec, k % 4)
        for p in (1.0, 2.0, 3.5):
            rows.append(_close(f"Lpp_equals_Lp[{k}](p={p})", lorentz_norm(spec, f, p, p), lp_norm(spec, f, p), 1e-12))

    hold = interp = 0.0
    for k in range(fields):
        f = random_field(rng, spec, k % 4)
        g = random_field(rng, spec, (k + 1) % 4)
        hold = max(hold, holder_lorentz_ratio(spec, f, g, 2.0, 2.0), holder_lorentz_ratio(spec, f, g, 3.0, 1.5))
        interp = max(interp, interpolation_ratio(spec, f, 3.0, 2.0, 2.0, 6.0))
    rows.append(_bound(f"holder_max_ratio({fields} fields)", hold))
    rows.append(_bound(f"interpolation_max_ratio({fields} fields)", interp))

    big = make_grid(3, 64, 8.0)
    widths = np.geomspace(0.8, 1.6, 5)
    r = np.array([sobolev_lorentz_ratio(big, np.exp(-0.5 * big.speed_squared / w ** 2), 2.0) for w in widths])
    for w, x in zip(widths, r):
        rows.append(_close(f"sobolev_lorentz(w={w:.3g})", x, r.mean(), 0.02))
    return rows


def write_selftest_csv(rows: List[SelfTestRow], path) -> None:
    from ..solver import format_float

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("test,lhs,rhs,ratio,pass\n")
        for r in rows:
            fh.write(f"{r.test.replace(',', ';')},{format_float(r.lhs)},{format_float(r.rhs)},{format_float(r.ratio)},{int(r.passed)}\n")
