"""Uniform cell-centred velocity grid, midpoint quadrature and difference calculus.

Fields are plain numpy arrays:

* scalar field: shape ``(n,) * d``
* vector field: shape ``(d,) + (n,) * d``
* matrix field: shape ``(d, d) + (n,) * d``

Values outside the cube ``[-L, L]^d`` are taken to be zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

SNAPSHOT_SCHEMA_VERSION = 1


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    d: int = 3
    n: int = 32
    half_width: float = 8.0

    def __post_init__(self):
        if self.d not in (2, 3):
            raise GridError(f"d must be 2 or 3, got {self.d}")
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise GridError(f"n must be a positive even integer, got {self.n}")
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise GridError(f"half_width must be positive, got {self.half_width}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    h = spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cells(self) -> int:
        return self.n ** self.d

    @cached_property
    def axis(self) -> np.ndarray:
        a = -self.half_width + (np.arange(self.n) + 0.5) * self.spacing
        a.setflags(write=False)
        return a

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (d, n, ..., n)."""
        c = np.stack(np.meshgrid(*([self.axis] * self.d), indexing="ij"))
        c.setflags(write=False)
        return c

    @cached_property
    def speed_squared(self) -> np.ndarray:
        r2 = np.sum(self.coords ** 2, axis=0)
        r2.setflags(write=False)
        return r2

    def bracket(self, s: float = 1.0) -> np.ndarray:
        """Japanese bracket <v>^s = (1 + |v|^2)^(s/2) on the nodes."""
        return (1.0 + self.speed_squared) ** (0.5 * s)

    def evaluate(self, func) -> np.ndarray:
        """Sample ``func(coords)`` on the nodes; coords has shape (d, n, ..., n)."""
        return np.asarray(func(self.coords), dtype=float)


def make_grid(d: int = 3, n: int = 32, half_width: float = 8.0) -> GridSpec:
    if n < 8:
        raise GridError(f"n must be at least 8, got {n}")
    return GridSpec(d, n, half_width)


def check_scalar(spec: GridSpec, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != spec.shape:
        raise GridError(f"field shape {f.shape} does not match grid {spec.shape}")
    if not np.all(np.isfinite(f)):
        raise GridError("field has non-finite entries")
    return f


def integrate(spec: GridSpec, f, s: float = 0.0) -> float:
    """Midpoint rule for the integral of f(v) <v>^s."""
    f = check_scalar(spec, f)
    if s == 0:
        return float(np.sum(f) * spec.cell_volume)
    return float(np.sum(f * spec.bracket(s)) * spec.cell_volume)


def inner(spec: GridSpec, f, g) -> float:
    """Midpoint-rule L2 pairing of two fields of equal shape."""
    return float(np.sum(np.asarray(f) * np.asarray(g)) * spec.cell_volume)


def _shift(f: np.ndarray, axis: int, k: int) -> np.ndarray:
    """out[i] = f[i + k] along axis, zero outside."""
    out = np.zeros_like(f)
    n = f.shape[axis]
    src = [slice(None)] * f.ndim
    dst = [slice(None)] * f.ndim
    if k > 0:
        src[axis] = slice(k, n)
        dst[axis] = slice(0, n - k)
    else:
        src[axis] = slice(0, n + k)
        dst[axis] = slice(-k, n)
    out[tuple(dst)] = f[tuple(src)]
    return out


def centered_difference(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    n = f.shape[axis]
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    mid = [slice(None)] * f.ndim
    # interior: (f[i+1] - f[i-1]) / 2h ; edges use the zero extension
    hi[axis] = slice(2, n)
    lo[axis] = slice(0, n - 2)
    mid[axis] = slice(1, n - 1)
    out[tuple(mid)] = f[tuple(hi)] - f[tuple(lo)]
    first = [slice(None)] * f.ndim
    last = [slice(None)] * f.ndim
    first[axis] = 0
    last[axis] = n - 1
    second = list(first)
    second[axis] = 1
    before_last = list(last)
    before_last[axis] = n - 2
    out[tuple(first)] = f[tuple(second)]
    out[tuple(last)] = -f[tuple(before_last)]
    out *= 1.0 / (2.0 * h)
    return out


def gradient(spec: GridSpec, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return np.stack([centered_difference(f, j, spec.spacing) for j in range(spec.d)])


def divergence(spec: GridSpec, G) -> np.ndarray:
    """Negative adjoint of ``gradient`` under the midpoint pairing."""
    G = np.asarray(G, dtype=float)
    out = centered_difference(G[0], 0, spec.spacing)
    for j in range(1, spec.d):
        out += centered_difference(G[j], j, spec.spacing)
    return out


def boundary_mask(spec: GridSpec, width: int = 1) -> np.ndarray:
    """True on cells within ``width`` cells of the cube boundary."""
    idx = np.arange(spec.n)
    edge = (idx < width) | (idx >= spec.n - width)
    mask = np.zeros(spec.shape, dtype=bool)
    for j in range(spec.d):
        shape = [1] * spec.d
        shape[j] = spec.n
        mask |= edge.reshape(shape)
    return mask


def write_snapshot(path, spec: GridSpec, values, time: float = 0.0, **extra) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    header = {
        "d": spec.d,
        "n": spec.n,
        "half_width": spec.half_width,
        "time": float(time),
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
    }
    lead = values.shape[: values.ndim - spec.d]
    if lead:
        header["components"] = list(lead)
    header.update(extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(values.tobytes(order="C"))


def read_snapshot(path):
    """Return (spec, values, header)."""
    raw = Path(path).read_bytes()
    cut = raw.index(b"\n")
    header = json.loads(raw[:cut].decode("utf-8"))
    if header.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
        raise GridError(f"unsupported snapshot schema {header.get('schema_version')}")
    spec = GridSpec(header["d"], header["n"], header["half_width"])
    shape = tuple(header.get("components", [])) + spec.shape
    values = np.frombuffer(raw[cut + 1:], dtype="<f8")
    if values.size != int(np.prod(shape)):
        raise GridError("snapshot payload size does not match header")
    return spec, values.reshape(shape).astype(float), header
