"""Approximations to the identity on the torus: Poisson, heat, box, generic.

A kernel carries a scaling exponent m, with t_B = r_B**m, and a decay order
M used in admissibility checks. The spectral backend multiplies Fourier
coefficients by the symbol. The direct backend circularly convolves with the
space-side kernel, sampled from closed forms and periodized.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma as gamma_fn
from typing import Callable

import numpy as np

from .grid import (Grid, GridFunction, ball_flat_indices, ball_indicator_kernel, ball_point_count,
                   inverse_rfft)

KINDS = ("poisson", "heat", "box", "generic")


@dataclass(frozen=True)
class KernelOp:
    kind: str
    m: float
    decay_order: float
    backend: str = "spectral"
    profile: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.m > 0:
            raise ValueError("m must be positive")
        if self.backend not in ("spectral", "direct"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.kind == "generic" and self.profile is None:
            raise ValueError("generic kernels need a profile")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def with_backend(self, backend: str) -> "KernelOp":
        return KernelOp(self.kind, self.m, self.decay_order, backend, self.profile, self.name)

    @property
    def semigroup(self) -> bool:
        return self.kind in ("poisson", "heat")


def poisson(dim: int = 1, backend: str = "spectral") -> KernelOp:
    return KernelOp("poisson", 1.0, dim + 1 - 1e-3, backend)


def heat(backend: str = "spectral") -> KernelOp:
    return KernelOp("heat", 2.0, 40.0, backend)


def box(m: float = 1.0, backend: str = "spectral") -> KernelOp:
    return KernelOp("box", m, np.inf, backend, name="box" if m == 1 else f"box(m={m:g})")


def generic(profile: Callable[[np.ndarray], np.ndarray], m: float, decay_order: float,
            name: str = "generic") -> KernelOp:
    """a_t(x, y) proportional to profile(|x - y|**m / t), normalized to unit discrete mass."""
    return KernelOp("generic", m, decay_order, "spectral", profile, name)


# space-side kernels --------------------------------------------------------


def poisson_constant(n: int) -> float:
    return gamma_fn((n + 1) / 2) / np.pi ** ((n + 1) / 2)


def poisson_free(r: np.ndarray, t: float, n: int) -> np.ndarray:
    """Poisson kernel on R^n: c_n t / (t^2 + r^2)^((n+1)/2)."""
    return poisson_constant(n) * t / (t * t + r * r) ** ((n + 1) / 2)


def heat_free(r: np.ndarray, t: float, n: int) -> np.ndarray:
    return (4 * np.pi * t) ** (-n / 2) * np.exp(-r * r / (4 * t))


def _axis_offsets(grid: Grid) -> np.ndarray:
    """Signed displacement of each index from index 0, in [-L/2, L/2)."""
    n = grid.points_per_side
    k = np.arange(n)
    k = np.where(k >= n // 2, k - n, k)
    return k * grid.spacing


def _image_sum(grid: Grid, radial, t: float, images: int) -> np.ndarray:
    L = grid.side_length
    ax = _axis_offsets(grid)
    shifts = np.arange(-images, images + 1) * L
    if grid.dim == 1:
        x = ax[:, None] + shifts[None, :]
        return radial(np.abs(x), t, 1).sum(axis=1)
    out = np.zeros(grid.shape)
    for a in shifts:
        for b in shifts:
            x = ax[:, None] + a
            y = ax[None, :] + b
            out += radial(np.hypot(x, y), t, 2)
    return out


def poisson_periodic_1d(grid: Grid, t: float) -> np.ndarray:
    """Closed-form image sum of the 1D Poisson kernel on a circle of length L."""
    L = grid.side_length
    x = _axis_offsets(grid)
    a = 2 * np.pi * t / L
    # sinh(a)/(cosh(a)-cos(b)) rewritten with exponentials for stability at large a
    b = 2 * np.pi * x / L
    e = np.exp(-a)
    return (1 - e * e) / (1 - 2 * e * np.cos(b) + e * e) / L


@lru_cache(maxsize=128)
def space_kernel(op: KernelOp, grid: Grid, t: float) -> np.ndarray:
    """Sampled periodic kernel a_t(x, 0), origin at index 0 (read-only)."""
    if not t > 0:
        raise ValueError("t must be positive")
    n = grid.dim
    if op.kind == "poisson":
        if n == 1:
            k = poisson_periodic_1d(grid, t)
        else:
            images = int(np.ceil(8 * t / grid.side_length)) + 4
            k = _image_sum(grid, poisson_free, t, images)
            # the truncated image lattice and point sampling below t ~ h both lose mass
            k = k / (k.sum() * grid.cell_measure)
    elif op.kind == "heat":
        images = int(np.ceil(6 * np.sqrt(t) / grid.side_length)) + 2
        k = _image_sum(grid, heat_free, t, images)
    elif op.kind == "box":
        r = t ** (1.0 / op.m)
        k = ball_indicator_kernel(grid, r) / (ball_point_count(grid, r) * grid.cell_measure)
    else:
        dist = np.sqrt(sum(o ** 2 for o in np.meshgrid(*([_axis_offsets(grid)] * n), indexing="ij")))
        k = np.asarray(op.profile(dist ** op.m / t), dtype=float)
        if np.any(k < 0):
            raise ValueError("generic profile must be nonnegative")
        k = k / (k.sum() * grid.cell_measure)
    k = np.array(k, dtype=float).reshape(grid.shape)
    k.setflags(write=False)
    return k


@lru_cache(maxsize=128)
def symbol(op: KernelOp, grid: Grid, t: float) -> np.ndarray:
    """Multiplier on the rfft frequency lattice (real, read-only)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if op.kind in ("poisson", "heat"):
        k = 2 * np.pi * np.fft.fftfreq(grid.points_per_side, d=grid.spacing)
        kr = 2 * np.pi * np.fft.rfftfreq(grid.points_per_side, d=grid.spacing)
        axes = [k] * (grid.dim - 1) + [kr]
        xi = np.sqrt(sum(a ** 2 for a in np.meshgrid(*axes, indexing="ij")))
        s = np.exp(-t * xi) if op.kind == "poisson" else np.exp(-t * xi * xi)
    else:
        s = np.fft.rfftn(space_kernel(op, grid, t)).real * grid.cell_measure
    s = np.array(s)
    s.setflags(write=False)
    return s


def _circular(grid: Grid, values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    spec = np.fft.rfftn(values) * np.fft.rfftn(kernel)
    return inverse_rfft(grid, spec) * grid.cell_measure


def apply_array(op: KernelOp, grid: Grid, values: np.ndarray, t: float) -> np.ndarray:
    if not t > 0:
        raise ValueError("t must be positive")
    values = np.asarray(values, dtype=float).reshape(grid.shape)
    if op.backend == "spectral":
        return inverse_rfft(grid, np.fft.rfftn(values) * symbol(op, grid, t))
    return _circular(grid, values, space_kernel(op, grid, t))


def apply_kernel(op: KernelOp, f: GridFunction, t: float) -> GridFunction:
    """A_t f = sum_y a_t(x, y) f(y) h^n on the torus."""
    return GridFunction(f.grid, apply_array(op, f.grid, f.values, t))


def direct_sum(op: KernelOp, f: GridFunction, t: float) -> np.ndarray:
    """Naive O(size^2) periodic sum with the sampled kernel; small grids only."""
    grid = f.grid
    k = space_kernel(op, grid, t).ravel()
    n = grid.points_per_side
    idx = np.arange(grid.size)
    if grid.dim == 1:
        diff = (idx[:, None] - idx[None, :]) % n
    else:
        i1, i2 = np.divmod(idx, n)
        diff = ((i1[:, None] - i1[None, :]) % n) * n + (i2[:, None] - i2[None, :]) % n
    return (k[diff] @ f.values.ravel() * grid.cell_measure).reshape(grid.shape)


# checks ----------------------------------------------------------------------


@dataclass(frozen=True)
class SemigroupCheck:
    t: float
    s: float
    composition_error: float
    mass_error: float

    def ok(self, tol: float = 1e-6) -> bool:
        return self.composition_error <= tol and self.mass_error <= tol


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    den = np.sqrt(np.sum(b * b))
    num = np.sqrt(np.sum((a - b) ** 2))
    return float(num / den) if den > 0 else float(num)


def semigroup_check(op: KernelOp, f: GridFunction, t: float, s: float) -> SemigroupCheck:
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    grid = f.grid
    ts = apply_array(op, grid, apply_array(op, grid, f.values, s), t)
    st = apply_array(op, grid, apply_array(op, grid, f.values, t), s)
    both = apply_array(op, grid, f.values, t + s)
    err = max(_rel_l2(ts, both), _rel_l2(st, both))
    mass = 0.0
    for tau in (t, s, t + s):
        ones = apply_array(op, grid, np.ones(grid.shape), tau)
        mass = max(mass, float(abs(ones.mean() - 1.0)))
    return SemigroupCheck(float(t), float(s), err, mass)


def lower_bound_check(op: KernelOp, grid: Grid, t: float, sample_points) -> float:
    """min over samples x and y in B(x, t**(1/m)) of a_t(x, y) * mu(B(x, t**(1/m)))."""
    r = t ** (1.0 / op.m)
    k = space_kernel(op, grid, t).ravel()
    count = ball_point_count(grid, r)
    if count == 0:
        raise ValueError("ball B(x, t^(1/m)) contains no grid points")
    mu = count * grid.cell_measure
    pts = list(sample_points)
    if not pts:
        raise ValueError("no sample points")
    offs = ball_flat_indices(grid, np.zeros((1, grid.dim), dtype=np.int64), r)[0]
    best = np.inf
    for x in pts:
        grid._check_index(x)
        # a_t(x, y) = k(y - x), and y - x ranges over the ball offsets
        best = min(best, float(k[offs].min() * mu))
    return best


def _log_profile(op: KernelOp, dim: int, r: np.ndarray) -> np.ndarray:
    """log g(r**m) for the kernel's normalized radial profile."""
    s = r ** op.m
    if op.kind == "poisson":
        return -(dim + 1) / 2 * np.log1p(s * s)
    if op.kind == "heat":
        return -s / 4
    if op.kind == "box":
        return np.where(s < 1, 0.0, -np.inf)
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(op.profile(s), dtype=float))


def decay_boundary(op: KernelOp, dim: int) -> float | None:
    if op.kind == "poisson":
        return float(dim + 1)
    if op.kind in ("heat", "box"):
        return np.inf
    return None


def decay_admissibility(op: KernelOp, M_required: float, dim: int = 1,
                        r_max: float = 1e8, samples: int = 801) -> tuple[bool, dict]:
    """Check that r**M g(r**m) decays toward the far end of a log-spaced r grid.

    Passes when the far half of the samples is nonincreasing and ends strictly
    below the maximum over the grid (or at exactly zero).
    """
    r = np.logspace(0, np.log10(r_max), samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        logv = M_required * np.log(r) + _log_profile(op, dim, r)
    tail = logv[samples // 2:]
    finite_tail = tail[np.isfinite(tail)]
    with np.errstate(invalid="ignore"):
        steps = np.diff(tail)
    rising = np.flatnonzero(np.nan_to_num(steps, nan=0.0, neginf=0.0) > 1e-12)
    if finite_tail.size == 0:
        ok = True
    else:
        ok = rising.size == 0 and tail[-1] < np.max(logv[np.isfinite(logv)])
    witness = {
        "M_required": float(M_required),
        "boundary": decay_boundary(op, dim),
        "first_rise_r": float(r[samples // 2 + rising[0]]) if rising.size else None,
        "tail_log_value": float(tail[-1]),
    }
    return bool(ok), witness
