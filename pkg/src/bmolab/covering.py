"""Maximal operators, dyadic cubes and Whitney ball covers on the torus.

Maximal functions are suprema over balls from a finite radius ladder that
contain the point, so they are lower bounds of the true maximal functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import (Ball, Grid, GridError, GridFunction, ball_flat_indices, ball_offsets,
                   ball_point_count, ball_sums_all_centers)
from .growth import GrowthFunction

WHITNEY_DILATION = 4.0


def maximal_radii(grid: Grid) -> tuple[float, ...]:
    """Dyadic ladder L/8, L/16, ... down to the smallest radius >= 2h."""
    radii = []
    r = grid.side_length / 8
    while r >= 2 * grid.spacing * (1 - 1e-12):
        radii.append(r)
        r /= 2
    return tuple(radii)


def _footprint(grid: Grid, radius: float) -> np.ndarray:
    offs = ball_offsets(grid, radius)
    k = int(np.max(np.abs(offs)))
    fp = np.zeros((2 * k + 1,) * grid.dim, dtype=bool)
    fp[tuple((offs + k).T)] = True
    return fp


def _sup_over_containing(grid: Grid, means: np.ndarray, radius: float) -> np.ndarray:
    """At x, the max of means[c] over centers c with |x - c| < radius."""
    return ndimage.maximum_filter(means, footprint=_footprint(grid, radius), mode="wrap")


def hl_maximal(f: GridFunction, radii=None) -> GridFunction:
    """Menu-restricted Hardy-Littlewood maximal function of f."""
    grid = f.grid
    radii = maximal_radii(grid) if radii is None else tuple(radii)
    a = np.abs(f.values)
    out = np.zeros(grid.shape)
    for r in radii:
        means = ball_sums_all_centers(grid, a, r) / ball_point_count(grid, r)
        out = np.maximum(out, _sup_over_containing(grid, means, r))
    return GridFunction(grid, out)


def weighted_maximal(f: GridFunction, phi: GrowthFunction, t: float, radii=None) -> GridFunction:
    """sup over menu balls B containing x of phi(B, t)^-1 * sum_B |f| phi(., t) h^n."""
    if not t > 0:
        raise ValueError("t must be positive")
    grid = f.grid
    radii = maximal_radii(grid) if radii is None else tuple(radii)
    w = phi.values(t)
    a = np.abs(f.values) * w
    out = np.zeros(grid.shape)
    for r in radii:
        den = ball_sums_all_centers(grid, w, r)
        if np.any(den <= 0):
            raise ValueError("weighted measure vanishes on a menu ball")
        means = ball_sums_all_centers(grid, a, r) / den
        out = np.maximum(out, _sup_over_containing(grid, means, r))
    return GridFunction(grid, out)


def weak_type_constant(f: GridFunction, radii=None) -> float:
    """sup over lambda > 0 of lambda * mu({M f > lambda}) / ||f||_1."""
    mf = np.sort(hl_maximal(f, radii).values.ravel())[::-1]
    counts = np.arange(1, mf.size + 1)
    return float(np.max(mf * counts) * f.grid.cell_measure / f.l1_norm())


def weighted_level_ratio(phi: GrowthFunction, ball: Ball, t: float, lambdas,
                         p1: float, radii=None) -> float:
    """Empirical constant in the weighted level-set bound for M_phi(chi_B / phi).

    Returns max over lambda of
        phi({x in B : M_phi(chi_B/phi)(x) > lambda}, t)
        / ([mu(B) / (lambda phi(B, t))]**p1' * phi(B, t)).
    """
    if not p1 > 1:
        raise ValueError("p1 must exceed 1")
    grid = phi.grid
    q = p1 / (p1 - 1)
    w = phi.values(t).ravel()
    idx = ball_flat_indices(grid, np.array([ball.center]), ball.radius)[0]
    chi = np.zeros(grid.size)
    chi[idx] = 1.0
    g = GridFunction(grid, (chi / w).reshape(grid.shape))
    m = weighted_maximal(g, phi, t, radii).values.ravel()[idx]
    wb = w[idx]
    hn = grid.cell_measure
    mu = len(idx) * hn
    phib = wb.sum() * hn
    best = 0.0
    for lam in np.asarray(lambdas, dtype=float):
        lhs = wb[m > lam].sum() * hn
        rhs = (mu / (lam * phib)) ** q * phib
        best = max(best, lhs / rhs)
    return best


# dyadic cubes -------------------------------------------------------------


@dataclass(frozen=True)
class DyadicCube:
    """Cube prod_i [-L/2 + j_i s, -L/2 + (j_i + 1) s), s = L 2^-level."""

    level: int
    index: tuple[int, ...]
    side: float

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise GridError("level-0 cube has no parent")
        return DyadicCube(self.level - 1, tuple(j // 2 for j in self.index), self.side * 2)

    def children(self) -> list["DyadicCube"]:
        base = [(2 * j, 2 * j + 1) for j in self.index]
        out = []
        for combo in np.ndindex(*([2] * len(self.index))):
            out.append(DyadicCube(self.level + 1, tuple(b[c] for b, c in zip(base, combo)),
                                  self.side / 2))
        return out

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((j >> shift) == i for i, j in zip(self.index, other.index))

    def point_slices(self, grid: Grid) -> tuple[slice, ...]:
        k = grid.points_per_side >> self.level
        return tuple(slice(j * k, (j + 1) * k) for j in self.index)

    def mask(self, grid: Grid) -> np.ndarray:
        m = np.zeros(grid.shape, dtype=bool)
        m[self.point_slices(grid)] = True
        return m

    def center(self, grid: Grid) -> tuple[float, ...]:
        return tuple(-grid.side_length / 2 + (j + 0.5) * self.side for j in self.index)


def dyadic_constants(grid: Grid) -> dict:
    """delta, D and a0 for the dyadic system: diam Q <= D delta^k, Q contains B(z_Q, a0 delta^k)."""
    return {"delta": 0.5, "D": np.sqrt(grid.dim) * grid.side_length, "a0": grid.side_length / 2}


def dyadic_cubes(grid: Grid, level: int) -> list[DyadicCube]:
    top = int(np.log2(grid.points_per_side))
    if not 0 <= level <= top:
        raise GridError(f"level must lie in [0, {top}], got {level}")
    side = grid.side_length / 2 ** level
    return [DyadicCube(level, tuple(int(i) for i in idx), side)
            for idx in np.ndindex(*([2 ** level] * grid.dim))]


# Whitney cover --------------------------------------------------------------


@dataclass(frozen=True)
class WhitneyCover:
    balls: tuple[Ball, ...]
    overlap: int
    dilation: float
    cubes: tuple[DyadicCube, ...]
    uncovered_max_distance: float
    contact_ok: bool
    inside_ok: bool


def periodic_distance_to(mask_false: np.ndarray, spacing: float) -> np.ndarray:
    """Periodic Euclidean distance from each point to the nearest True point of mask_false."""
    dim = mask_false.ndim
    tiled = np.tile(mask_false, (3,) * dim)
    d = ndimage.distance_transform_edt(~tiled)
    n = mask_false.shape[0]
    centre = tuple(slice(n, 2 * n) for _ in range(dim))
    return d[centre] * spacing


def whitney_cover(open_mask) -> WhitneyCover:
    """Maximal dyadic cubes far enough from the complement, as balls.

    A cube Q of k points per side gets the ball B(c_Q, rho) where c_Q is the
    grid point at offset k//2 and rho = max(sqrt(n) k h, 2h). Q is accepted when
    every point of Q is at distance >= rho from the complement F; the selected
    cubes are the maximal accepted ones. Levels are capped so rho <= L/8.
    """
    if isinstance(open_mask, GridFunction):
        grid = open_mask.grid
        omega = open_mask.values.astype(bool)
    else:
        raise TypeError("open_mask must be a GridFunction")
    if not omega.any():
        raise GridError("open set is empty")
    if omega.all():
        raise GridError("open set has empty complement")
    h = grid.spacing
    n = grid.points_per_side
    dim = grid.dim
    dist = periodic_distance_to(~omega, h)

    def radius(k):
        # shrunk by 1e-13 so points at distance exactly rho stay outside despite rounding
        return max(np.sqrt(dim) * k * h, 2 * h) * (1 - 1e-13)

    levels = []
    for lvl in range(int(np.log2(n)), -1, -1):
        k = n >> lvl
        if radius(k) <= grid.side_length / 8 * (1 + 1e-12):
            levels.append(lvl)
    top = min(levels)
    good = {}
    for lvl in levels:
        k = n >> lvl
        # min distance over each cube via block reshape
        shape = []
        for _ in range(dim):
            shape += [2 ** lvl, k]
        blocks = dist.reshape(shape)
        cube_min = blocks.min(axis=tuple(range(1, 2 * dim, 2)))
        good[lvl] = cube_min >= radius(k)
    cubes = []
    balls = []
    for lvl in sorted(levels):
        k = n >> lvl
        g = good[lvl]
        if lvl == top:
            sel = g
        else:
            par = good[lvl - 1]
            up = par
            for ax in range(dim):
                up = np.repeat(up, 2, axis=ax)
            sel = g & ~up
        for idx in zip(*np.nonzero(sel)):
            idx = tuple(int(i) for i in idx)
            cubes.append(DyadicCube(lvl, idx, grid.side_length / 2 ** lvl))
            centre = tuple(j * k + k // 2 for j in idx)
            balls.append(Ball(centre, radius(k)))
    count = np.zeros(grid.size, dtype=np.int64)
    inside_ok = True
    contact_ok = True
    for b in balls:
        pts = ball_flat_indices(grid, np.array([b.center]), b.radius)[0]
        np.add.at(count, pts, 1)
        inside_ok &= bool(omega.ravel()[pts].all())
        contact_ok &= bool(dist[b.center] < WHITNEY_DILATION * b.radius)
    covered = count.reshape(grid.shape) > 0
    uncovered = omega & ~covered
    gap = float(dist[uncovered].max()) if uncovered.any() else 0.0
    return WhitneyCover(tuple(balls), int(count.max()) if balls else 0, WHITNEY_DILATION,
                        tuple(cubes), gap, contact_ok, inside_ok)
