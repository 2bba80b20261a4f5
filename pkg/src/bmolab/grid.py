"""Periodic grids, balls and discrete integrals over balls.

The domain is the torus [-L/2, L/2)^n with n in {1, 2}, sampled at N points
per side. A point has integer index i per axis and coordinate -L/2 + i*h,
h = L/N. Balls use the periodic Euclidean distance with strict membership
d < r, and the measure is counting times h^n.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GridError(ValueError):
    """Raised for invalid grids, balls or mismatched grid functions."""


@dataclass(frozen=True)
class Grid:
    dim: int
    side_length: float
    points_per_side: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not self.side_length > 0:
            raise GridError(f"side_length must be positive, got {self.side_length}")
        n = self.points_per_side
        if int(n) != n or n < 16 or (int(n) & (int(n) - 1)) != 0:
            raise GridError(f"points_per_side must be a power of two >= 16, got {n}")
        object.__setattr__(self, "side_length", float(self.side_length))
        object.__setattr__(self, "points_per_side", int(n))

    @property
    def spacing(self) -> float:
        return self.side_length / self.points_per_side

    @property
    def cell_measure(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_side,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_side ** self.dim

    @property
    def total_measure(self) -> float:
        return self.side_length ** self.dim

    def axis(self) -> np.ndarray:
        """Coordinates of the grid points along one axis."""
        return -self.side_length / 2 + self.spacing * np.arange(self.points_per_side)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape `self.shape`, one per axis."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def point(self, index: Sequence[int]) -> tuple[float, ...]:
        idx = self._check_index(index)
        return tuple(-self.side_length / 2 + self.spacing * i for i in idx)

    def index_of(self, coords: Sequence[float]) -> tuple[int, ...]:
        """Nearest grid index of a coordinate tuple (wrapped periodically)."""
        coords = np.atleast_1d(np.asarray(coords, dtype=float))
        if coords.shape != (self.dim,):
            raise GridError(f"expected {self.dim} coordinates, got {coords.shape}")
        raw = np.rint((coords + self.side_length / 2) / self.spacing).astype(int)
        return tuple(int(i) % self.points_per_side for i in raw)

    def _check_index(self, index: Sequence[int]) -> tuple[int, ...]:
        index = tuple(int(i) for i in np.atleast_1d(index))
        if len(index) != self.dim:
            raise GridError(f"expected {self.dim} indices, got {len(index)}")
        if any(i < 0 or i >= self.points_per_side for i in index):
            raise GridError(f"index {index} out of range")
        return index

    def distance_from(self, index: Sequence[int]) -> np.ndarray:
        """Periodic Euclidean distance from the grid point `index` to every point."""
        return np.sqrt(self._squared_distance_from(self._check_index(index)))

    def _squared_distance_from(self, index: tuple[int, ...]) -> np.ndarray:
        n = self.points_per_side
        h = self.spacing
        d2 = np.zeros(self.shape)
        for axis, c in enumerate(index):
            k = np.abs(np.arange(n) - c)
            k = np.minimum(k, n - k)
            shape = [1] * self.dim
            shape[axis] = n
            d2 = d2 + ((k * h) ** 2).reshape(shape)
        return d2

    def frequencies(self) -> np.ndarray:
        """|xi| on the torus frequency lattice, shape `self.shape`."""
        k = 2 * np.pi * np.fft.fftfreq(self.points_per_side, d=self.spacing)
        grids = np.meshgrid(*([k] * self.dim), indexing="ij")
        return np.sqrt(sum(g ** 2 for g in grids))


def make_grid(dim: int, side_length: float, points_per_side: int) -> Grid:
    return Grid(dim, side_length, points_per_side)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on every point of a grid. Immutable after construction."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise GridError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise GridError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_measure)

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.cell_measure)

    def l2_norm(self) -> float:
        return float(np.sqrt((self.values ** 2).sum() * self.grid.cell_measure))

    def translate(self, shift: Sequence[int]) -> "GridFunction":
        """Lattice translation: the result at index i equals self at i - shift."""
        shift = tuple(int(s) for s in np.atleast_1d(shift))
        return GridFunction(self.grid, np.roll(self.values, shift, axis=tuple(range(self.grid.dim))))

    # serialization ------------------------------------------------------

    def save(self, path: str | Path, fmt: str | None = None) -> None:
        """Write as binary (`.bin`) or CSV (`.csv`).

        Binary layout: magic b"BMOG", then little-endian uint32 version,
        uint32 dim, uint32 N, float64 L, then N**dim float64 values in C
        (row-major, last axis fastest) order, all little-endian.
        """
        path = Path(path)
        fmt = fmt or path.suffix.lstrip(".")
        if fmt == "bin":
            header = _MAGIC + struct.pack("<IIId", 1, self.grid.dim, self.grid.points_per_side,
                                          self.grid.side_length)
            path.write_bytes(header + self.values.astype("<f8").tobytes(order="C"))
        elif fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["dim", "side_length", "points_per_side"])
                w.writerow([self.grid.dim, repr(self.grid.side_length), self.grid.points_per_side])
                w.writerow(["value"])
                for v in self.values.ravel(order="C"):
                    w.writerow([repr(float(v))])
        else:
            raise GridError(f"unknown format {fmt!r}")

    @classmethod
    def load(cls, path: str | Path, fmt: str | None = None) -> "GridFunction":
        path = Path(path)
        fmt = fmt or path.suffix.lstrip(".")
        if fmt == "bin":
            raw = path.read_bytes()
            if raw[:4] != _MAGIC:
                raise GridError("not a grid function file")
            version, dim, n, length = struct.unpack("<IIId", raw[4:24])
            if version != 1:
                raise GridError(f"unsupported version {version}")
            grid = Grid(dim, length, n)
            vals = np.frombuffer(raw[24:], dtype="<f8")
            return cls(grid, vals.reshape(grid.shape))
        if fmt == "csv":
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            dim, length, n = int(rows[1][0]), float(rows[1][1]), int(rows[1][2])
            grid = Grid(dim, length, n)
            vals = np.array([float(r[0]) for r in rows[3:]])
            return cls(grid, vals.reshape(grid.shape))
        raise GridError(f"unknown format {fmt!r}")


_MAGIC = b"BMOG"


def check_same_grid(*fs: GridFunction) -> Grid:
    grid = fs[0].grid
    for f in fs[1:]:
        if f.grid != grid:
            raise GridError("grid functions live on different grids")
    return grid


# balls ------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Ball with center given by grid indices and a positive radius."""

    center: tuple[int, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise GridError(f"ball radius must be positive, got {self.radius}")

    def translate(self, shift: Sequence[int], grid: Grid) -> "Ball":
        n = grid.points_per_side
        return Ball(tuple((c + int(s)) % n for c, s in zip(self.center, np.atleast_1d(shift))), self.radius)

    def dilate(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


def check_ball(grid: Grid, ball: Ball) -> Ball:
    """Validate a ball against the radius bounds 2h <= r <= L/8."""
    grid._check_index(ball.center)
    h = grid.spacing
    if ball.radius < 2 * h * (1 - 1e-12):
        raise GridError(f"ball radius {ball.radius} below 2*spacing = {2 * h}")
    if ball.radius > grid.side_length / 8 * (1 + 1e-12):
        raise GridError(f"ball radius {ball.radius} above side_length/8 = {grid.side_length / 8}")
    return ball


@lru_cache(maxsize=512)
def ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    """Integer offsets d with |d|*h < radius, in lexicographic order.

    Valid for radius < L/2, where no offset is ambiguous modulo N.
    """
    if radius >= grid.side_length / 2:
        raise GridError("ball radius must be below side_length/2")
    h = grid.spacing
    k = int(np.ceil(radius / h))
    rng = np.arange(-k, k + 1)
    mesh = np.meshgrid(*([rng] * grid.dim), indexing="ij")
    d = np.stack([m.ravel() for m in mesh], axis=1)
    keep = ((d * h) ** 2).sum(axis=1) < radius ** 2
    out = d[keep]
    out.setflags(write=False)
    return out


def ball_point_count(grid: Grid, radius: float) -> int:
    return len(ball_offsets(grid, radius))


def ball_flat_indices(grid: Grid, centers: np.ndarray, radius: float) -> np.ndarray:
    """Flat indices of ball points, shape (len(centers), points per ball)."""
    centers = np.asarray(centers, dtype=np.int64).reshape(-1, grid.dim)
    offs = ball_offsets(grid, radius)
    pts = (centers[:, None, :] + offs[None, :, :]) % grid.points_per_side
    if grid.dim == 1:
        return pts[..., 0]
    return pts[..., 0] * grid.points_per_side + pts[..., 1]


def ball_mask(grid: Grid, ball: Ball) -> np.ndarray:
    mask = np.zeros(grid.size, dtype=bool)
    mask[ball_flat_indices(grid, np.array([ball.center]), ball.radius)[0]] = True
    return mask.reshape(grid.shape)


def ball_measure(grid: Grid, ball: Ball) -> float:
    check_ball(grid, ball)
    return ball_point_count(grid, ball.radius) * grid.cell_measure


def ball_integrals(grid: Grid, values: np.ndarray, centers: np.ndarray, radius: float) -> np.ndarray:
    """Discrete integrals of `values` over B(c, radius) for each center c."""
    idx = ball_flat_indices(grid, centers, radius)
    return np.asarray(values, dtype=float).ravel()[idx].sum(axis=1) * grid.cell_measure


def mean_on_ball(f: GridFunction, ball: Ball) -> float:
    check_ball(f.grid, ball)
    idx = ball_flat_indices(f.grid, np.array([ball.center]), ball.radius)[0]
    return float(f.values.ravel()[idx].sum() / len(idx))


def inverse_rfft(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """Real inverse transform of an rfftn spectrum back onto the grid."""
    return np.fft.irfftn(spec, s=grid.shape, axes=tuple(range(grid.dim)))


def ball_sums_all_centers(grid: Grid, values: np.ndarray, radius: float) -> np.ndarray:
    """Sum of `values` over B(x, radius) for every grid point x (FFT convolution)."""
    ind = ball_indicator_kernel(grid, radius)
    spec = np.fft.rfftn(np.asarray(values, dtype=float).reshape(grid.shape))
    return inverse_rfft(grid, spec * np.fft.rfftn(ind))


@lru_cache(maxsize=256)
def ball_indicator_kernel(grid: Grid, radius: float) -> np.ndarray:
    """Indicator of B(0, radius) laid out with the origin at index 0 (wrapped)."""
    ind = np.zeros(grid.size)
    center = np.zeros((1, grid.dim), dtype=np.int64)
    ind[ball_flat_indices(grid, center, radius)[0]] = 1.0
    ind = ind.reshape(grid.shape)
    ind.setflags(write=False)
    return ind


# menus ------------------------------------------------------------------


@dataclass(frozen=True)
class BallMenu:
    """Centers on a stride sublattice crossed with a ladder of radii.

    Balls are ordered radius-major, then by center index. Centers are the
    indices congruent to N/2 (the origin) modulo the stride on each axis.
    """

    balls: tuple[Ball, ...]
    center_stride: int
    radii: tuple[float, ...]

    def __len__(self):
        return len(self.balls)

    def __iter__(self):
        return iter(self.balls)

    def by_radius(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """Groups (radius, ball positions in menu, centers array) per distinct radius."""
        groups: dict[float, list[int]] = {}
        for i, b in enumerate(self.balls):
            groups.setdefault(b.radius, []).append(i)
        out = []
        for r, pos in groups.items():
            pos_arr = np.array(pos, dtype=np.int64)
            centers = np.array([self.balls[i].center for i in pos], dtype=np.int64)
            out.append((r, pos_arr, centers))
        return out

    def select(self, keep) -> "BallMenu":
        """Sub-menu of balls for which `keep(ball)` is true."""
        balls = tuple(b for b in self.balls if keep(b))
        if not balls:
            raise GridError("menu selection is empty")
        radii = tuple(r for r in self.radii if any(b.radius == r for b in balls))
        return BallMenu(balls, self.center_stride, radii)


def stride_centers(grid: Grid, stride: int) -> np.ndarray:
    n = grid.points_per_side
    if stride < 1:
        raise GridError(f"center stride must be >= 1, got {stride}")
    axis = np.sort((n // 2 + stride * np.arange(-(-n // stride))) % n)
    axis = np.unique(axis)
    mesh = np.meshgrid(*([axis] * grid.dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def make_ball_menu(grid: Grid, center_stride: int, radii_ladder: Iterable[float]) -> BallMenu:
    radii = tuple(float(r) for r in radii_ladder)
    if not radii:
        raise GridError("radii ladder is empty")
    centers = stride_centers(grid, int(center_stride))
    balls = []
    for r in radii:
        for c in centers:
            balls.append(check_ball(grid, Ball(tuple(c), r)))
    return BallMenu(tuple(balls), int(center_stride), radii)


def standard_radii(grid: Grid, levels: int = 5) -> tuple[float, ...]:
    """Dyadic ladder L/8, L/16, ... keeping radii >= 4h, at most `levels` entries."""
    radii = []
    r = grid.side_length / 8
    while len(radii) < levels and r >= 4 * grid.spacing:
        radii.append(r)
        r /= 2
    return tuple(radii)


def standard_menu(grid: Grid, levels: int = 5, centers_per_side: int = 64) -> BallMenu:
    stride = max(1, grid.points_per_side // centers_per_side)
    return make_ball_menu(grid, stride, standard_radii(grid, levels))
