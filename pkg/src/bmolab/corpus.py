"""Deterministic test-function corpus.

Members (x1 is the first coordinate, |x| the periodic distance to 0):
    constant             1
    sawtooth             x1 on [-L/2, L/2), jumping by L at the seam
    log_profile          1D: log|2 sin(pi x/L)|
                         2D: 0.5 log(4 sin^2(pi x1/L) + 4 sin^2(pi x2/L))
                         both averaged over 8 sub-points per axis in each cell
    mollified_indicator  indicator of |x| < L/4, heat-smoothed at t = (L/128)^2
    smoothed_sawtooth    sawtooth, heat-smoothed at t = (L/128)^2
    random_fourier       Gaussian coefficients times (1 + |k|)^-1.5, zero mean,
                         scaled to max |f| = 1
    single_mode          cos(2 pi x1 / L)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridFunction

MEMBERS = ("constant", "sawtooth", "log_profile", "mollified_indicator", "smoothed_sawtooth",
           "random_fourier", "single_mode")
EQUIV_MEMBERS = ("log_profile", "smoothed_sawtooth", "mollified_indicator", "random_fourier",
                 "single_mode")
SUBSAMPLES = 8


@dataclass(frozen=True)
class Corpus:
    grid: Grid
    seed: int
    members: dict

    def __getitem__(self, name: str) -> GridFunction:
        return self.members[name]

    def __iter__(self):
        return iter(self.members.items())

    def names(self) -> tuple[str, ...]:
        return tuple(self.members)

    def subset(self, names) -> "Corpus":
        return Corpus(self.grid, self.seed, {n: self.members[n] for n in names})


def _sub_offsets(grid: Grid) -> np.ndarray:
    return ((np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES - 0.5) * grid.spacing


def log_profile(grid: Grid) -> GridFunction:
    L = grid.side_length
    sub = _sub_offsets(grid)
    coords = grid.coordinates()
    acc = np.zeros(grid.shape)
    if grid.dim == 1:
        for a in sub:
            acc += np.log(np.abs(2 * np.sin(np.pi * (coords[0] + a) / L)))
        acc /= SUBSAMPLES
    else:
        for a in sub:
            s1 = np.sin(np.pi * (coords[0] + a) / L) ** 2
            for b in sub:
                s2 = np.sin(np.pi * (coords[1] + b) / L) ** 2
                acc += 0.5 * np.log(4 * (s1 + s2))
        acc /= SUBSAMPLES ** 2
    return GridFunction(grid, acc)


def sawtooth(grid: Grid) -> GridFunction:
    return GridFunction(grid, grid.coordinates()[0])


def single_mode(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.cos(2 * np.pi * grid.coordinates()[0] / grid.side_length))


def _heat_smooth(grid: Grid, values: np.ndarray) -> np.ndarray:
    t = (grid.side_length / 128) ** 2
    xi = grid.frequencies()
    return np.fft.ifftn(np.fft.fftn(values) * np.exp(-t * xi ** 2)).real


def mollified_indicator(grid: Grid) -> GridFunction:
    r = np.sqrt(sum(c ** 2 for c in grid.coordinates()))
    return GridFunction(grid, _heat_smooth(grid, (r < grid.side_length / 4).astype(float)))


def smoothed_sawtooth(grid: Grid) -> GridFunction:
    return GridFunction(grid, _heat_smooth(grid, grid.coordinates()[0]))


def random_fourier(grid: Grid, seed: int = 0, decay: float = 1.5) -> GridFunction:
    rng = np.random.default_rng(seed)
    n = grid.points_per_side
    k = np.fft.fftfreq(n, d=1.0 / n)
    kk = np.sqrt(sum(a ** 2 for a in np.meshgrid(*([k] * grid.dim), indexing="ij")))
    coef = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    coef = coef * (1 + kk) ** (-decay)
    coef.flat[0] = 0
    vals = np.fft.ifftn(coef).real
    vals = vals - vals.mean()
    return GridFunction(grid, vals / np.max(np.abs(vals)))


def generate_corpus(grid: Grid, seed: int = 0, names=MEMBERS) -> Corpus:
    makers = {
        "constant": lambda: GridFunction(grid, np.ones(grid.shape)),
        "sawtooth": lambda: sawtooth(grid),
        "log_profile": lambda: log_profile(grid),
        "mollified_indicator": lambda: mollified_indicator(grid),
        "smoothed_sawtooth": lambda: smoothed_sawtooth(grid),
        "random_fourier": lambda: random_fourier(grid, seed),
        "single_mode": lambda: single_mode(grid),
    }
    unknown = [n for n in names if n not in makers]
    if unknown:
        raise KeyError(f"unknown corpus members: {unknown}")
    return Corpus(grid, int(seed), {n: makers[n]() for n in names})
