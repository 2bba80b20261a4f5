"""Littlewood-Paley square functions and phi-Carleson tent norms.

Scales are length scales s; the kernel time is s**m and the measure dt/t
becomes m ds/s. Integrals over scales use the trapezoid rule in log s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bmo import bmo_phi, bmo_phi_A, bmo_phi_A_max, verify_wb_conditions
from .grid import Ball, BallMenu, Grid, GridFunction, ball_flat_indices, inverse_rfft
from .growth import GrowthFunction
from .luxembourg import indicator_norms
from .semigroup import KernelOp, heat, poisson

T_GRID_POINTS = 48


def default_scales(grid: Grid, points: int = T_GRID_POINTS) -> np.ndarray:
    """Geometric length scales spanning [4h, L/8]."""
    return np.geomspace(4 * grid.spacing, grid.side_length / 8, points)


def refined_scales(scales: np.ndarray) -> np.ndarray:
    """Insert the geometric midpoint of every interval (nodes stay nested)."""
    s = np.asarray(scales, dtype=float)
    mids = np.sqrt(s[:-1] * s[1:])
    out = np.empty(2 * s.size - 1)
    out[0::2] = s
    out[1::2] = mids
    return out


def lp_symbol(op: KernelOp, xi: np.ndarray, t: float) -> np.ndarray:
    """Symbol of t d/dt [P_t (I - P_t)] at kernel time t."""
    if op.kind == "poisson":
        w = xi
    elif op.kind == "heat":
        w = xi * xi
    else:
        raise ValueError("square functions need a Poisson or heat kernel")
    return t * (-w * np.exp(-t * w) + 2 * w * np.exp(-2 * t * w))


def _rfft_xi(grid: Grid) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(grid.points_per_side, d=grid.spacing)
    kr = 2 * np.pi * np.fft.rfftfreq(grid.points_per_side, d=grid.spacing)
    axes = [k] * (grid.dim - 1) + [kr]
    return np.sqrt(sum(a ** 2 for a in np.meshgrid(*axes, indexing="ij")))


def lp_derivative_field(f: GridFunction, op: KernelOp, t: float) -> GridFunction:
    """t d/dt P_t (I - P_t) f, applied exactly on the frequency lattice."""
    grid = f.grid
    if not (t > 0 and t ** (1.0 / op.m) <= grid.side_length / 8 * (1 + 1e-12)):
        raise ValueError("t must satisfy 0 < t**(1/m) <= L/8")
    spec = np.fft.rfftn(f.values) * lp_symbol(op, _rfft_xi(grid), t)
    return GridFunction(grid, inverse_rfft(grid, spec))


def _fields(f: GridFunction, op: KernelOp, scales: np.ndarray) -> np.ndarray:
    grid = f.grid
    spec = np.fft.rfftn(f.values)
    xi = _rfft_xi(grid)
    out = np.empty((len(scales),) + grid.shape)
    for j, s in enumerate(scales):
        out[j] = inverse_rfft(grid, spec * lp_symbol(op, xi, s ** op.m))
    return out


def log_trapezoid_weights(scales: np.ndarray, m: float = 1.0) -> np.ndarray:
    """Weights w_j with sum_j w_j F(s_j) ~ int F(s) m ds/s."""
    x = np.log(np.asarray(scales, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two scales")
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return m * w


def g_function(f: GridFunction, op: KernelOp, t_grid=None) -> GridFunction:
    """(sum_j w_j |field(x, s_j)|^2)^(1/2) over the length-scale grid."""
    scales = default_scales(f.grid) if t_grid is None else np.asarray(t_grid, dtype=float)
    if scales.size == 0:
        raise ValueError("empty scale grid")
    w = log_trapezoid_weights(scales, op.m)
    fld = _fields(f, op, scales)
    return GridFunction(f.grid, np.sqrt(np.tensordot(w, fld ** 2, axes=1)))


def single_mode_oracle(omega: float, s_lo: float, s_hi: float, op: KernelOp) -> float:
    """int_{s_lo}^{s_hi} |symbol(omega, s**m)|^2 m ds/s by adaptive quadrature."""
    from scipy.integrate import quad

    def integrand(u):
        s = np.exp(u)
        return op.m * lp_symbol(op, np.array(omega), s ** op.m) ** 2

    val, _ = quad(integrand, np.log(s_lo), np.log(s_hi), epsabs=0, epsrel=1e-12, limit=200)
    return float(val)


# tents -------------------------------------------------------------------------


@dataclass(frozen=True)
class TentSample:
    ball: Ball
    scales: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    integral: float


@dataclass(frozen=True)
class CarlesonReport:
    value: float
    argmax: int
    ball: Ball
    contributions: np.ndarray = field(repr=False)
    scales: int


def _tent_scales(scales: np.ndarray, r: float) -> np.ndarray:
    inside = scales[scales < r * (1 - 1e-12)]
    return np.concatenate([inside, [r]])


def _tent_weights(sc: np.ndarray, m: float) -> np.ndarray:
    # a radius at or below the grid start leaves an empty scale range
    return np.zeros(1) if sc.size < 2 else log_trapezoid_weights(sc, m)


def tent_sample(f: GridFunction, op: KernelOp, ball: Ball, t_grid=None) -> TentSample:
    """int_{x in B} int_{s < r_B} |field|^2 dx m ds/s, truncated below at the grid start."""
    grid = f.grid
    scales = default_scales(grid) if t_grid is None else np.asarray(t_grid, dtype=float)
    sc = _tent_scales(scales, ball.radius)
    idx = ball_flat_indices(grid, np.array([ball.center]), ball.radius)[0]
    fld = _fields(f, op, sc).reshape(len(sc), -1)[:, idx]
    dens = fld ** 2
    w = _tent_weights(sc, op.m)
    return TentSample(ball, sc, dens, float(w @ dens.sum(axis=1) * grid.cell_measure))


def phi_carleson_norm(f: GridFunction, phi: GrowthFunction, op: KernelOp, menu: BallMenu,
                      t_grid=None) -> CarlesonReport:
    """sup_B |B|^(1/2) / ||chi_B|| * (tent integral over B)^(1/2)."""
    grid = f.grid
    scales = default_scales(grid) if t_grid is None else np.asarray(t_grid, dtype=float)
    contrib = np.zeros(len(menu))
    cache: dict[float, np.ndarray] = {}
    spec = np.fft.rfftn(f.values)
    xi = _rfft_xi(grid)

    def field_sq(s):
        if s not in cache:
            fs = inverse_rfft(grid, spec * lp_symbol(op, xi, s ** op.m))
            cache[s] = (fs * fs).ravel()
        return cache[s]

    for r, pos, centers in menu.by_radius():
        sc = _tent_scales(scales, r)
        w = _tent_weights(sc, op.m)
        idx = ball_flat_indices(grid, centers, r)
        tent = np.zeros(len(centers))
        for wj, s in zip(w, sc):
            tent += wj * field_sq(float(s))[idx].sum(axis=1)
        tent *= grid.cell_measure
        mu = idx.shape[1] * grid.cell_measure
        norms = indicator_norms(phi, centers, r)
        contrib[pos] = np.sqrt(mu) / norms * np.sqrt(tent)
    i = int(np.argmax(contrib))
    return CarlesonReport(float(contrib[i]), i, menu.balls[i], contrib, len(scales))


# equivalence table ---------------------------------------------------------------

COLUMNS = ("bmo_phi", "bmo_A_poisson", "bmo_A_heat", "bmo_A_max_poisson", "wb_c1", "wb_c2",
           "wb_c3", "carleson")


@dataclass(frozen=True)
class EquivalenceTable:
    members: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    ratios: dict = field(repr=False)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def window(self, num: str, den: str) -> tuple[float, float]:
        return self.ratios[(num, den)]


def equivalence_report(corpus, phi: GrowthFunction, menu: BallMenu, t_grid=None,
                       x_stride: int | None = None) -> EquivalenceTable:
    """Seminorm table over a corpus plus (min, max) ratio windows per column pair."""
    items = list(corpus)
    if len(items) < 5:
        raise ValueError("equivalence report needs at least 5 corpus members")
    dim = phi.grid.dim
    P, H = poisson(dim), heat()
    rows = []
    names = []
    for name, f in items:
        classical = bmo_phi(f, phi, menu).value
        if not classical > 0:
            raise ValueError(f"corpus member {name!r} has zero classical seminorm")
        wb = verify_wb_conditions(f, phi, P, menu, x_stride=x_stride)
        rows.append([
            classical,
            bmo_phi_A(f, phi, P, menu).value,
            bmo_phi_A(f, phi, H, menu).value,
            bmo_phi_A_max(f, phi, P, x_stride=x_stride).value,
            wb.c1, wb.c2, wb.c3,
            phi_carleson_norm(f, phi, P, menu, t_grid).value,
        ])
        names.append(name)
    vals = np.array(rows)
    ratios = {}
    for i, a in enumerate(COLUMNS):
        for j, b in enumerate(COLUMNS):
            if i != j:
                r = vals[:, i] / vals[:, j]
                ratios[(a, b)] = (float(r.min()), float(r.max()))
    return EquivalenceTable(tuple(names), COLUMNS, vals, ratios)


def index_condition_check(phi: GrowthFunction) -> dict:
    """2n p/i - n (r - 1)/r < n + 1 with declared exponents (p1 for p, lower type for i, RH q for r)."""
    n = phi.grid.dim
    p, i, r = phi.ap_exponent, phi.lower_type, phi.rh_exponent
    tail = 1.0 if np.isinf(r) else (r - 1) / r
    lhs = 2 * n * p / i - n * tail
    return {"lhs": float(lhs), "rhs": float(n + 1), "holds": bool(lhs < n + 1),
            "status": "unverified"}
