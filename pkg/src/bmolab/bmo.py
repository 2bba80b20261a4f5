"""BMO-type seminorm estimators over ball menus.

Kinds:
    classical  sup_B ||chi_B||^-1 int_B |f - f_B|
    A          sup_B ||chi_B||^-1 int_B |f - A_{t_B} f|,  t_B = r_B**m
    A_max      sup_(x,t) mu(B)/||chi_B|| * A_t(|f - A_t f|)(x),  B = B(x, t**(1/m))
    A_p        sup_B mu(B)/||chi_B|| * (mean_B |f - A_{t_B} f|**p)**(1/p)
    tilde_p    sup_B ||chi_B||^-1 (int_B |g/phi(., tau)|**p phi(., tau))**(1/p),
               g = f - A_{t_B} f, tau = 1/||chi_B||

Every value is a max over a finite menu, hence a lower bound of the true
supremum ("menu-restricted").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma as gamma_fn

import numpy as np

from .grid import (Ball, BallMenu, Grid, GridFunction, ball_flat_indices, ball_point_count,
                   check_ball, stride_centers, standard_radii)
from .growth import GrowthFunction, periodic_offset
from .luxembourg import indicator_norms
from .semigroup import KernelOp, apply_array

NOTE = "menu-restricted"


@dataclass(frozen=True)
class SeminormReport:
    kind: str
    value: float
    contributions: np.ndarray = field(repr=False)
    argmax: int
    argmax_element: object
    growth: str
    kernel: str | None = None
    p_tilde: float | None = None
    note: str = NOTE


def _report(kind, contributions, elements, phi, op=None, p_tilde=None) -> SeminormReport:
    contributions = np.asarray(contributions, dtype=float)
    i = int(np.argmax(contributions))
    value = float(contributions[i])
    return SeminormReport(kind, value, contributions, i, elements[i], phi.label(),
                          None if op is None else op.name, p_tilde)


def _group_data(f: GridFunction, phi: GrowthFunction, menu: BallMenu):
    if len(menu) == 0:
        raise ValueError("menu is empty")
    if f.grid != phi.grid:
        raise ValueError("f and phi live on different grids")
    for r, pos, centers in menu.by_radius():
        idx = ball_flat_indices(f.grid, centers, r)
        yield r, pos, centers, idx, indicator_norms(phi, centers, r)


def bmo_phi(f: GridFunction, phi: GrowthFunction, menu: BallMenu) -> SeminormReport:
    contrib = np.zeros(len(menu))
    hn = f.grid.cell_measure
    flat = f.values.ravel()
    for r, pos, centers, idx, norms in _group_data(f, phi, menu):
        vals = flat[idx]
        means = vals.mean(axis=1, keepdims=True)
        contrib[pos] = np.abs(vals - means).sum(axis=1) * hn / norms
    return _report("classical", contrib, menu.balls, phi)


def _oscillation(f, phi, op, menu, p_tilde, kind):
    contrib = np.zeros(len(menu))
    grid = f.grid
    hn = grid.cell_measure
    for r, pos, centers, idx, norms in _group_data(f, phi, menu):
        g = np.abs(f.values - apply_array(op, grid, f.values, r ** op.m)).ravel()
        vals = g[idx]
        mu = idx.shape[1] * hn
        if kind == "tilde_p":
            tau = 1.0 / norms
            w = phi.at_points(idx, tau[:, None])
            if np.any(w <= 0):
                raise ValueError("phi(., 1/||chi_B||) vanishes on a menu ball")
            inner = ((vals / w) ** p_tilde * w).sum(axis=1) * hn
            contrib[pos] = inner ** (1.0 / p_tilde) / norms
        elif p_tilde == 1:
            contrib[pos] = vals.sum(axis=1) * hn / norms
        else:
            contrib[pos] = mu / norms * np.mean(vals ** p_tilde, axis=1) ** (1.0 / p_tilde)
    return _report(kind, contrib, menu.balls, phi, op, None if kind == "A" else p_tilde)


def bmo_phi_A(f: GridFunction, phi: GrowthFunction, op: KernelOp, menu: BallMenu) -> SeminormReport:
    return _oscillation(f, phi, op, menu, 1.0, "A")


def bmo_phi_A_p(f: GridFunction, phi: GrowthFunction, op: KernelOp, menu: BallMenu,
                p_tilde: float) -> SeminormReport:
    if p_tilde < 1:
        raise ValueError("p_tilde must be >= 1")
    return _oscillation(f, phi, op, menu, float(p_tilde), "A_p")


def bmo_tilde_p(f: GridFunction, phi: GrowthFunction, op: KernelOp, menu: BallMenu,
                p_tilde: float) -> SeminormReport:
    if p_tilde < 1:
        raise ValueError("p_tilde must be >= 1")
    return _oscillation(f, phi, op, menu, float(p_tilde), "tilde_p")


def default_t_samples(grid: Grid, op: KernelOp) -> np.ndarray:
    return np.array([r ** op.m for r in standard_radii(grid)])


def bmo_phi_A_max(f: GridFunction, phi: GrowthFunction, op: KernelOp, t_samples=None,
                  x_stride: int | None = None) -> SeminormReport:
    grid = f.grid
    t_samples = default_t_samples(grid, op) if t_samples is None else np.asarray(t_samples, float)
    x_stride = max(1, grid.points_per_side // 64) if x_stride is None else int(x_stride)
    xs = stride_centers(grid, x_stride)
    flat_x = np.ravel_multi_index(tuple(xs.T), grid.shape)
    contrib = []
    elements = []
    for t in t_samples:
        r = float(t) ** (1.0 / op.m)
        check_ball(grid, Ball(tuple(xs[0]), r))
        g = np.abs(f.values - apply_array(op, grid, f.values, t))
        ag = np.maximum(apply_array(op, grid, g, t).ravel()[flat_x], 0.0)
        mu = ball_point_count(grid, r) * grid.cell_measure
        norms = indicator_norms(phi, xs, r)
        contrib.append(mu / norms * ag)
        elements.extend((tuple(int(v) for v in x), float(t)) for x in xs)
    return _report("A_max", np.concatenate(contrib), elements, phi, op)


# canonical-family wB constants ----------------------------------------------


@dataclass(frozen=True)
class WBReport:
    c1: float
    c2: float
    c3: float
    witness1: object
    witness2: object
    witness3: object
    exponent: float
    note: str = "canonical-family bound"


def drift_exponent(phi: GrowthFunction, n: float | None = None, alpha: float | None = None,
                   p1: float | None = None, p: float | None = None) -> float:
    """n p1 / p - alpha from declared exponents; n = alpha = dim by default."""
    dim = phi.grid.dim
    n = dim if n is None else n
    alpha = dim if alpha is None else alpha
    p1 = phi.ap_exponent if p1 is None else p1
    p = phi.lower_type if p is None else p
    return n * p1 / p - alpha


def verify_wb_conditions(f: GridFunction, phi: GrowthFunction, op: KernelOp, menu: BallMenu,
                         nested_pairs=None, x_stride: int | None = None,
                         exponent: float | None = None) -> WBReport:
    """Constants of the three wB conditions for the family f^B = A_{t_B} f.

    wB1 is bmo_phi_A on the menu. wB2 compares radii pairs r1 < r2 (from
    `nested_pairs` of balls, or every pair of menu radii) at every x on the
    stride sublattice. wB3 uses every menu radius at those x.
    """
    grid = f.grid
    expo = drift_exponent(phi) if exponent is None else exponent
    rep1 = bmo_phi_A(f, phi, op, menu)
    x_stride = menu.center_stride if x_stride is None else int(x_stride)
    xs = stride_centers(grid, x_stride)
    flat_x = np.ravel_multi_index(tuple(xs.T), grid.shape)
    radii = sorted(set(menu.radii))
    if nested_pairs is None:
        pairs = [(a, b) for i, a in enumerate(radii) for b in radii[i + 1:]]
    else:
        pairs = sorted({(b1.radius, b2.radius) for b1, b2 in nested_pairs})
    need = sorted({r for pr in pairs for r in pr} | set(radii))
    smooth = {r: apply_array(op, grid, f.values, r ** op.m) for r in need}
    scale = {}
    for r in need:
        mu = ball_point_count(grid, r) * grid.cell_measure
        scale[r] = indicator_norms(phi, xs, r) / mu
    c2, w2 = 0.0, None
    for r1, r2 in pairs:
        if not r1 < r2:
            continue
        diff = np.abs(smooth[r2] - smooth[r1]).ravel()[flat_x]
        ratio = diff / (scale[r1] * (r2 / r1) ** expo)
        i = int(np.argmax(ratio))
        if ratio[i] > c2 or w2 is None:
            c2, w2 = float(ratio[i]), (tuple(int(v) for v in xs[i]), r1, r2)
    c3, w3 = 0.0, None
    for r in radii:
        fb = smooth[r]
        gap = np.abs(fb - apply_array(op, grid, fb, r ** op.m)).ravel()[flat_x]
        ratio = gap / scale[r]
        i = int(np.argmax(ratio))
        if ratio[i] > c3 or w3 is None:
            c3, w3 = float(ratio[i]), (tuple(int(v) for v in xs[i]), r)
    return WBReport(rep1.value, c2, c3, rep1.argmax_element, w2, w3, expo)


# structural bounds -------------------------------------------------------------


@dataclass(frozen=True)
class DriftReport:
    K: tuple[float, ...]
    ratios: tuple[float, ...]
    max_ratio: float
    exponent: float


def drift_bound_check(f: GridFunction, phi: GrowthFunction, op: KernelOp, x_samples, t: float,
                      K_ladder, seminorm: float, exponent: float | None = None) -> DriftReport:
    """max over x of |A_t f - A_{Kt} f|(x) / (K**(e/m) ||chi_{B(x, t^(1/m))}|| / mu * seminorm)."""
    seminorm = getattr(seminorm, "value", seminorm)
    if not seminorm > 0:
        raise ValueError("seminorm must be positive")
    grid = f.grid
    expo = drift_exponent(phi) if exponent is None else exponent
    xs = np.asarray(x_samples, dtype=np.int64).reshape(-1, grid.dim)
    flat_x = np.ravel_multi_index(tuple(xs.T), grid.shape)
    r = t ** (1.0 / op.m)
    check_ball(grid, Ball(tuple(xs[0]), r))
    mu = ball_point_count(grid, r) * grid.cell_measure
    scale = indicator_norms(phi, xs, r) / mu * seminorm
    base = apply_array(op, grid, f.values, t).ravel()[flat_x]
    ratios = []
    for K in K_ladder:
        if not K > 1:
            raise ValueError("K must exceed 1")
        other = apply_array(op, grid, f.values, K * t).ravel()[flat_x]
        ratios.append(float(np.max(np.abs(base - other) / (K ** (expo / op.m) * scale))))
    return DriftReport(tuple(float(k) for k in K_ladder), tuple(ratios), max(ratios), expo)


def mean_drift_check(f: GridFunction, phi: GrowthFunction, balls, K_ladder, seminorm: float,
                     exponent: float | None = None) -> DriftReport:
    """max over balls of |f_B - f_KB| / (K**e ||chi_B|| / mu(B) * seminorm)."""
    seminorm = getattr(seminorm, "value", seminorm)
    if not seminorm > 0:
        raise ValueError("seminorm must be positive")
    grid = f.grid
    expo = drift_exponent(phi) if exponent is None else exponent
    flat = f.values.ravel()
    ratios = []
    for K in K_ladder:
        if not K > 1:
            raise ValueError("K must exceed 1")
        best = 0.0
        for b in balls:
            check_ball(grid, b)
            big = check_ball(grid, b.dilate(K))
            c = np.array([b.center])
            m1 = flat[ball_flat_indices(grid, c, b.radius)[0]].mean()
            m2 = flat[ball_flat_indices(grid, c, big.radius)[0]].mean()
            mu = ball_point_count(grid, b.radius) * grid.cell_measure
            norm = indicator_norms(phi, c, b.radius)[0]
            best = max(best, abs(m1 - m2) / (K ** expo * norm / mu * seminorm))
        ratios.append(float(best))
    return DriftReport(tuple(float(k) for k in K_ladder), tuple(ratios), max(ratios), expo)


def admissibility_check(f: GridFunction, x0, beta: float, M: float, grid: Grid | None = None,
                        index_ratio: float = 1.0) -> float:
    """Discrete value of int |f| / ([1 + d]^(n r - n + beta) |B(x0, 1 + d)|), d = d(x0, x).

    x0 is a point (coordinates), d the periodic distance, r = p(phi)/i(phi) is
    `index_ratio` and |B(x0, s)| the Euclidean ball volume.
    beta must lie in (0, M - n r). On the torus the value is always finite.
    """
    grid = f.grid if grid is None else grid
    n = grid.dim
    upper = M - n * index_ratio
    if not 0 < beta < upper:
        raise ValueError(f"beta must lie in (0, {upper})")
    d = np.sqrt(sum(o ** 2 for o in periodic_offset(grid, tuple(np.atleast_1d(x0)))))
    unit = np.pi ** (n / 2) / gamma_fn(n / 2 + 1)
    vol = unit * (1 + d) ** n
    dens = np.abs(f.values) / ((1 + d) ** (n * index_ratio - n + beta) * vol)
    return float(dens.sum() * grid.cell_measure)
