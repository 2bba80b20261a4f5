"""Modular integrals and Luxembourg norms.

    ||f|| = inf{lam > 0 : sum_x phi(x, |f(x)|/lam) h^n <= 1}
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .grid import Ball, Grid, GridFunction, ball_flat_indices, check_ball
from .growth import GrowthFunction

BRACKET_LIMIT = 60
REL_WIDTH = 1e-13


class NormError(RuntimeError):
    """Bracket growth failed to cross the unit modular."""


@dataclass(frozen=True)
class NormResult:
    value: float
    modular_at_value: float
    iterations: int
    bracket: tuple[float, float]


def modular(phi: GrowthFunction, f: GridFunction, lam: float) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if f.grid != phi.grid:
        raise ValueError("growth function and f live on different grids")
    return float(phi.of_function(np.abs(f.values) / lam).sum() * f.grid.cell_measure)


def luxembourg_norm(phi: GrowthFunction, f: GridFunction, tol: float = 1e-6) -> NormResult:
    """Bisection in log(lambda) on a geometrically grown bracket."""
    if not (0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    top = float(np.max(np.abs(f.values)))
    if top == 0:
        return NormResult(0.0, 0.0, 0, (0.0, 0.0))

    def mod(lam):
        return modular(phi, f, lam)

    lo = hi = top
    m_hi = mod(hi)
    steps = 0
    if m_hi > 1:
        while m_hi > 1:
            lo, hi = hi, hi * 2
            m_hi = mod(hi)
            steps += 1
            if steps > BRACKET_LIMIT:
                raise NormError("bracket grew beyond 2**60 without crossing the unit modular")
    else:
        m_lo = m_hi
        while m_lo <= 1:
            hi, m_hi = lo, m_lo
            lo = lo / 2
            if lo < np.finfo(float).tiny:
                raise NormError("norm lies below the normal floating-point range")
            m_lo = mod(lo)
            steps += 1
            if steps > BRACKET_LIMIT:
                raise NormError("bracket shrank below 2**-60 without crossing the unit modular")
    it = 0
    while hi / lo - 1 > REL_WIDTH and it < 200:
        mid = lo * np.sqrt(hi / lo)
        m = mod(mid)
        if m > 1:
            lo = mid
        else:
            hi, m_hi = mid, m
        it += 1
    if abs(m_hi - 1) > tol:
        raise NormError(f"modular at the norm is {m_hi}, outside 1 +/- {tol}")
    return NormResult(float(hi), float(m_hi), it + steps, (float(lo), float(hi)))


# indicator norms ----------------------------------------------------------

_cache: dict[tuple, float] = {}
_cache_lock = threading.Lock()


def clear_cache() -> None:
    with _cache_lock:
        _cache.clear()


def indicator_norm(phi: GrowthFunction, ball: Ball) -> float:
    check_ball(phi.grid, ball)
    return float(indicator_norms(phi, np.array([ball.center]), ball.radius)[0])


def indicator_norms(phi: GrowthFunction, centers: np.ndarray, radius: float) -> np.ndarray:
    """||chi_B||_phi for B = B(c, radius), c in centers (cached)."""
    grid = phi.grid
    centers = np.asarray(centers, dtype=np.int64).reshape(-1, grid.dim)
    keys = [(phi.key, tuple(int(v) for v in c), float(radius)) for c in centers]
    with _cache_lock:
        got = [_cache.get(k) for k in keys]
    missing = [i for i, g in enumerate(got) if g is None]
    if missing:
        vals = _indicator_norms_uncached(phi, centers[missing], radius)
        with _cache_lock:
            for i, v in zip(missing, vals):
                _cache[keys[i]] = float(v)
                got[i] = float(v)
    return np.array(got, dtype=float)


def _indicator_norms_uncached(phi: GrowthFunction, centers: np.ndarray, radius: float) -> np.ndarray:
    grid = phi.grid
    idx = ball_flat_indices(grid, centers, radius)
    hn = grid.cell_measure
    p = phi.exponent
    if phi.family == "power":
        mass = idx.shape[1] * hn * np.ones(len(centers))
        return (phi.scale * mass) ** (1.0 / p)
    if phi.family == "weighted_power":
        mass = phi.weight.values.ravel()[idx].sum(axis=1) * hn
        return (phi.scale * mass) ** (1.0 / p)
    return _vector_bisection(phi, idx, hn)


def _vector_bisection(phi: GrowthFunction, idx: np.ndarray, hn: float) -> np.ndarray:
    """Solve sum_{y in B} phi(y, 1/lam) h^n = 1 for every ball at once."""

    def mod(lam):
        return phi.at_points(idx, 1.0 / lam[:, None]).sum(axis=1) * hn

    nb = idx.shape[0]
    lo = np.ones(nb)
    hi = np.ones(nb)
    m = mod(lo)
    for _ in range(BRACKET_LIMIT + 1):
        up = m > 1
        if not np.any(up):
            break
        lo = np.where(up, hi, lo)
        hi = np.where(up, hi * 2, hi)
        m = np.where(up, mod(hi), m)
    else:
        raise NormError("indicator norm bracket grew beyond 2**60")
    m_lo = mod(lo)
    for _ in range(BRACKET_LIMIT + 1):
        down = m_lo <= 1
        if not np.any(down):
            break
        hi = np.where(down, lo, hi)
        lo = np.where(down, lo / 2, lo)
        m_lo = np.where(down, mod(lo), m_lo)
    else:
        raise NormError("indicator norm bracket shrank below 2**-60")
    for _ in range(200):
        if np.all(hi / lo - 1 <= REL_WIDTH):
            break
        mid = lo * np.sqrt(hi / lo)
        mm = mod(mid)
        over = mm > 1
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    return hi


def indicator_function(grid: Grid, ball: Ball) -> GridFunction:
    from .grid import ball_mask
    return GridFunction(grid, ball_mask(grid, ball).astype(float))
