"""Level-set distributions of f - A_{t_B} f and their decay fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bmo import bmo_phi_A
from .grid import Ball, GridFunction, ball_flat_indices, check_ball, standard_menu
from .growth import GrowthFunction
from .luxembourg import indicator_norm
from .semigroup import KernelOp, apply_array

FLOOR_CELLS = 4
HEAD_FRACTION = 0.9
TAIL_FRACTION = 0.1


class FitError(ValueError):
    """Too few usable points for a decay fit."""


class NotAdmissible(ArithmeticError):
    """The exponential average overflows at the requested coefficient."""


@dataclass(frozen=True)
class DistributionCurve:
    """Measures of {x in B : q(x) > lambda} on an increasing lambda grid.

    `normalization` multiplies lambda in the exponential bound; `poly_normalization`
    is the factor inside the polynomial bound. `total` is mu(B) (or phi(B, tau)),
    `counts` the number of cells in each level set.
    """

    ball: Ball
    lambdas: np.ndarray = field(repr=False)
    measures: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    normalization: float
    total: float
    weighted: bool = False
    poly_normalization: float | None = None
    time_slot: float | None = None


@dataclass(frozen=True)
class DecayFit:
    c1: float
    c2: float
    r2: float
    lambda_range: tuple[float, float]
    points: int
    slope: float
    intercept: float


@dataclass(frozen=True)
class PolyFit:
    b1: float
    b2: float
    r2: float
    slope: float
    lambda_range: tuple[float, float]
    points: int
    exponential_dominated: bool


def _seminorm(f, phi, op, seminorm):
    if seminorm is None:
        seminorm = bmo_phi_A(f, phi, op, standard_menu(f.grid)).value
    seminorm = float(getattr(seminorm, "value", seminorm))
    if not seminorm > 0:
        raise ValueError("zero seminorm: the distribution is not normalizable")
    return seminorm


def _oscillation_on_ball(f, op, ball):
    grid = f.grid
    check_ball(grid, ball)
    t = ball.radius ** op.m
    g = np.abs(f.values - apply_array(op, grid, f.values, t)).ravel()
    idx = ball_flat_indices(grid, np.array([ball.center]), ball.radius)[0]
    return g, idx


def _check_lambdas(lambdas):
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be positive and strictly increasing")
    return lam


def _level_masses(q: np.ndarray, mass: np.ndarray, lam: np.ndarray):
    """Mass and cell count of {q > lam} for each lam, via sorting."""
    order = np.argsort(q, kind="stable")
    qs = q[order]
    tail = np.concatenate([np.cumsum(mass[order][::-1])[::-1], [0.0]])
    k = np.searchsorted(qs, lam, side="right")
    return tail[k], q.size - k


def jn_distribution(f: GridFunction, phi: GrowthFunction, op: KernelOp, ball: Ball, lambdas,
                    seminorm=None) -> DistributionCurve:
    """mu({x in B : |f - A_{t_B} f| > lambda}); normalization mu(B)/(||chi_B|| ||f||)."""
    lam = _check_lambdas(lambdas)
    s = _seminorm(f, phi, op, seminorm)
    grid = f.grid
    g, idx = _oscillation_on_ball(f, op, ball)
    hn = grid.cell_measure
    q = g[idx]
    meas, counts = _level_masses(q, np.full(q.size, hn), lam)
    mu = idx.size * hn
    norm = indicator_norm(phi, ball)
    return DistributionCurve(ball, lam, meas, counts, mu / (norm * s), mu)


def jn_weighted_distribution(f: GridFunction, phi: GrowthFunction, op: KernelOp, ball: Ball,
                             lambdas, seminorm=None) -> DistributionCurve:
    """phi(E_lambda, tau) with E_lambda = {x in B : |f - A_{t_B} f| / phi(x, tau) > lambda}.

    tau = 1/||chi_B||. normalization is 1/(||chi_B|| ||f||) and poly_normalization
    phi(B, tau)/(||chi_B|| ||f||).
    """
    lam = _check_lambdas(lambdas)
    s = _seminorm(f, phi, op, seminorm)
    grid = f.grid
    g, idx = _oscillation_on_ball(f, op, ball)
    hn = grid.cell_measure
    norm = indicator_norm(phi, ball)
    tau = 1.0 / norm
    w = phi.at_points(idx, tau)
    if np.any(w <= 0):
        raise ValueError("phi(., 1/||chi_B||) vanishes on the ball")
    q = g[idx] / w
    mass = w * hn
    meas, counts = _level_masses(q, mass, lam)
    total = float(mass.sum())
    return DistributionCurve(ball, lam, meas, counts, 1.0 / (norm * s), total, weighted=True,
                             poly_normalization=total / (norm * s), time_slot=tau)


def _usable(curve: DistributionCurve, head: float = HEAD_FRACTION):
    """Points with at least FLOOR_CELLS cells and measure <= head * total."""
    lam, mu = curve.lambdas, curve.measures
    keep = (curve.counts >= FLOOR_CELLS) & (mu <= head * curve.total) & (mu > 0)
    lam, mu = lam[keep], mu[keep]
    # plateaus from discreteness: keep the first lambda of each distinct measure
    if mu.size:
        first = np.concatenate([[True], mu[1:] != mu[:-1]])
        lam, mu = lam[first], mu[first]
    return lam, mu


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(min(max(r2, 0.0), 1.0))


def fit_exponential(curve: DistributionCurve) -> DecayFit:
    """Least squares of log mu_lambda on lambda over the usable range."""
    lam, mu = _usable(curve)
    if lam.size < 5:
        raise FitError(f"only {lam.size} usable points (need 5)")
    slope, intercept, r2 = _linfit(lam, np.log(mu))
    c2 = -slope / curve.normalization
    c1 = np.exp(intercept) / curve.total
    return DecayFit(float(c1), float(c2), r2, (float(lam[0]), float(lam[-1])), int(lam.size),
                    slope, intercept)


def bound_excess(curve: DistributionCurve, fit: DecayFit) -> float:
    """max over the fit range of mu_lambda / (c1 mu(B) exp(-c2 s lambda))."""
    lam, mu = _usable(curve)
    bound = fit.c1 * curve.total * np.exp(-fit.c2 * curve.normalization * lam)
    return float(np.max(mu / bound))


def fit_polynomial_tail(curve: DistributionCurve, p1_conj: float,
                        tail: float = TAIL_FRACTION) -> PolyFit:
    """Least squares of log mu_lambda on log lambda over the tail.

    The tail is the usable range with mu_lambda <= tail * total, where the
    polynomial branch of min{1, b2 (s lambda)^-p1'} is the active one.

    With slope k and intercept a, mu ~ e^a lambda^k, reported as
    b1 * b2 * (s lambda)^k with b1 = total and s the polynomial normalization.
    The curve is flagged exponential-dominated when the local slope steepens
    by more than 1.5x from the first to the last third and the overall slope
    is steeper than -p1'.
    """
    lam, mu = _usable(curve, tail)
    if lam.size < 5:
        raise FitError(f"only {lam.size} usable points (need 5)")
    x, y = np.log(lam), np.log(mu)
    slope, intercept, r2 = _linfit(x, y)
    s = curve.poly_normalization if curve.poly_normalization is not None else curve.normalization
    b1 = curve.total
    b2 = np.exp(intercept) / (b1 * s ** slope)
    k = max(2, x.size // 3)
    first = np.polyfit(x[:k], y[:k], 1)[0]
    last = np.polyfit(x[-k:], y[-k:], 1)[0]
    flagged = bool(slope < -p1_conj and last < 1.5 * first and first < 0)
    return PolyFit(float(b1), float(b2), r2, slope, (float(lam[0]), float(lam[-1])), int(lam.size),
                   flagged)


def exp_integrability(f: GridFunction, phi: GrowthFunction, op: KernelOp, ball: Ball,
                      lambda_coef: float, seminorm=None) -> float:
    """(1/mu(B)) int_B exp(lambda_coef * s * |f - A_{t_B} f|), s = mu(B)/(||chi_B|| ||f||)."""
    if not lambda_coef > 0:
        raise ValueError("lambda_coef must be positive")
    s = _seminorm(f, phi, op, seminorm)
    grid = f.grid
    g, idx = _oscillation_on_ball(f, op, ball)
    mu = idx.size * grid.cell_measure
    norm = indicator_norm(phi, ball)
    expo = lambda_coef * mu / (norm * s) * g[idx]
    if np.max(expo) > 700:
        raise NotAdmissible(f"not admissible at lambda={lambda_coef}: exponent {np.max(expo):.1f}")
    return float(np.mean(np.exp(expo)))


def admissible_lambda(f: GridFunction, phi: GrowthFunction, op: KernelOp, ball: Ball,
                      start: float, cap: float = 10.0, seminorm=None, max_halvings: int = 60):
    """Halve lambda_coef from `start` until the exponential average is below `cap`.

    Returns (lambda_coef, value).
    """
    s = _seminorm(f, phi, op, seminorm)
    lam = float(start)
    for _ in range(max_halvings):
        try:
            v = exp_integrability(f, phi, op, ball, lam, s)
            if v <= cap:
                return lam, v
        except NotAdmissible:
            pass
        lam /= 2
    raise NotAdmissible("no admissible lambda found")


def normalized_lambdas(curve_normalization: float, lo: float = 0.1, hi: float = 20.0,
                       points: int = 80) -> np.ndarray:
    """Geometric lambda grid with lambda * normalization spanning [lo, hi]."""
    return np.geomspace(lo, hi, points) / curve_normalization


def oscillation_max(f: GridFunction, op: KernelOp, ball: Ball) -> float:
    """max over B of |f - A_{t_B} f|."""
    g, idx = _oscillation_on_ball(f, op, ball)
    return float(g[idx].max())


def distribution_normalization(f, phi, op, ball, seminorm=None) -> float:
    s = _seminorm(f, phi, op, seminorm)
    mu = ball_flat_indices(f.grid, np.array([ball.center]), ball.radius).shape[1] * f.grid.cell_measure
    return mu / (indicator_norm(phi, ball) * s)
