"""Growth functions phi(x, t) and weight diagnostics.

Families:
    power           c * t**p
    weighted_power  c * w(x) * t**p
    log_type        c * t**s / (ln(e + d(x, x0))**beta + ln(e + t)**gamma)
    ky_log          c * t**p / (ln(e + |x - x0|) + ln(e + t**p))**p
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import (Ball, BallMenu, Grid, GridError, GridFunction, ball_flat_indices, ball_mask,
                   ball_measure, check_ball)

FAMILIES = ("power", "weighted_power", "log_type", "ky_log")


def default_t_samples() -> np.ndarray:
    return 2.0 ** np.arange(-20, 21)


def periodic_offset(grid: Grid, anchor: Sequence[float]) -> tuple[np.ndarray, ...]:
    """Per-axis periodic displacement x - anchor wrapped into [-L/2, L/2)."""
    L = grid.side_length
    out = []
    for x, a in zip(grid.coordinates(), anchor):
        out.append((x - a + L / 2) % L - L / 2)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class GrowthFunction:
    grid: Grid
    family: str
    exponent: float
    beta: float = 0.0
    gamma: float = 0.0
    anchor: tuple[float, ...] = ()
    weight: GridFunction | None = field(default=None, repr=False)
    lower_type: float | None = None
    upper_type: float | None = None
    ap_exponent: float = 1.0
    rh_exponent: float = np.inf
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown growth family {self.family!r}")
        if not self.exponent > 0:
            raise ValueError("growth exponent must be positive")
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be nonnegative")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        anchor = tuple(float(a) for a in self.anchor) or (0.0,) * self.grid.dim
        if len(anchor) != self.grid.dim:
            raise ValueError("anchor dimension does not match grid")
        object.__setattr__(self, "anchor", anchor)
        if self.family == "weighted_power":
            if self.weight is None or self.weight.grid != self.grid:
                raise ValueError("weighted_power needs a weight on the same grid")
            if np.any(self.weight.values <= 0):
                raise ValueError("weight must be strictly positive")
        if self.lower_type is None:
            object.__setattr__(self, "lower_type", float(self.exponent))
        if self.upper_type is None:
            object.__setattr__(self, "upper_type", float(self.exponent))
        if self.upper_type > 1 + 1e-12:
            raise ValueError("declared upper type must be <= 1")
        object.__setattr__(self, "_spatial", self._spatial_factor())
        object.__setattr__(self, "_key", self._make_key())

    # evaluation ----------------------------------------------------------

    def _spatial_factor(self) -> np.ndarray | None:
        if self.family == "power":
            return None
        if self.family == "weighted_power":
            return self.weight.values
        d = np.sqrt(sum(o ** 2 for o in periodic_offset(self.grid, self.anchor)))
        if self.family == "log_type":
            return np.log(np.e + d) ** self.beta
        return np.log(np.e + d)

    def _formula(self, spatial, t, scaled=True):
        t = np.asarray(t, dtype=float)
        p = self.exponent
        c = self.scale if scaled else 1.0
        if self.family == "power":
            out = c * t ** p
            return out if spatial is None else np.broadcast_to(out, np.broadcast(out, spatial).shape)
        if self.family == "weighted_power":
            return c * spatial * t ** p
        if self.family == "log_type":
            return c * t ** p / (spatial + np.log(np.e + t) ** self.gamma)
        tp = t ** p
        return c * tp / (spatial + np.log(np.e + tp)) ** p

    def values(self, t: float, scaled: bool = True) -> np.ndarray:
        """phi(., t) on the whole grid."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        sp = self._spatial if self._spatial is not None else np.ones(self.grid.shape)
        return np.asarray(self._formula(sp, t, scaled), dtype=float).reshape(self.grid.shape)

    def at_points(self, flat_idx: np.ndarray, t, scaled: bool = True) -> np.ndarray:
        """phi at flat grid indices, with t broadcast against the index array."""
        sp = None if self._spatial is None else self._spatial.ravel()[flat_idx]
        if sp is None:
            sp = np.ones(np.shape(flat_idx))
        return np.asarray(self._formula(sp, t, scaled), dtype=float)

    def of_function(self, values: np.ndarray, scaled: bool = True) -> np.ndarray:
        """phi(x, values(x)) pointwise on the grid."""
        v = np.asarray(values, dtype=float).reshape(self.grid.shape)
        if np.any(v < 0):
            raise ValueError("t must be nonnegative")
        sp = self._spatial if self._spatial is not None else np.ones(self.grid.shape)
        return np.asarray(self._formula(sp, v, scaled), dtype=float)

    def scaled(self, c: float) -> "GrowthFunction":
        return _replace(self, scale=self.scale * c)

    @property
    def key(self) -> str:
        return self._key

    @property
    def closed_form_indicator(self) -> bool:
        return self.family in ("power", "weighted_power")

    def _make_key(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.grid, self.family, self.exponent, self.beta, self.gamma, self.anchor,
                       self.scale)).encode())
        if self.weight is not None:
            h.update(self.weight.values.tobytes())
        return h.hexdigest()[:16]

    def label(self) -> str:
        if self.family == "power":
            s = f"power(p={self.exponent:g})"
        elif self.family == "weighted_power":
            s = f"weighted_power(p={self.exponent:g})"
        elif self.family == "log_type":
            s = f"log_type(s={self.exponent:g},beta={self.beta:g},gamma={self.gamma:g})"
        else:
            s = f"ky_log(p={self.exponent:g})"
        return s if self.scale == 1.0 else f"{self.scale:g}*{s}"


def _replace(phi: GrowthFunction, **changes) -> GrowthFunction:
    kw = dict(grid=phi.grid, family=phi.family, exponent=phi.exponent, beta=phi.beta,
              gamma=phi.gamma, anchor=phi.anchor, weight=phi.weight, lower_type=phi.lower_type,
              upper_type=phi.upper_type, ap_exponent=phi.ap_exponent,
              rh_exponent=phi.rh_exponent, scale=phi.scale)
    kw.update(changes)
    return GrowthFunction(**kw)


def power(grid: Grid, p: float = 1.0, scale: float = 1.0) -> GrowthFunction:
    return GrowthFunction(grid, "power", p, scale=scale, ap_exponent=1.0, rh_exponent=np.inf)


def weighted_power(grid: Grid, weight: GridFunction, p: float = 1.0, ap_exponent: float = 2.0,
                   rh_exponent: float = 2.0, scale: float = 1.0) -> GrowthFunction:
    return GrowthFunction(grid, "weighted_power", p, weight=weight, ap_exponent=ap_exponent,
                          rh_exponent=rh_exponent, scale=scale)


def log_type(grid: Grid, s: float = 1.0, beta: float = 0.0, gamma: float = 0.0,
             anchor: Sequence[float] = (), scale: float = 1.0) -> GrowthFunction:
    return GrowthFunction(grid, "log_type", s, beta=beta, gamma=gamma, anchor=tuple(anchor),
                          scale=scale, ap_exponent=1.0)


def ky_log(grid: Grid, p_tilde: float = 1.0, anchor: Sequence[float] = (),
           lower_type: float | None = None, scale: float = 1.0) -> GrowthFunction:
    return GrowthFunction(grid, "ky_log", p_tilde, anchor=tuple(anchor), scale=scale,
                          lower_type=lower_type, upper_type=p_tilde, ap_exponent=1.0)


def _periodic_power_primitive(x: np.ndarray, a: float, L: float) -> np.ndarray:
    """int_0^x d(y)**a dy for |x| <= L, d the periodic distance to 0 (odd in x)."""
    u = np.abs(x)
    half = (L / 2) ** (a + 1) / (a + 1)
    near = u ** (a + 1) / (a + 1)
    far = 2 * half - np.clip(L - u, 0, None) ** (a + 1) / (a + 1)
    return np.sign(x) * np.where(u <= L / 2, near, far)


def radial_power_weight(grid: Grid, exponent: float, anchor: Sequence[float] = (),
                        subsamples: int = 8) -> GridFunction:
    """Cell averages of |x - anchor|**exponent (periodic distance).

    In 1D the averages are exact. In 2D they use `subsamples` points per axis
    inside each cell. Either way the weight stays finite and strictly positive
    at the anchor.
    """
    if exponent <= -grid.dim:
        raise ValueError("exponent must exceed -dim for a locally integrable weight")
    anchor = tuple(anchor) or (0.0,) * grid.dim
    h = grid.spacing
    offs = periodic_offset(grid, anchor)
    if grid.dim == 1:
        o, L = offs[0], grid.side_length
        F = _periodic_power_primitive
        return GridFunction(grid, (F(o + h / 2, exponent, L) - F(o - h / 2, exponent, L)) / h)
    sub = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    acc = np.zeros(grid.shape)
    for a in sub:
        for b in sub:
            acc += np.hypot(offs[0] + a * h, offs[1] + b * h) ** exponent
    acc /= subsamples ** 2
    return GridFunction(grid, acc)


def eval_growth(phi: GrowthFunction, x: Sequence[int], t: float) -> float:
    """phi at grid index `x` and time `t`."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    idx = phi.grid._check_index(x)
    flat = np.ravel_multi_index(idx, phi.grid.shape)
    return float(phi.at_points(np.array([flat]), t)[0])


# weight diagnostics ------------------------------------------------------


@dataclass(frozen=True)
class WeightReport:
    kind: str
    exponent: float
    constant: float
    argmax_ball: int
    argmax_t: float
    ball: Ball


def _sweep(phi: GrowthFunction, menu: BallMenu, t_samples, stat) -> tuple[float, int, float]:
    """Max over menu x t_samples of stat(weight values on ball points)."""
    best = (-np.inf, -1, np.nan)
    t_samples = np.asarray(t_samples, dtype=float)
    if t_samples.size == 0 or np.any(t_samples <= 0):
        raise ValueError("t_samples must be positive and nonempty")
    if len(menu) == 0:
        raise ValueError("menu is empty")
    groups = [(pos, ball_flat_indices(phi.grid, centers, r)) for r, pos, centers in menu.by_radius()]
    for t in t_samples:
        w = phi.values(t, scaled=False).ravel()
        for pos, idx in groups:
            vals = w[idx]
            if np.any(vals <= 0):
                raise ValueError(f"growth function vanishes on a menu ball at t={t}")
            s = stat(vals)
            i = int(np.argmax(s))
            if s[i] > best[0]:
                best = (float(s[i]), int(pos[i]), float(t))
    return best


def ap_constant(phi: GrowthFunction, menu: BallMenu, p: float, t_samples=None) -> WeightReport:
    """Uniform Muckenhoupt A_p constant over menu x t_samples.

    Uses the unscaled profile, so the result is invariant under phi -> c*phi.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    t_samples = default_t_samples() if t_samples is None else t_samples
    if p == 1:
        def stat(v):
            return v.mean(axis=1) / v.min(axis=1)
    else:
        def stat(v):
            return v.mean(axis=1) * np.mean(v ** (-1.0 / (p - 1)), axis=1) ** (p - 1)
    c, i, t = _sweep(phi, menu, t_samples, stat)
    return WeightReport("A_p", float(p), c, i, t, menu.balls[i])


def rh_constant(phi: GrowthFunction, menu: BallMenu, q: float, t_samples=None) -> WeightReport:
    """Uniform reverse Hoelder RH_q constant over menu x t_samples."""
    if not q > 1:
        raise ValueError("q must be > 1")
    t_samples = default_t_samples() if t_samples is None else t_samples
    if np.isinf(q):
        def stat(v):
            return v.max(axis=1) / v.mean(axis=1)
    else:
        def stat(v):
            return np.mean(v ** q, axis=1) ** (1.0 / q) / v.mean(axis=1)
    c, i, t = _sweep(phi, menu, t_samples, stat)
    return WeightReport("RH_q", float(q), c, i, t, menu.balls[i])


@dataclass(frozen=True)
class TypeProbe:
    lower: float | None
    upper: float | None
    lower_witness: tuple | None
    upper_witness: tuple | None


def type_exponent_probe(phi: GrowthFunction, x_samples, t_samples, s_samples,
                        c_candidates: Sequence[float] = (1.0, 1.5, 2.0)) -> TypeProbe:
    """Sampled uniform lower/upper type exponents.

    For each candidate C, the largest p (s < 1) or smallest p (s > 1) with
    phi(x, s t) <= C s**p phi(x, t) on every sample; the best candidate wins.
    Witnesses are the binding (x, t, s) samples.
    """
    x_samples = [tuple(np.atleast_1d(x)) for x in x_samples]
    t_samples = np.asarray(t_samples, dtype=float)
    s_samples = np.asarray(s_samples, dtype=float)
    if not x_samples or t_samples.size == 0 or s_samples.size == 0:
        raise ValueError("sample sets must be nonempty")
    flat = np.array([np.ravel_multi_index(x, phi.grid.shape) for x in x_samples])
    X, T, S = np.meshgrid(np.arange(len(flat)), t_samples, s_samples, indexing="ij")
    base = phi.at_points(flat[X], T, scaled=False)
    moved = phi.at_points(flat[X], S * T, scaled=False)
    logratio = np.log(moved) - np.log(base)
    logs = np.log(S)

    def probe(sel, lower):
        if not np.any(sel):
            return None, None
        best_p, best_w = None, None
        for c in c_candidates:
            bound = (logratio[sel] - np.log(c)) / logs[sel]
            k = int(np.argmin(bound) if lower else np.argmax(bound))
            p = float(bound[k])
            if best_p is None or (p > best_p if lower else p < best_p):
                j = np.flatnonzero(sel.ravel())[k]
                xi, ti, si = np.unravel_index(j, X.shape)
                best_p, best_w = p, (x_samples[xi], float(t_samples[ti]), float(s_samples[si]), c)
        return best_p, best_w

    lo, lw = probe(S < 1, True)
    up, uw = probe(S > 1, False)
    return TypeProbe(lo, up, lw, uw)


def balls_nested(grid: Grid, inner: Ball, outer: Ball) -> bool:
    a, b = ball_mask(grid, inner), ball_mask(grid, outer)
    return bool(np.all(b[a]))


def check_afnj(phi: GrowthFunction, nested_pairs) -> float:
    """max over pairs B1 in B2 of (||chi_B1||/mu(B1)) / (||chi_B2||/mu(B2))."""
    from .luxembourg import indicator_norm

    best = 0.0
    pairs = list(nested_pairs)
    if not pairs:
        raise ValueError("no ball pairs given")
    for b1, b2 in pairs:
        check_ball(phi.grid, b1)
        check_ball(phi.grid, b2)
        if not balls_nested(phi.grid, b1, b2):
            raise GridError(f"balls are not nested: {b1} in {b2}")
        left = indicator_norm(phi, b1) / ball_measure(phi.grid, b1)
        right = indicator_norm(phi, b2) / ball_measure(phi.grid, b2)
        best = max(best, left / right)
    return best


def nested_pairs_from_menu(menu: BallMenu, grid: Grid) -> list[tuple[Ball, Ball]]:
    """Concentric pairs (B(c, r1), B(c, r2)) with r1 < r2 from the menu."""
    radii = sorted(set(menu.radii))
    centers = sorted({b.center for b in menu.balls})
    return [(Ball(c, r1), Ball(c, r2)) for c in centers for i, r1 in enumerate(radii)
            for r2 in radii[i + 1:]]
