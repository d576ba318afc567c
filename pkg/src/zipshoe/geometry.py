"""Lipschitz curves and strips in the unit square.

A horizontal curve is a graph ``y = h(x)`` and a vertical curve a graph
``x = v(y)``, both over ``[0, 1]``.  Curves are evaluators plus a declared
Lipschitz bound; every quantity that would need a global optimum (widths,
sup-norms, validity) is computed on a uniform grid.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import ConvergenceError, PreconditionError

GRID = 2**10 + 1
TOL_FIX = 1e-12
MAX_ITER = 200

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


def unit_grid(n: int = GRID) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class LipschitzCurve:
    """Graph of a Lipschitz function ``[0, 1] -> [0, 1]``.

    ``evaluator`` must accept numpy arrays.  ``knots`` is set for polylines on a
    uniform grid, which lets batched kernels evaluate the curve directly.
    """

    orientation: str
    evaluator: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    lipschitz_bound: float
    knots: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.orientation not in (HORIZONTAL, VERTICAL):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.lipschitz_bound < 0:
            raise ValueError("Lipschitz bound must be nonnegative")

    def __call__(self, t):
        return self.evaluator(np.asarray(t, dtype=float))

    @classmethod
    def constant(cls, c: float, orientation: str) -> LipschitzCurve:
        return cls.polyline([c, c], orientation, mu=0.0)

    @classmethod
    def affine(cls, c0: float, slope: float, orientation: str) -> LipschitzCurve:
        return cls.polyline([c0, c0 + slope], orientation, mu=abs(slope))

    @classmethod
    def polyline(cls, values: Sequence[float], orientation: str,
                 mu: float | None = None) -> LipschitzCurve:
        """Piecewise-linear curve through ``values`` on a uniform grid of ``[0, 1]``."""
        vals = np.asarray(values, dtype=float).copy()
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a polyline needs at least two samples")
        vals.setflags(write=False)
        slope = float(np.max(np.abs(np.diff(vals)))) * (vals.size - 1)
        return cls(orientation, lambda t: _kernels.poly_eval(vals, t),
                   slope if mu is None else float(mu), vals)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]], orientation: str,
                    mu: float | None = None) -> LipschitzCurve:
        """Polyline through ``[[t, value], ...]`` with arbitrary increasing ``t``."""
        pts = np.asarray(points, dtype=float)
        t, v = pts[:, 0], pts[:, 1]
        if np.any(np.diff(t) <= 0):
            raise ValueError("polyline parameters must increase")
        uniform = np.allclose(t, np.linspace(t[0], t[-1], t.size)) and t[0] == 0 and t[-1] == 1
        if uniform:
            return cls.polyline(v, orientation, mu)
        slope = float(np.max(np.abs(np.diff(v) / np.diff(t))))
        return cls(orientation, lambda s: np.interp(s, t, v), slope if mu is None else float(mu))

    def samples(self, n: int = GRID) -> np.ndarray:
        return np.asarray(self(unit_grid(n)), dtype=float)

    def violations(self, n: int = GRID, tol: float = 1e-12) -> list[str]:
        """Grid checks of range and difference quotients."""
        t = unit_grid(n)
        v = np.asarray(self(t), dtype=float)
        out = []
        if v.min() < -tol or v.max() > 1 + tol:
            out.append(f"range [{v.min():.6g}, {v.max():.6g}] leaves [0, 1]")
        q = np.max(np.abs(np.diff(v))) / (t[1] - t[0])
        if q > self.lipschitz_bound + 1e-9:
            out.append(f"difference quotient {q:.6g} exceeds bound {self.lipschitz_bound:.6g}")
        return out


@dataclass(frozen=True)
class Strip:
    """Region between two non-crossing curves of the same orientation."""

    lower: LipschitzCurve
    upper: LipschitzCurve
    allow_degenerate: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.lower.orientation != self.upper.orientation:
            raise ValueError("strip boundaries must share an orientation")
        lo, up = self.lower.samples(), self.upper.samples()
        gap = up - lo
        if self.allow_degenerate:
            if gap.min() < 0:
                raise ValueError("strip boundaries cross")
        elif gap.min() <= 0:
            raise ValueError("strip boundaries must satisfy lower < upper on the grid")

    @property
    def orientation(self) -> str:
        return self.lower.orientation

    @property
    def mu(self) -> float:
        return max(self.lower.lipschitz_bound, self.upper.lipschitz_bound)

    def to_dict(self, n: int = 65) -> dict:
        t = unit_grid(n)
        return {"orientation": self.orientation,
                "lower": [[float(a), float(b)] for a, b in zip(t, self.lower(t))],
                "upper": [[float(a), float(b)] for a, b in zip(t, self.upper(t))],
                "mu": self.mu}

    @classmethod
    def from_dict(cls, data: dict) -> Strip:
        o, mu = data["orientation"], data.get("mu")
        return cls(LipschitzCurve.from_points(data["lower"], o, mu),
                   LipschitzCurve.from_points(data["upper"], o, mu))


def sup_distance(a: LipschitzCurve, b: LipschitzCurve, n: int = GRID) -> float:
    """``max_t |a(t) - b(t)|`` on the grid."""
    t = unit_grid(n)
    return float(np.max(np.abs(np.asarray(a(t)) - np.asarray(b(t)))))


def strip_width(s: Strip, n: int = GRID) -> float:
    return sup_distance(s.upper, s.lower, n)


def width_slack(s: Strip, n: int = GRID) -> float:
    """Bound on how far the true width can exceed the grid width."""
    return (s.lower.lipschitz_bound + s.upper.lipschitz_bound) / (n - 1)


class Intersection(NamedTuple):
    x: float
    y: float
    iterations: int
    residual: float
    trace: tuple[float, ...] = ()


def curve_intersection(h: LipschitzCurve, v: LipschitzCurve, tol: float = TOL_FIX,
                       max_iter: int = MAX_ITER, x0: float = 0.5,
                       trace: bool = False) -> Intersection:
    """Unique point where a horizontal and a vertical curve cross.

    Iterates ``x -> v(h(x))``, a contraction with rate ``mu_v * mu_h``.
    """
    if h.orientation != HORIZONTAL or v.orientation != VERTICAL:
        raise PreconditionError("need a horizontal curve and a vertical curve")
    if h.lipschitz_bound * v.lipschitz_bound >= 1:
        raise PreconditionError("mu_h * mu_v must be < 1 for a contraction")
    x = float(x0)
    hist = [x]
    for n in range(1, max_iter + 1):
        xn = float(v(h(x)))
        if trace:
            hist.append(xn)
        if abs(xn - x) <= tol:
            y = float(h(xn))
            res = max(abs(xn - float(v(y))), 0.0)
            return Intersection(xn, y, n, res, tuple(hist))
        x = xn
    raise ConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps")


def curve_intersections(hvals: np.ndarray, vvals: np.ndarray, tol: float = TOL_FIX,
                        max_iter: int = MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Batched intersections of uniform polylines, one pair per row."""
    hvals = np.atleast_2d(hvals)
    vvals = np.atleast_2d(vvals)
    x, y, it = _kernels.polyline_fixed_point(hvals, vvals, np.full(hvals.shape[0], 0.5),
                                             tol, max_iter)
    if np.any(it < 0):
        raise ConvergenceError(f"{int(np.sum(it < 0))} intersections did not converge")
    return x, y


class GapBound(NamedTuple):
    measured: float
    bound: float


def intersection_gap(Hs: Strip, Vs: Strip, norm: str = "euclidean") -> float:
    """Distance between lower/lower and upper/upper boundary intersections."""
    z1 = curve_intersection(Hs.lower, Vs.lower)
    z2 = curve_intersection(Hs.upper, Vs.upper)
    dx, dy = abs(z1.x - z2.x), abs(z1.y - z2.y)
    if norm == "euclidean":
        return float(np.hypot(dx, dy))
    if norm == "sup":
        return max(dx, dy)
    raise ValueError(f"unknown norm {norm!r}")


def intersection_gap_bound(Hs: Strip, Vs: Strip, n: int = GRID,
                           norm: str = "euclidean") -> GapBound:
    """Measured ``|z1 - z2|`` next to ``(||v - v'|| + ||h - h'||) / (1 - mu)``."""
    if Hs.orientation != HORIZONTAL or Vs.orientation != VERTICAL:
        raise PreconditionError("need a horizontal strip and a vertical strip")
    mu = Hs.mu * Vs.mu
    if mu >= 1:
        raise PreconditionError("mu_h * mu_v must be < 1")
    bound = (sup_distance(Vs.lower, Vs.upper, n) + sup_distance(Hs.lower, Hs.upper, n)) / (1 - mu)
    return GapBound(intersection_gap(Hs, Vs, norm), bound)


def gap_bounds_batch(h_lo, h_up, v_lo, v_up, mu_h, mu_v, norm: str = "euclidean"):
    """Vectorized gap/bound pairs for polyline strips sharing one uniform grid.

    Norms are exact here: the difference of two polylines on common knots is
    itself a polyline, so its maximum sits on a knot.
    """
    x1, y1 = curve_intersections(h_lo, v_lo)
    x2, y2 = curve_intersections(h_up, v_up)
    dx, dy = np.abs(x1 - x2), np.abs(y1 - y2)
    gap = np.hypot(dx, dy) if norm == "euclidean" else np.maximum(dx, dy)
    mu = np.asarray(mu_h) * np.asarray(mu_v)
    bound = (np.max(np.abs(v_up - v_lo), axis=-1) + np.max(np.abs(h_up - h_lo), axis=-1)) / (1 - mu)
    return gap, bound


def contains(outer: Strip, inner: Strip, n: int = GRID, tol: float = 1e-12) -> bool:
    t = unit_grid(n)
    return bool(np.all(inner.lower(t) >= outer.lower(t) - tol)
                and np.all(inner.upper(t) <= outer.upper(t) + tol))


def nested_limit(strips: Sequence[Strip], n: int = GRID) -> tuple[LipschitzCurve, float]:
    """Approximate the curve ``∩ strips`` by the midcurve of the last strip.

    Returns the midcurve and an error bound (half the last width plus grid slack).
    """
    if not strips:
        raise PreconditionError("need at least one strip")
    o = strips[0].orientation
    widths = []
    for k, s in enumerate(strips):
        if s.orientation != o:
            raise PreconditionError("strips must share an orientation")
        if k and not contains(strips[k - 1], s, n):
            raise PreconditionError(f"strip {k} is not nested in strip {k - 1}")
        widths.append(strip_width(s, n))
    if any(b >= a for a, b in zip(widths, widths[1:])):
        raise PreconditionError("strip widths must strictly decrease")
    last = strips[-1]
    t = unit_grid(n)
    mid = 0.5 * (np.asarray(last.lower(t)) + np.asarray(last.upper(t)))
    curve = LipschitzCurve.polyline(mid, o, mu=last.mu)
    return curve, widths[-1] / 2 + width_slack(last, n)


@dataclass(frozen=True)
class StripFamily:
    """Rows of strips sharing an orientation and a uniform sampling grid.

    ``words[r]`` holds alphabet indices naming row ``r``; ``lower[r]`` and
    ``upper[r]`` are its boundary polylines.
    """

    orientation: str
    words: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __len__(self) -> int:
        return self.lower.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return unit_grid(self.lower.shape[1])

    @property
    def widths(self) -> np.ndarray:
        return np.max(self.upper - self.lower, axis=1)

    @property
    def min_gaps(self) -> np.ndarray:
        return np.min(self.upper - self.lower, axis=1)

    def strip(self, r: int) -> Strip:
        mu_lo = float(np.max(np.abs(np.diff(self.lower[r])))) * (self.lower.shape[1] - 1)
        mu_up = float(np.max(np.abs(np.diff(self.upper[r])))) * (self.upper.shape[1] - 1)
        return Strip(LipschitzCurve.polyline(self.lower[r], self.orientation, mu_lo),
                     LipschitzCurve.polyline(self.upper[r], self.orientation, mu_up),
                     allow_degenerate=True)

    def lipschitz(self) -> float:
        g = self.lower.shape[1] - 1
        if g == 0:
            return 0.0
        return float(max(np.max(np.abs(np.diff(self.lower, axis=1))),
                         np.max(np.abs(np.diff(self.upper, axis=1)))) * g)

    def bounding_boxes(self) -> np.ndarray:
        """``[lo, hi]`` range of each row in the coordinate the curves measure."""
        return np.stack([self.lower.min(axis=1), self.upper.max(axis=1)], axis=1)

    def take(self, rows) -> StripFamily:
        return StripFamily(self.orientation, self.words[rows], self.lower[rows], self.upper[rows])


def family_nested(parent: StripFamily, child: StripFamily, parent_rows: np.ndarray,
                  tol: float = 1e-12) -> np.ndarray:
    """Per child row, whether it lies inside ``parent[parent_rows[row]]``."""
    lo_ok = child.lower >= parent.lower[parent_rows] - tol
    up_ok = child.upper <= parent.upper[parent_rows] + tol
    return np.all(lo_ok & up_ok, axis=1)


def _random_walk_polylines(rng: np.random.Generator, mu: float, n: int, knots: int) -> np.ndarray:
    steps = rng.uniform(-mu, mu, (n, knots - 1)) / (knots - 1)
    v = np.concatenate([np.zeros((n, 1)), np.cumsum(steps, axis=1)], axis=1)
    lo, hi = v.min(axis=1, keepdims=True), v.max(axis=1, keepdims=True)
    return v + rng.uniform(-lo, 0.7 - hi)


def random_strip_pairs(rng: np.random.Generator, mu: float, n: int,
                       knots: int = 17) -> tuple[np.ndarray, np.ndarray]:
    """``n`` random polyline strips with boundary slopes in ``[-mu, mu]``.

    The lower boundary is a random walk; the upper one is the pointwise max
    of ``lower + d`` (``d`` uniform in ``[0, 0.3]``) and an independent walk,
    clipped to 1.  Both stay ``mu``-Lipschitz.  Requires ``mu <= 0.7``.
    """
    lower = _random_walk_polylines(rng, mu, n, knots)
    other = _random_walk_polylines(rng, mu, n, knots)
    d = rng.uniform(0.0, 0.3, (n, 1))
    upper = np.minimum(np.maximum(lower + d, other), 1.0)
    return lower, upper
