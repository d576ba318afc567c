"""Piecewise-affine N-to-1 horseshoe with strip verification and refinement.

The unit square is stretched horizontally by ``alpha = 2N + eps``, folded
into ``N`` tent bands, and bent into two legs ``a`` and ``b``.  Each of the
``2N`` branches maps a thin vertical strip onto one of two horizontal strips
``H_a`` (height ``beta = 1/alpha`` at ``y_a``) and ``H_b`` (at ``y_b``).
Branch ``(k, a)`` is labelled ``"k+1"`` and ``(k, b)`` is ``"(k+1)p"``.

``StripModel`` holds everything that only needs the branch maps and their
strip families, so the same verifiers run on the perturbed models built in
:mod:`zipshoe.stability`.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, DomainError, EscapeError, PreconditionError
from .geometry import HORIZONTAL, VERTICAL, StripFamily, family_nested, unit_grid
from .reports import Report
from .symbolic_core import ZipSystem, check_cap

TOL = 1e-12
CHECK_GRID = 33
DEFAULT_APERTURE = (0.3, 0.3)


@dataclass(frozen=True)
class HorseshoeParams:
    N: int
    eps: float = 0.1
    y_a: float = 0.2
    y_b: float = 0.7

    @property
    def alpha(self) -> float:
        return 2 * self.N + self.eps

    @property
    def beta(self) -> float:
        return 1.0 / self.alpha

    @property
    def band(self) -> float:
        """Length ``alpha / N`` of one tent band after stretching."""
        return self.alpha / self.N

    @property
    def delta0(self) -> float:
        return (self.band - 2) / 3

    @property
    def delta1(self) -> float:
        return 1 + 2 * (self.band - 2) / 3

    def violations(self) -> list[str]:
        out = []
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            return [f"N must be an integer >= 1, got {self.N!r}"]
        if not self.eps > 0:
            out.append(f"eps must be positive, got {self.eps}")
            return out
        if not self.delta0 > 0:
            out.append("delta0 must be positive")
        if self.delta1 + 1 > self.band + 1e-15:
            out.append("delta1 + 1 exceeds the band length alpha/N")
        if not self.y_a >= 0:
            out.append(f"y_a must be >= 0, got {self.y_a}")
        if not self.y_a + self.beta < self.y_b:
            out.append(f"H_a and H_b overlap: y_a + beta = {self.y_a + self.beta:.6g} >= y_b = {self.y_b}")
        if not self.y_b + self.beta < 1:
            out.append(f"H_b leaves the square: y_b + beta = {self.y_b + self.beta:.6g} >= 1")
        return out

    def validate(self) -> HorseshoeParams:
        bad = self.violations()
        if bad:
            raise ConfigError("; ".join(bad))
        return self

    @classmethod
    def default(cls, N: int, eps: float = 0.1) -> HorseshoeParams:
        """Anchors 0.2 / 0.7 when they fit, else three equal vertical margins."""
        p = cls(N, eps)
        if not p.violations():
            return p
        beta = 1.0 / (2 * N + eps)
        gap = (1 - 2 * beta) / 3
        return cls(N, eps, gap, 2 * gap + beta)

    def to_dict(self) -> dict:
        return {"N": self.N, "eps": self.eps, "y_a": self.y_a, "y_b": self.y_b}

    @classmethod
    def from_dict(cls, data: dict) -> HorseshoeParams:
        try:
            N, eps = int(data["N"]), float(data.get("eps", 0.1))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model config: {exc}") from exc
        base = cls.default(N, eps)
        return cls(N, eps, float(data.get("y_a", base.y_a)), float(data.get("y_b", base.y_b)))


@dataclass(frozen=True)
class BranchMap:
    """``(x, y) -> (ax x + cx, ay y + cy)`` on ``[x_lo, x_hi] x [0, 1]``."""

    label: str
    fold_index: int
    leg: str
    ax: float
    cx: float
    ay: float
    cy: float
    x_lo: float
    x_hi: float

    @property
    def jacobian(self) -> np.ndarray:
        return np.array([[self.ax, 0.0], [0.0, self.ay]])

    def __call__(self, x, y):
        return self.ax * x + self.cx, self.ay * y + self.cy

    def inverse(self, x, y):
        return (x - self.cx) / self.ax, (y - self.cy) / self.ay

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("label", "fold_index", "leg", "ax", "cx", "ay", "cy", "x_lo", "x_hi")}


def _branch(params: HorseshoeParams, k: int, leg: str) -> BranchMap:
    a, band = params.alpha, params.band
    # Tent band k: F_k(u) = u - k*band (k even) or (k+1)*band - u (k odd), u = alpha*x.
    sign, shift = (1.0, -k * band) if k % 2 == 0 else (-1.0, (k + 1) * band)
    if leg == "a":
        ax, cx = sign * a, shift - params.delta0
        ay, cy = params.beta, params.y_a
        label = str(k + 1)
    else:
        ax, cx = -sign * a, params.delta1 + 1 - shift
        ay, cy = -params.beta, params.y_b + params.beta
        label = f"{k + 1}p"
    ends = sorted(((0.0 - cx) / ax, (1.0 - cx) / ax))
    return BranchMap(label, k, leg, ax, cx, ay, cy, ends[0], ends[1])


def _all_words(base: int, length: int) -> np.ndarray:
    """Every word of the given length over ``range(base)`` in product order."""
    idx = np.arange(base ** length, dtype=np.int64)
    powers = base ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % base


class StripModel:
    """Shared behaviour of models given by branch maps and strip families.

    Subclasses provide ``labels``, ``legs``, ``zip_system``, ``branch_leg``,
    and the primitives ``map``, ``inverse``, ``jacobian``, ``v_family``,
    ``h_family``, ``pullback`` and ``pushforward``.
    """

    locate_tol = TOL

    @property
    def n_branches(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"unknown branch label {label!r}") from None

    def leg_index(self, z: str) -> int:
        try:
            return self.legs.index(z)
        except ValueError:
            raise DomainError(f"unknown leg {z!r}") from None

    def branches_of_leg(self, z: int) -> np.ndarray:
        return np.nonzero(self.branch_leg == z)[0]

    def locate(self, x, y, tol: float | None = None) -> np.ndarray:
        """Lowest branch index whose strip holds each point, ``-1`` if none."""
        tol = self.locate_tol if tol is None else tol
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        V = self.v_family()
        yy = np.broadcast_to(y, (len(V),) + y.shape)
        lo = _kernels.poly_eval(V.lower, yy)
        hi = _kernels.poly_eval(V.upper, yy)
        inside = (lo - tol <= x) & (x <= hi + tol) & (-tol <= y) & (y <= 1 + tol)
        return np.where(inside.any(axis=0), inside.argmax(axis=0), -1)

    def h_locate(self, x, y, tol: float | None = None) -> np.ndarray:
        """Index of the horizontal strip holding each point, ``-1`` if none."""
        tol = self.locate_tol if tol is None else tol
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        H = self.h_family()
        xx = np.broadcast_to(x, (len(H),) + x.shape)
        lo = _kernels.poly_eval(H.lower, xx)
        hi = _kernels.poly_eval(H.upper, xx)
        inside = (lo - tol <= y) & (y <= hi + tol) & (-tol <= x) & (x <= 1 + tol)
        return np.where(inside.any(axis=0), inside.argmax(axis=0), -1)

    def iterate(self, x, y, steps: int, tol: float | None = None):
        """Branch indices of ``steps + 1`` forward iterates (``-1`` after escape)."""
        x = np.array(np.atleast_1d(x), dtype=float)
        y = np.array(np.atleast_1d(y), dtype=float)
        labels = np.full((x.size, steps + 1), -1, dtype=np.int64)
        alive = np.arange(x.size)
        for n in range(steps + 1):
            lab = self.locate(x[alive], y[alive], tol)
            labels[alive, n] = lab
            alive = alive[lab >= 0]
            lab = lab[lab >= 0]
            if n == steps or alive.size == 0:
                break
            x[alive], y[alive] = self.map(lab, x[alive], y[alive])
        return labels, x, y

    def backward_codes(self, x, y, steps: int, tol: float | None = None) -> np.ndarray:
        """Leg indices ``s_{-steps} ... s_{-1}`` along the lowest-branch preimage chain."""
        x = np.array(np.atleast_1d(x), dtype=float)
        y = np.array(np.atleast_1d(y), dtype=float)
        codes = np.full((x.size, steps), -1, dtype=np.int64)
        first = np.array([self.branches_of_leg(z)[0] for z in range(len(self.legs))])
        alive = np.arange(x.size)
        for n in range(steps):
            z = self.h_locate(x[alive], y[alive], tol)
            codes[alive, steps - 1 - n] = z
            alive = alive[z >= 0]
            z = z[z >= 0]
            if alive.size == 0:
                break
            x[alive], y[alive] = self.inverse(first[z], x[alive], y[alive])
        return codes

    # ---------------------------------------------------------- words

    def word_indices(self, word) -> np.ndarray:
        return np.array([self.index(s) for s in word], dtype=np.int64)

    def word_strips(self, words: np.ndarray) -> StripFamily:
        """Vertical strips ``V^{s_0 ... s_n}`` for rows of branch indices."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        V = self.v_family()
        last = words[:, -1]
        lo, up = V.lower[last], V.upper[last]
        for i in range(words.shape[1] - 2, -1, -1):
            lo, up = self.pullback(words[:, i], lo, up)
        return StripFamily(VERTICAL, words, lo, up)

    def zword_strips(self, zwords: np.ndarray) -> StripFamily:
        """Horizontal strips for rows of leg indices, oldest symbol first."""
        zwords = np.atleast_2d(np.asarray(zwords, dtype=np.int64))
        H = self.h_family()
        first = zwords[:, 0]
        lo, up = H.lower[first], H.upper[first]
        for i in range(1, zwords.shape[1]):
            lo, up = self.pushforward(zwords[:, i], lo, up)
        return StripFamily(HORIZONTAL, zwords, lo, up)


@dataclass(frozen=True, eq=False)
class HorseshoeModel(StripModel):
    params: HorseshoeParams
    branches: tuple[BranchMap, ...]
    zip_system: ZipSystem = None
    grid_size: int = field(default=2, repr=False)

    legs = ("a", "b")
    exact_words = True

    def __post_init__(self) -> None:
        branches = tuple(self.branches)
        object.__setattr__(self, "branches", branches)
        if self.zip_system is None:
            object.__setattr__(self, "zip_system", ZipSystem(
                tuple(b.label for b in branches), self.legs, {b.label: b.leg for b in branches}))
        arr = {k: np.array([getattr(b, k) for b in branches], dtype=float)
               for k in ("ax", "cx", "ay", "cy", "x_lo", "x_hi")}
        for k, v in arr.items():
            v.setflags(write=False)
            object.__setattr__(self, "_" + k, v)
        object.__setattr__(self, "branch_leg",
                           np.array([self.legs.index(b.leg) for b in branches], dtype=np.int64))
        # Leg y-maps and the horizontal strips they cover, taken from each leg's first branch.
        leg_ay = np.empty(len(self.legs))
        leg_cy = np.empty(len(self.legs))
        for z in range(len(self.legs)):
            j = int(np.argmax(self.branch_leg == z))
            leg_ay[z], leg_cy[z] = arr["ay"][j], arr["cy"][j]
        lo_end, hi_end = leg_cy, leg_ay + leg_cy
        object.__setattr__(self, "_leg_ay", leg_ay)
        object.__setattr__(self, "_leg_cy", leg_cy)
        object.__setattr__(self, "_h_lo", np.minimum(lo_end, hi_end))
        object.__setattr__(self, "_h_hi", np.maximum(lo_end, hi_end))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.branches)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        return self.params.beta

    # ----------------------------------------------------- primitives

    def map(self, idx, x, y):
        idx = np.asarray(idx)
        return self._ax[idx] * x + self._cx[idx], self._ay[idx] * y + self._cy[idx]

    def inverse(self, idx, x, y):
        idx = np.asarray(idx)
        return (x - self._cx[idx]) / self._ax[idx], (y - self._cy[idx]) / self._ay[idx]

    def jacobian(self, idx, x, y) -> np.ndarray:
        idx, x, y = np.broadcast_arrays(np.asarray(idx), np.asarray(x, float), np.asarray(y, float))
        J = np.zeros(idx.shape + (2, 2))
        J[..., 0, 0] = self._ax[idx]
        J[..., 1, 1] = self._ay[idx]
        return J

    def v_family(self) -> StripFamily:
        g = self.grid_size
        words = np.arange(self.n_branches, dtype=np.int64)[:, None]
        return StripFamily(VERTICAL, words, np.repeat(self._x_lo[:, None], g, 1),
                           np.repeat(self._x_hi[:, None], g, 1))

    def h_family(self) -> StripFamily:
        g = self.grid_size
        words = np.arange(len(self.legs), dtype=np.int64)[:, None]
        return StripFamily(HORIZONTAL, words, np.repeat(self._h_lo[:, None], g, 1),
                           np.repeat(self._h_hi[:, None], g, 1))

    def pullback(self, idx, lower, upper):
        idx = np.asarray(idx)
        t = unit_grid(lower.shape[1])
        ys = self._ay[idx, None] * t + self._cy[idx, None]
        ax, cx = self._ax[idx, None], self._cx[idx, None]
        p = (_kernels.poly_eval(lower, ys) - cx) / ax
        q = (_kernels.poly_eval(upper, ys) - cx) / ax
        flip = ax < 0
        return np.where(flip, q, p), np.where(flip, p, q)

    def pushforward(self, leg, lower, upper):
        leg = np.asarray(leg)
        t = unit_grid(lower.shape[1])
        lo_env = np.full(lower.shape, np.inf)
        hi_env = np.full(lower.shape, -np.inf)
        for z in range(len(self.legs)):
            rows = np.nonzero(leg == z)[0]
            if rows.size == 0:
                continue
            for j in self.branches_of_leg(z):
                xs = np.broadcast_to((t - self._cx[j]) / self._ax[j], (rows.size, t.size))
                p = self._ay[j] * _kernels.poly_eval(lower[rows], xs) + self._cy[j]
                q = self._ay[j] * _kernels.poly_eval(upper[rows], xs) + self._cy[j]
                lo_env[rows] = np.minimum(lo_env[rows], np.minimum(p, q))
                hi_env[rows] = np.maximum(hi_env[rows], np.maximum(p, q))
        return lo_env, hi_env

    # --------------------------------------------------- fast paths

    def locate(self, x, y, tol: float | None = None) -> np.ndarray:
        tol = self.locate_tol if tol is None else tol
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        labels, _, _ = self.iterate(x, y, 0, tol)
        return labels[:, 0]

    def h_locate(self, x, y, tol: float | None = None) -> np.ndarray:
        tol = self.locate_tol if tol is None else tol
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return self.backward_codes(np.zeros_like(y), y, 1, tol)[:, 0]

    def iterate(self, x, y, steps: int, tol: float = TOL):
        """Branch labels of ``steps + 1`` forward iterates (``-1`` after escape)."""
        return _kernels.iterate_affine(x, y, self._x_lo, self._x_hi, self._ax, self._cx,
                                       self._ay, self._cy, steps, tol)

    def backward_codes(self, x, y, steps: int, tol: float = TOL) -> np.ndarray:
        """Leg indices ``s_{-steps} ... s_{-1}`` read from horizontal strips."""
        return _kernels.backward_code(x, y, self._h_lo, self._h_hi, self._leg_ay, self._leg_cy,
                                      steps, tol)

    def word_strips(self, words: np.ndarray) -> StripFamily:
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        lo, hi = _kernels.pullback_intervals(words, self._x_lo, self._x_hi, self._ax, self._cx)
        g = self.grid_size
        return StripFamily(VERTICAL, words, np.repeat(lo[:, None], g, 1), np.repeat(hi[:, None], g, 1))

    def zword_strips(self, zwords: np.ndarray) -> StripFamily:
        zwords = np.atleast_2d(np.asarray(zwords, dtype=np.int64))
        lo, hi = _kernels.push_intervals(zwords, self._h_lo, self._h_hi, self._leg_ay, self._leg_cy)
        g = self.grid_size
        return StripFamily(HORIZONTAL, zwords, np.repeat(lo[:, None], g, 1), np.repeat(hi[:, None], g, 1))

    def periodic_points(self, words: np.ndarray):
        """Fixed points of the composed branch maps, one per row of indices."""
        return _kernels.periodic_affine(np.atleast_2d(words), self._ax, self._cx, self._ay, self._cy)

    # ---------------------------------------------------- mutation

    def with_branch(self, i: int, **changes) -> HorseshoeModel:
        """Copy with branch ``i`` altered; domain strips are kept as stored."""
        branches = list(self.branches)
        branches[i] = replace(branches[i], **changes)
        return replace(self, branches=tuple(branches))

    def with_labels(self, labels, zip_system: ZipSystem | None) -> HorseshoeModel:
        branches = tuple(replace(b, label=s) for b, s in zip(self.branches, labels))
        return replace(self, branches=branches, zip_system=zip_system)

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(),
                "alpha": self.alpha, "beta": self.beta,
                "delta0": self.params.delta0, "delta1": self.params.delta1,
                "zip_system": self.zip_system.to_dict(),
                "branches": [b.to_dict() for b in self.branches],
                "H": {z: [float(self._h_lo[i]), float(self._h_hi[i])] for i, z in enumerate(self.legs)}}


def build_horseshoe(params: HorseshoeParams, check: bool = True) -> HorseshoeModel:
    """Build the ``2N`` branches in alphabet order ``1..N, 1p..Np``."""
    if check:
        params.validate()
    elif params.N < 1 or not params.eps > 0:
        raise ConfigError("N must be >= 1 and eps positive")
    branches = [_branch(params, k, "a") for k in range(params.N)]
    branches += [_branch(params, k, "b") for k in range(params.N)]
    return HorseshoeModel(params, tuple(branches))


def apply(model: StripModel, p) -> tuple[tuple[float, float], str]:
    """Image of ``p`` and the label of the branch used (lowest label on overlaps)."""
    x, y = float(p[0]), float(p[1])
    i = int(model.locate(x, y)[0])
    if i < 0:
        raise EscapeError(f"point ({x:.6g}, {y:.6g}) lies outside every branch strip", step=0)
    qx, qy = model.map(i, x, y)
    return (float(qx), float(qy)), model.labels[i]


def apply_inverse(model: StripModel, q, label: str) -> tuple[float, float]:
    """Preimage of ``q`` under the branch named ``label``."""
    i = model.index(label)
    x, y = float(q[0]), float(q[1])
    z = int(model.branch_leg[i])
    H = model.h_family()
    lo = float(_kernels.poly_eval(H.lower[z], np.array(x)))
    hi = float(_kernels.poly_eval(H.upper[z], np.array(x)))
    tol = model.locate_tol
    if not (-tol <= x <= 1 + tol and lo - tol <= y <= hi + tol):
        raise DomainError(f"({x:.6g}, {y:.6g}) is not in H_{model.legs[z]}, the image of branch {label}")
    px, py = model.inverse(i, x, y)
    return float(px), float(py)


# ------------------------------------------------------------ verification

def verify_assumption1(model: StripModel, grid: int = CHECK_GRID, tol: float = TOL) -> Report:
    """Strips map onto strips with boundaries going to boundaries.

    Sample points sit on the knots of the strip polylines, so the checks are
    exact up to the solver tolerance.
    """
    rep = Report("assumption 1")
    t = unit_grid(grid)
    V, H = model.v_family(), model.h_family()
    B = len(V)
    vlo = _kernels.poly_eval(V.lower, np.broadcast_to(t, (B, grid)))
    vhi = _kernels.poly_eval(V.upper, np.broadcast_to(t, (B, grid)))
    hlo = _kernels.poly_eval(H.lower, np.broadcast_to(t, (len(H), grid)))
    hhi = _kernels.poly_eval(H.upper, np.broadcast_to(t, (len(H), grid)))
    for i, label in enumerate(model.labels):
        z = int(model.branch_leg[i])
        # Corners of the domain strip go to distinct corners of the target strip.
        cx = np.array([vlo[i, 0], vhi[i, 0], vlo[i, -1], vhi[i, -1]])
        cy = np.array([0.0, 0.0, 1.0, 1.0])
        ix, iy = model.map(i, cx, cy)
        targets = np.array([[0.0, hlo[z, 0]], [1.0, hlo[z, -1]], [0.0, hhi[z, 0]], [1.0, hhi[z, -1]]])
        d = np.max(np.abs(np.stack([ix, iy], 1)[:, None, :] - targets[None, :, :]), axis=2)
        err = float(np.max(d.min(axis=1)))
        distinct = len(set(d.argmin(axis=1).tolist())) == 4
        rep.add(f"corners {label}", err <= tol and distinct, tol - err,
                f"worst corner error {err:.3g}" + ("" if distinct else ", corners collapse"))
        # Vertical boundaries land on x' = 0 and x' = 1, one each.
        ex = []
        sides = []
        for curve in (vlo[i], vhi[i]):
            bx, _ = model.map(i, curve, t)
            side = 0.0 if abs(bx[0]) < abs(bx[0] - 1) else 1.0
            sides.append(side)
            ex.append(float(np.max(np.abs(bx - side))))
        err = max(ex)
        ok = err <= tol and sides[0] != sides[1]
        rep.add(f"vertical boundaries {label}", ok, tol - err, f"off by {err:.3g}")
        # Preimages of the target's horizontal boundaries lie on y = 0 or y = 1 inside the strip.
        err = 0.0
        for curve in (hlo[z], hhi[z]):
            px, py = model.inverse(i, t, curve)
            side = 0.0 if abs(py[0]) < abs(py[0] - 1) else 1.0
            lo_at = _kernels.poly_eval(V.lower[i], py)
            hi_at = _kernels.poly_eval(V.upper[i], py)
            outside = np.maximum(lo_at - px, px - hi_at).max()
            err = max(err, float(np.max(np.abs(py - side))), float(outside))
        rep.add(f"horizontal boundaries {label}", err <= tol, tol - err, f"off by {err:.3g}")
    # Vertical strips are disjoint and inside the square.
    order = np.argsort(vlo, axis=0)
    los = np.take_along_axis(vlo, order, 0)
    his = np.take_along_axis(vhi, order, 0)
    gap = float(np.min(los[1:] - his[:-1])) if B > 1 else math.inf
    rep.add("vertical strips disjoint", gap > 0, gap, f"minimum gap {gap:.3g}")
    inside = float(min(vlo.min(), 1 - vhi.max()))
    rep.add("vertical strips inside Q", inside >= -tol, inside)
    # Horizontal strips are disjoint and inside the square.
    hgap = math.inf
    for u, w in itertools.combinations(range(len(H)), 2):
        sep = np.maximum(hlo[w] - hhi[u], hlo[u] - hhi[w])
        hgap = min(hgap, float(sep.min()))
    rep.add("horizontal strips disjoint", hgap > 0, hgap, f"minimum separation {hgap:.3g}")
    inside = float(min(hlo.min(), 1 - hhi.max()))
    rep.add("horizontal strips inside Q", inside >= -tol, inside)
    return rep


def _strip_samples(model: StripModel, grid: int):
    t = unit_grid(grid)
    V = model.v_family()
    idx, ys, fr = np.meshgrid(np.arange(len(V)), t, t, indexing="ij")
    lo = _kernels.poly_eval(V.lower, ys.reshape(len(V), -1)).reshape(ys.shape)
    hi = _kernels.poly_eval(V.upper, ys.reshape(len(V), -1)).reshape(ys.shape)
    return idx, lo + fr * (hi - lo), ys


def verify_cones(model: StripModel, mu: float, aperture=DEFAULT_APERTURE, grid: int = 9,
                 tol: float = TOL) -> Report:
    """Cone invariance with growth ``1/mu`` at grid points of every strip.

    The unstable cone ``|dy| <= mu_h |dx|`` must map into itself under each
    branch derivative with ``|dx|`` growing by ``1/mu``; the stable cone
    ``|dx| <= mu_v |dy|`` likewise under the inverse derivative with ``|dy|``
    growing.  For a linear map the extremal rays decide both properties.
    """
    mu_h, mu_v = aperture
    if not 0 < mu < 1 - mu_h * mu_v:
        raise PreconditionError(f"need 0 < mu < 1 - mu_h*mu_v = {1 - mu_h * mu_v:.6g}, got {mu}")
    rep = Report("cones", info={"mu": mu, "mu_h": mu_h, "mu_v": mu_v})
    idx, xs, ys = _strip_samples(model, grid)
    J = model.jacobian(idx, xs, ys)
    Jinv = np.linalg.inv(J)
    worst = {}
    for i, label in enumerate(model.labels):
        Ji, Ki = J[i].reshape(-1, 2, 2), Jinv[i].reshape(-1, 2, 2)
        inv_u, grow_u, inv_s, grow_s = [], [], [], []
        for sgn in (1.0, -1.0):
            w = Ji @ np.array([1.0, sgn * mu_h])
            inv_u.append(mu_h * np.abs(w[:, 0]) - np.abs(w[:, 1]))
            grow_u.append(mu * np.abs(w[:, 0]) - 1.0)
            w = Ki @ np.array([sgn * mu_v, 1.0])
            inv_s.append(mu_v * np.abs(w[:, 1]) - np.abs(w[:, 0]))
            grow_s.append(mu * np.abs(w[:, 1]) - 1.0)
        for name, vals in (("unstable cone invariance", inv_u), ("unstable growth", grow_u),
                           ("stable cone invariance", inv_s), ("stable growth", grow_s)):
            m = float(np.min(vals))
            worst[name] = min(worst.get(name, math.inf), m)
            rep.add(f"{name} {label}", m >= -tol, m)
    rep.info.update({f"worst {k}": v for k, v in worst.items()})
    return rep


# ------------------------------------------------------------- refinement

@dataclass
class RefinementTree:
    """Nested strip families up to ``depth``.

    ``forward[j]`` holds ``V^{s_0 ... s_j}`` in product order of the words;
    ``backward[j]`` holds ``H_{s_{-j-1} ... s_{-1}}`` with words stored
    oldest symbol first.
    """

    depth: int
    forward: list[StripFamily]
    backward: list[StripFamily]
    alpha_V: float | None
    alpha_H: float | None
    labels: tuple[str, ...]
    legs: tuple[str, ...]

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.forward[-1]), len(self.backward[-1])

    def _word(self, row, alphabet) -> str:
        return " ".join(alphabet[i] for i in row)

    def forward_nodes(self, level: int | None = None) -> dict[tuple[str, ...], tuple[float, float]]:
        fam = self.forward[self.depth if level is None else level]
        box = fam.bounding_boxes()
        return {tuple(self.labels[i] for i in w): (float(b[0]), float(b[1]))
                for w, b in zip(fam.words, box)}

    def backward_nodes(self, level: int | None = None) -> dict[tuple[str, ...], tuple[float, float]]:
        fam = self.backward[self.depth if level is None else level]
        box = fam.bounding_boxes()
        return {tuple(self.legs[i] for i in w): (float(b[0]), float(b[1]))
                for w, b in zip(fam.words, box)}

    def nesting_ok(self, tol: float = TOL) -> bool:
        for j in range(1, self.depth + 1):
            f, fp = self.forward[j], self.forward[j - 1]
            b, bp = self.backward[j], self.backward[j - 1]
            if not family_nested(fp, f, np.arange(len(f)) // len(self.labels), tol).all():
                return False
            if not family_nested(bp, b, np.arange(len(b)) % len(bp), tol).all():
                return False
        return True

    def to_dict(self) -> dict:
        levels = []
        for j in range(self.depth + 1):
            f, b = self.forward[j], self.backward[j]
            levels.append({
                "level": j,
                "vertical": [{"word": self._word(w, self.labels), "x": [float(lo), float(hi)]}
                             for w, (lo, hi) in zip(f.words, f.bounding_boxes())],
                "horizontal": [{"word": self._word(w, self.legs), "y": [float(lo), float(hi)]}
                               for w, (lo, hi) in zip(b.words, b.bounding_boxes())],
            })
        return {"depth": self.depth, "alpha_V": self.alpha_V, "alpha_H": self.alpha_H,
                "counts": list(self.counts), "levels": levels}

    def csv_rows(self) -> list[tuple]:
        """Deepest vertical strips as ``word,x_lo,x_hi,y_lo,y_hi`` boxes."""
        f = self.forward[self.depth]
        return [(self._word(w, self.labels), float(lo), float(hi), 0.0, 1.0)
                for w, (lo, hi) in zip(f.words, f.bounding_boxes())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["word", "x_lo", "x_hi", "y_lo", "y_hi"])
        for w, a, b, c, d in self.csv_rows():
            out.writerow([w] + [format(v, ".17g") for v in (a, b, c, d)])
        return buf.getvalue()


def _max_ratio(child: np.ndarray, parent: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(parent > 0, child / parent, 0.0)
    return float(np.max(r))


def refine(model: StripModel, k: int) -> RefinementTree:
    """Forward and backward strip families for words of length ``1 .. k+1``."""
    if k < 0:
        raise PreconditionError("depth must be nonnegative")
    B, nz = model.n_branches, len(model.legs)
    total = sum(B ** (j + 1) for j in range(k + 1))
    check_cap(total, "forward refinement nodes")
    exact = getattr(model, "exact_words", False)
    forward = [model.v_family()]
    backward = [model.h_family()]
    rates_v, rates_h = [], []
    for j in range(1, k + 1):
        prev = forward[-1]
        if exact:
            fam = model.word_strips(_all_words(B, j + 1))
        else:
            s0 = np.repeat(np.arange(B, dtype=np.int64), len(prev))
            lo, up = model.pullback(s0, np.tile(prev.lower, (B, 1)), np.tile(prev.upper, (B, 1)))
            fam = StripFamily(VERTICAL, np.column_stack([s0, np.tile(prev.words, (B, 1))]), lo, up)
        forward.append(fam)
        # V^{s_0 ... s_j} is the pullback of V^{s_1 ... s_j}, which sits at row index mod B^j.
        rates_v.append(_max_ratio(fam.widths, prev.widths[np.arange(len(fam)) % len(prev)]))

        bprev = backward[-1]
        if exact:
            bfam = model.zword_strips(_all_words(nz, j + 1))
        else:
            parent = np.repeat(np.arange(len(bprev)), nz)
            z = np.tile(np.arange(nz, dtype=np.int64), len(bprev))
            lo, up = model.pushforward(z, bprev.lower[parent], bprev.upper[parent])
            bfam = StripFamily(HORIZONTAL, np.column_stack([bprev.words[parent], z]), lo, up)
        backward.append(bfam)
        rates_h.append(_max_ratio(bfam.widths, bprev.widths[np.arange(len(bfam)) // nz]))
    return RefinementTree(k, forward, backward,
                          max(rates_v) if rates_v else None, max(rates_h) if rates_h else None,
                          tuple(model.labels), tuple(model.legs))


# ------------------------------------------------------------- relabelling

def swap_labels(model: StripModel, a: str, b: str) -> StripModel:
    """Exchange two branch labels while keeping the declared zip system.

    The result is deliberately inconsistent whenever the two branches lie on
    different legs; it serves as a mutant for the conjugacy check.
    """
    labels = list(model.labels)
    i, j = model.index(a), model.index(b)
    labels[i], labels[j] = labels[j], labels[i]
    return model.with_labels(labels, model.zip_system)


def relabel(model: StripModel, mapping: dict[str, str]) -> StripModel:
    """Rename branches by ``mapping`` and carry the zip system along."""
    labels = [mapping.get(s, s) for s in model.labels]
    if len(set(labels)) != len(labels):
        raise ConfigError("relabelling must be injective")
    sys = model.zip_system
    new_sys = ZipSystem(tuple(mapping.get(s, s) for s in sys.S), sys.Z,
                        {mapping.get(s, s): sys.tau[s] for s in sys.S})
    return model.with_labels(labels, new_sys)


__all__ = [
    "HorseshoeParams", "BranchMap", "HorseshoeModel", "StripModel", "RefinementTree",
    "build_horseshoe", "apply", "apply_inverse", "verify_assumption1", "verify_cones",
    "refine", "swap_labels", "relabel",
]
