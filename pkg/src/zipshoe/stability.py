"""Small N-to-1 perturbations of the affine horseshoe.

Each perturbed branch is ``g_i = psi ∘ f_i`` with
``psi(x, y) = (x + eta c1 sin 2πy, y + eta c2 sin 2πx)``.  Applying the same
``psi`` after every branch keeps the branch structure: the ``N`` branches of
one leg still cover one common (now curved) horizontal strip.  Curved strip
boundaries are recovered column by column with a chord iteration whose slope
is the affine stretch, seeded with the affine answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, PerturbationTooLargeError, PreconditionError
from .geometry import HORIZONTAL, VERTICAL, StripFamily, unit_grid
from .horseshoe_model import (DEFAULT_APERTURE, HorseshoeModel, StripModel, _all_words,
                              refine, verify_assumption1, verify_cones)
from .reports import Report
from .symbolic_core import ZipSystem

ROOT_TOL = 1e-13
ROOT_ITER = 60
PERTURBED_GRID = 33
PERTURBED_MU = 0.3
PERTURBED_TOL = 1e-10


@dataclass(frozen=True)
class Shape:
    """Displacement field ``(c1 sin 2πy, c2 sin 2πx)`` with its derivative bounds."""

    name: str = "sin2pi"
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self) -> None:
        if self.name != "sin2pi":
            raise PreconditionError(f"unknown perturbation shape {self.name!r}")

    def displacement(self, x, y):
        return self.c1 * np.sin(2 * np.pi * y), self.c2 * np.sin(2 * np.pi * x)

    def derivative(self, x, y):
        """``((d dx/dx, d dx/dy), (d dy/dx, d dy/dy))`` as arrays."""
        zero = np.zeros(np.broadcast(x, y).shape)
        return ((zero, 2 * np.pi * self.c1 * np.cos(2 * np.pi * y)),
                (2 * np.pi * self.c2 * np.cos(2 * np.pi * x), zero))

    @property
    def value_bound(self) -> float:
        return max(abs(self.c1), abs(self.c2))

    @property
    def derivative_bound(self) -> float:
        return 2 * np.pi * max(abs(self.c1), abs(self.c2))

    def to_dict(self) -> dict:
        return {"shape": self.name, "c1": self.c1, "c2": self.c2}

    @classmethod
    def from_dict(cls, data: dict) -> Shape:
        return cls(data.get("shape", "sin2pi"), float(data.get("c1", 1.0)), float(data.get("c2", 1.0)))


@dataclass(frozen=True, eq=False)
class PerturbedModel(StripModel):
    base: HorseshoeModel
    eta: float
    shape: Shape = field(default_factory=Shape)
    grid_size: int = PERTURBED_GRID
    zip_override: ZipSystem | None = None
    label_override: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.eta < 0:
            raise PreconditionError("eta must be nonnegative")
        B = self.base.n_branches
        g = self.grid_size
        zeros, ones = np.zeros((B, g)), np.ones((B, g))
        vlo, vhi = self.pullback(np.arange(B), zeros, ones)
        object.__setattr__(self, "_v", StripFamily(VERTICAL, np.arange(B)[:, None], vlo, vhi))
        nz = len(self.legs)
        hlo, hhi = self.pushforward(np.arange(nz), np.zeros((nz, g)), np.ones((nz, g)))
        object.__setattr__(self, "_h", StripFamily(HORIZONTAL, np.arange(nz)[:, None], hlo, hhi))

    # ------------------------------------------------------ identity

    @property
    def labels(self) -> tuple[str, ...]:
        return self.label_override or self.base.labels

    @property
    def legs(self) -> tuple[str, ...]:
        return self.base.legs

    @property
    def zip_system(self) -> ZipSystem:
        return self.zip_override or self.base.zip_system

    @property
    def branch_leg(self) -> np.ndarray:
        return self.base.branch_leg

    def with_labels(self, labels, zip_system: ZipSystem | None) -> PerturbedModel:
        sys = zip_system or ZipSystem(tuple(labels), self.legs,
                                      {s: self.legs[z] for s, z in zip(labels, self.branch_leg)})
        return PerturbedModel(self.base, self.eta, self.shape, self.grid_size, sys, tuple(labels))

    # ---------------------------------------------------- branch maps

    def _psi(self, x, y):
        dx, dy = self.shape.displacement(x, y)
        return x + self.eta * dx, y + self.eta * dy

    def map(self, idx, x, y):
        return self._psi(*self.base.map(idx, x, y))

    def jacobian(self, idx, x, y) -> np.ndarray:
        u, v = self.base.map(idx, x, y)
        (a, b), (c, d) = self.shape.derivative(u, v)
        D = np.empty(np.broadcast(u, v).shape + (2, 2))
        D[..., 0, 0] = 1 + self.eta * a
        D[..., 0, 1] = self.eta * b
        D[..., 1, 0] = self.eta * c
        D[..., 1, 1] = 1 + self.eta * d
        return D @ self.base.jacobian(idx, x, y)

    def inverse(self, idx, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u, v = x, y
        for _ in range(200):
            dx, dy = self.shape.displacement(u, v)
            un, vn = x - self.eta * dx, y - self.eta * dy
            done = np.max(np.abs(un - u)) <= 1e-15 and np.max(np.abs(vn - v)) <= 1e-15
            u, v = un, vn
            if done:
                break
        else:
            raise ConvergenceError("inverting the displacement did not converge")
        return self.base.inverse(idx, u, v)

    # ------------------------------------------------- strip recovery

    def _chord(self, idx, x0, residual):
        """Solve ``residual(x) = 0`` per entry with slope ``ax[idx]``."""
        ax = self.base._ax[idx]
        x = x0
        r = residual(x)
        for _ in range(ROOT_ITER):
            if np.all(np.abs(r) <= ROOT_TOL):
                return x
            step = np.where(np.abs(r) <= ROOT_TOL, 0.0, r / ax)
            x = x - step
            r = residual(x)
            if not np.all(np.isfinite(r)):
                break
        if np.all(np.abs(r) <= ROOT_TOL):
            return x
        raise PerturbationTooLargeError(
            f"strip boundary recovery failed (eta={self.eta}); residual {np.nanmax(np.abs(r)):.3g}")

    def pullback(self, idx, lower, upper):
        idx = np.asarray(idx)
        t = unit_grid(lower.shape[1])
        b = self.base
        ax, cx = b._ax[idx, None], b._cx[idx, None]
        ay, cy = b._ay[idx, None], b._cy[idx, None]
        ii = np.broadcast_to(idx[:, None], (idx.size, t.size))
        out = []
        for curve in (lower, upper):
            x0 = (_kernels.poly_eval(curve, ay * t + cy) - cx) / ax

            def residual(x, curve=curve):
                u, v = self.map(ii, x, t)
                return u - _kernels.poly_eval(curve, v)

            out.append(self._chord(ii, x0, residual))
        flip = ax < 0
        lo, hi = np.where(flip, out[1], out[0]), np.where(flip, out[0], out[1])
        if np.any(hi < lo):
            raise PerturbationTooLargeError("pulled-back strip boundaries cross")
        return lo, hi

    def pushforward(self, leg, lower, upper):
        leg = np.asarray(leg)
        t = unit_grid(lower.shape[1])
        b = self.base
        lo_env = np.full(lower.shape, np.inf)
        hi_env = np.full(lower.shape, -np.inf)
        for z in range(len(self.legs)):
            rows = np.nonzero(leg == z)[0]
            if rows.size == 0:
                continue
            for j in self.branches_of_leg(z):
                jj = np.full((rows.size, t.size), j)
                x0 = np.broadcast_to((t - b._cx[j]) / b._ax[j], jj.shape)
                for curve in (lower[rows], upper[rows]):
                    def residual(x, curve=curve):
                        return self.map(jj, x, _kernels.poly_eval(curve, x))[0] - t

                    x = self._chord(jj, x0, residual)
                    y = self.map(jj, x, _kernels.poly_eval(curve, x))[1]
                    lo_env[rows] = np.minimum(lo_env[rows], y)
                    hi_env[rows] = np.maximum(hi_env[rows], y)
        return lo_env, hi_env

    def v_family(self) -> StripFamily:
        return self._v

    def h_family(self) -> StripFamily:
        return self._h

    def to_dict(self) -> dict:
        return {"eta": self.eta, **self.shape.to_dict(), "grid": self.grid_size,
                "base": self.base.params.to_dict(),
                "vertical": {"lower": self._v.lower, "upper": self._v.upper},
                "horizontal": {"lower": self._h.lower, "upper": self._h.upper}}


def _families_separated(fam: StripFamily) -> float:
    order = np.argsort(fam.lower, axis=0)
    lo = np.take_along_axis(fam.lower, order, 0)
    hi = np.take_along_axis(fam.upper, order, 0)
    gap = float(np.min(lo[1:] - hi[:-1])) if len(fam) > 1 else math.inf
    return min(gap, float(lo.min()), float(1 - hi.max()))


def perturb(model: HorseshoeModel, eta: float, shape: Shape | None = None,
            grid: int = PERTURBED_GRID, check: bool = True) -> PerturbedModel:
    """Perturbed model with recovered curved strips.

    Raises ``PerturbationTooLargeError`` when recovery fails or, with
    ``check``, when strips touch each other or the edge of the square.
    """
    try:
        pm = PerturbedModel(model, float(eta), shape or Shape(), grid)
    except ConvergenceError as exc:
        raise PerturbationTooLargeError(str(exc)) from exc
    if not check:
        return pm
    for fam, what in ((pm.v_family(), "vertical"), (pm.h_family(), "horizontal")):
        sep = _families_separated(fam)
        if not sep > 0 and not (eta == 0 and sep >= 0):
            raise PerturbationTooLargeError(f"{what} strips collide at eta={eta} (separation {sep:.3g})")
    return pm


def strip_displacement(model: StripModel, pm: StripModel) -> float:
    """Largest boundary displacement between the two models' depth-0 strips."""
    g = max(model.v_family().lower.shape[1], pm.v_family().lower.shape[1])
    t = unit_grid(g)
    worst = 0.0
    for fa, fb in ((model.v_family(), pm.v_family()), (model.h_family(), pm.h_family())):
        for a, b in ((fa.lower, fb.lower), (fa.upper, fb.upper)):
            ta = np.broadcast_to(t, (a.shape[0], g))
            worst = max(worst, float(np.max(np.abs(_kernels.poly_eval(a, ta) - _kernels.poly_eval(b, ta)))))
    return worst


def verify_perturbed(pm: StripModel, mu: float = PERTURBED_MU, aperture=DEFAULT_APERTURE,
                     tol: float = PERTURBED_TOL) -> Report:
    """Assumption-1 checks on the curved strips plus cone checks on sampled derivatives."""
    mu_h, mu_v = aperture
    if not mu < 1 - mu_h * mu_v:
        raise PreconditionError(f"need mu < 1 - mu_h*mu_v = {1 - mu_h * mu_v:.6g}")
    rep = Report("perturbed verification")
    rep.extend(verify_assumption1(pm, tol=tol))
    rep.extend(verify_cones(pm, mu, aperture, tol=tol))
    mu_v_g = pm.v_family().lipschitz()
    mu_h_g = pm.h_family().lipschitz()
    rep.info.update({"mu_v_g": mu_v_g, "mu_h_g": mu_h_g, "mu_g": mu_h_g * mu_v_g})
    rep.add("boundary curves within cone apertures",
            mu_h_g <= mu_h and mu_v_g <= mu_v, min(mu_h - mu_h_g, mu_v - mu_v_g))
    return rep


# ------------------------------------------------------------ conjugacy

def _overlap_permutation(a: StripFamily, b: StripFamily) -> np.ndarray | None:
    """For each row of ``a``, the row of ``b`` whose box overlaps it most."""
    ba, bb = a.bounding_boxes(), b.bounding_boxes()
    lo = np.maximum(ba[:, None, 0], bb[None, :, 0])
    hi = np.minimum(ba[:, None, 1], bb[None, :, 1])
    best = np.argmax(hi - lo, axis=1)
    if len(set(best.tolist())) != len(best) or np.any((hi - lo)[np.arange(len(best)), best] <= 0):
        return None
    return best


def _fiber_profile(sys: ZipSystem) -> tuple:
    return len(sys.S), len(sys.Z), tuple(sorted(len(sys.fiber(z)) for z in sys.Z))


def match_conjugacy(model: StripModel, pm: StripModel, depth: int = 6, tol: float = 1e-12) -> Report:
    """Pair the two refinement trees word by word.

    Symbols are matched by geometric overlap of the depth-0 strips, so a
    consistent relabelling is detected and recorded rather than reported as
    a mismatch.
    """
    rep = Report("match conjugacy")
    sa, sb = model.zip_system, pm.zip_system
    rep.add("fiber profile", _fiber_profile(sa) == _fiber_profile(sb), 0.0,
            f"{_fiber_profile(sa)} vs {_fiber_profile(sb)}")
    perm = _overlap_permutation(model.v_family(), pm.v_family())
    zperm = _overlap_permutation(model.h_family(), pm.h_family())
    if perm is None or zperm is None:
        rep.add("symbol pairing", False, witness="strips do not pair one-to-one")
        rep.info["mismatches"] = -1
        return rep
    letter = {model.labels[i]: pm.labels[j] for i, j in enumerate(perm)}
    zletter = {model.legs[i]: pm.legs[j] for i, j in enumerate(zperm)}
    rep.info["permutation"] = {k: v for k, v in letter.items() if k != v}
    rep.info["z_permutation"] = {k: v for k, v in zletter.items() if k != v}
    bad_tau = [s for s in model.labels if sb.tau[letter[s]] != zletter[sa.tau[s]]]
    rep.add("tau compatible with pairing", not bad_tau, -float(len(bad_tau)),
            f"symbols {bad_tau}" if bad_tau else "")

    ta, tb = refine(model, depth), refine(pm, depth)
    B, nz = model.n_branches, len(model.legs)
    mismatches = len(bad_tau)
    precision = 0.0
    shift = 0.0
    for j in range(depth + 1):
        for fa, fb, pmap, base in ((ta.forward[j], tb.forward[j], perm, B),
                                   (ta.backward[j], tb.backward[j], zperm, nz)):
            words = _all_words(base, j + 1)
            powers = base ** np.arange(j, -1, -1, dtype=np.int64)
            rows = pmap[words] @ powers
            ne_a = (fa.widths > 0) & (fa.min_gaps >= -tol)
            ne_b = (fb.widths > 0) & (fb.min_gaps >= -tol)
            mismatches += int(np.count_nonzero(ne_a != ne_b[rows]))
            if j == depth:
                precision = max(precision, float(fa.widths.max()), float(fb.widths.max()))
                ca = fa.bounding_boxes().mean(1)
                cb = fb.bounding_boxes()[rows].mean(1)
                shift = max(shift, float(np.max(np.abs(ca - cb))))
    nested = ta.nesting_ok(tol) and tb.nesting_ok(tol)
    mismatches += 0 if nested else 1
    rep.add("nesting", nested, 0.0)
    rep.add("nonempty word sets agree", mismatches == 0, -float(mismatches))
    rep.info.update({"depth": depth, "mismatches": mismatches, "precision": precision,
                     "pairing_shift": shift,
                     "alpha_V": [ta.alpha_V, tb.alpha_V], "alpha_H": [ta.alpha_H, tb.alpha_H]})
    return rep


def failure_threshold(model: HorseshoeModel, lo: float = 0.0, hi: float = 0.5,
                      mu: float = PERTURBED_MU, aperture=DEFAULT_APERTURE,
                      shape: Shape | None = None, tol: float = 1e-4) -> tuple[float, float]:
    """Bisect ``eta`` between a passing and a failing perturbation.

    Returns ``(eta_pass, eta_fail)`` with ``eta_fail - eta_pass <= tol``.
    """
    def passes(eta: float) -> bool:
        try:
            return verify_perturbed(perturb(model, eta, shape, check=False), mu, aperture).passed
        except (PerturbationTooLargeError, ConvergenceError):
            return False

    if not passes(lo):
        raise PreconditionError(f"eta={lo} already fails")
    if passes(hi):
        raise PreconditionError(f"eta={hi} still passes")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if passes(mid) else (lo, mid)
    return lo, hi


__all__ = ["Shape", "PerturbedModel", "perturb", "verify_perturbed", "match_conjugacy",
           "strip_displacement", "failure_threshold"]
