"""Coding map between the horseshoe's invariant set and the zip shift.

A point is coded by the strips its forward iterates visit (symbols in S)
and by the horizontal strips of a chosen chain of preimages (symbols in Z).
Finite words decode to boxes ``H_backward ∩ V^forward`` that shrink to
points as both words grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, EscapeError, PreconditionError
from .geometry import curve_intersections
from .horseshoe_model import StripModel, apply_inverse, refine
from .reports import Report
from .symbolic_core import Word, ZipSequence, as_word, check_cap, shift, tau_apply

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Box:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.x_hi - self.x_lo, self.y_hi - self.y_lo)

    def contains(self, p, tol: float = 0.0) -> bool:
        return (self.x_lo - tol <= p[0] <= self.x_hi + tol
                and self.y_lo - tol <= p[1] <= self.y_hi + tol)

    def inside(self, other: Box, tol: float = 0.0) -> bool:
        return (other.x_lo - tol <= self.x_lo and self.x_hi <= other.x_hi + tol
                and other.y_lo - tol <= self.y_lo and self.y_hi <= other.y_hi + tol)

    def disjoint(self, other: Box) -> bool:
        return (self.x_hi < other.x_lo or other.x_hi < self.x_lo
                or self.y_hi < other.y_lo or other.y_hi < self.y_lo)

    def to_dict(self) -> dict:
        return {"x": [self.x_lo, self.x_hi], "y": [self.y_lo, self.y_hi]}


@dataclass(frozen=True)
class CodedPoint:
    backward_word: Word
    forward_word: Word
    box: Box
    point: tuple[float, float] | None = None

    def sequence(self, model: StripModel) -> ZipSequence:
        """The code padded with constant tails, as a point of the zip shift."""
        sys = model.zip_system
        return ZipSequence((sys.Z[0],), self.backward_word, self.forward_word, (sys.S[0],))


# ------------------------------------------------------------------ decode

def _full(n: int, g: int, value: float) -> np.ndarray:
    return np.full((n, g), value)


def decode_many(model: StripModel, bwords: np.ndarray, fwords: np.ndarray) -> np.ndarray:
    """Boxes ``[x_lo, x_hi, y_lo, y_hi]`` for rows of backward and forward indices.

    The box is the hull of the four boundary-curve intersections.
    """
    bwords = np.asarray(bwords, dtype=np.int64)
    fwords = np.asarray(fwords, dtype=np.int64)
    n = max(bwords.shape[0], fwords.shape[0])
    if fwords.ndim == 2 and fwords.shape[1] > 0:
        V = model.word_strips(fwords)
        vlo, vhi = V.lower, V.upper
    else:
        vlo, vhi = _full(n, 2, 0.0), _full(n, 2, 1.0)
    if bwords.ndim == 2 and bwords.shape[1] > 0:
        H = model.zword_strips(bwords)
        hlo, hhi = H.lower, H.upper
    else:
        hlo, hhi = _full(n, 2, 0.0), _full(n, 2, 1.0)
    xs, ys = [], []
    for h in (hlo, hhi):
        for v in (vlo, vhi):
            x, y = curve_intersections(h, v)
            xs.append(x)
            ys.append(y)
    xs, ys = np.stack(xs, 1), np.stack(ys, 1)
    return np.column_stack([xs.min(1), xs.max(1), ys.min(1), ys.max(1)])


def decode(model: StripModel, backward_word, forward_word) -> Box:
    """Box ``H_backward ∩ V^forward``; either word may be empty."""
    bw, fw = as_word(backward_word), as_word(forward_word)
    b = np.array([[model.leg_index(z) for z in bw]], dtype=np.int64).reshape(1, len(bw))
    f = model.word_indices(fw).reshape(1, len(fw))
    check_cap(model.n_branches ** len(fw), "decode depth")
    return Box(*map(float, decode_many(model, b, f)[0]))


# --------------------------------------------------------------- itinerary

def itinerary(model: StripModel, p, n_fwd: int, backward_history=()) -> CodedPoint:
    """Code of ``p``: ``n_fwd + 1`` forward labels and the τ-image of a history.

    ``backward_history[0]`` names the branch of the first preimage, so the
    backward word in index order is the reversed τ-image of the history.
    """
    sys = model.zip_system
    labels, _, _ = model.iterate(float(p[0]), float(p[1]), n_fwd)
    row = labels[0]
    if (row < 0).any():
        step = int(np.argmax(row < 0))
        raise EscapeError(f"forward orbit leaves the strips at step {step}", step=step)
    forward = tuple(model.labels[i] for i in row)
    history = as_word(backward_history)
    q = (float(p[0]), float(p[1]))
    for step, h in enumerate(history):
        try:
            q = apply_inverse(model, q, h)
        except DomainError as exc:
            raise DomainError(f"invalid history at step {step}: {exc}") from None
    backward = tuple(reversed(tau_apply(sys, history)))
    return CodedPoint(backward, forward, decode(model, backward, forward), (float(p[0]), float(p[1])))


# --------------------------------------------------------------- diagram

def conjugacy_check(model: StripModel, depth: int = 8, samples: int = 1000,
                    seed: int | np.random.Generator = 0) -> Report:
    """Check ``code(f(p)) = shift(code(p))`` on random coded points.

    Each sample draws a backward word of length ``depth`` and a forward word
    of length ``depth + 1``, takes ``p`` at the centre of the decoded box,
    reads the geometric code of ``p`` and of ``f(p)`` (with ``p`` as the first
    preimage in the history of ``f(p)``), and compares the latter
    with the zip shift of the former over the window ``-(depth+1) .. depth-1``.
    """
    if depth < 1:
        raise PreconditionError("depth must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sys = model.zip_system
    B, nz = model.n_branches, len(model.legs)
    fw = rng.integers(0, B, (samples, depth + 1))
    bw = rng.integers(0, nz, (samples, depth))
    boxes = decode_many(model, bw, fw)
    px = 0.5 * (boxes[:, 0] + boxes[:, 1])
    py = 0.5 * (boxes[:, 2] + boxes[:, 3])
    diag = np.hypot(boxes[:, 1] - boxes[:, 0], boxes[:, 3] - boxes[:, 2])

    lab_p, _, _ = model.iterate(px, py, depth)
    back_p = model.backward_codes(px, py, depth)
    coded = (lab_p == fw).all(1) & (back_p == bw).all(1)

    first = np.where(lab_p[:, 0] >= 0, lab_p[:, 0], 0)
    qx, qy = model.map(first, px, py)
    lab_q, _, _ = model.iterate(qx, qy, depth - 1)
    # The history of q runs through p: its newest backward symbol is the strip
    # holding q, the older ones are p's.  Other preimage chains of q carry the
    # same code only when all branches of a leg share one vertical map.
    back_q = np.column_stack([back_p, model.h_locate(qx, qy)])

    S, Z = model.labels, model.legs
    failures = 0
    witness = ""
    for r in range(samples):
        x = ZipSequence((sys.Z[0],), tuple(Z[i] for i in bw[r]), tuple(S[i] for i in fw[r]), (sys.S[0],))
        expected = shift(sys, x).window(-(depth + 1), 2 * depth + 1)
        got = tuple(Z[i] if i >= 0 else "?" for i in back_q[r]) + \
            tuple(S[i] if i >= 0 else "?" for i in lab_q[r])
        if not coded[r] or got != expected:
            failures += 1
            if not witness:
                witness = (f"sample {r}: expected {' '.join(expected)}, got {' '.join(got)}"
                           if coded[r] else f"sample {r}: box centre does not carry its code")
    rep = Report("conjugacy", info={"depth": depth, "samples": samples, "failures": failures,
                                    "coding_failures": int((~coded).sum()),
                                    "max_box_diag": float(diag.max())})
    rep.add("commuting diagram", failures == 0, -float(failures), witness)
    return rep


# --------------------------------------------------------------- periodic

def _newton_periodic(model: StripModel, idx: np.ndarray, p0, max_iter: int = 50):
    p = np.array(p0, dtype=float)
    for _ in range(max_iter):
        x, y = p
        J = np.eye(2)
        for i in idx:
            J = model.jacobian(int(i), x, y) @ J
            x, y = (float(v) for v in model.map(int(i), x, y))
        F = np.array([x, y]) - p
        if np.max(np.abs(F)) <= 1e-14:
            return p
        p = p - np.linalg.solve(J - np.eye(2), F)
    raise ConvergenceError("periodic orbit iteration did not converge")


def periodic_orbit_solve(model: StripModel, word) -> tuple[float, float]:
    """Point whose orbit follows ``word`` cyclically."""
    w = as_word(word)
    if not w:
        raise PreconditionError("word must be nonempty")
    idx = model.word_indices(w)
    if hasattr(model, "periodic_points"):
        x, y = model.periodic_points(idx[None, :])
        p = (float(x[0]), float(y[0]))
    else:
        seed = getattr(model, "base", None)
        p0 = periodic_orbit_solve(seed, w) if seed is not None else decode(model, (), w).center
        p = tuple(float(v) for v in _newton_periodic(model, idx, p0))
    labels, qx, qy = model.iterate(p[0], p[1], len(w))
    if not np.array_equal(labels[0, :-1], idx):
        raise ConvergenceError(f"orbit of the solution does not follow {' '.join(w)}")
    if not np.array_equal(labels[0, -1:], idx[:1]):
        raise ConvergenceError("orbit does not return to the first strip")
    res = max(abs(float(qx[0]) - p[0]), abs(float(qy[0]) - p[1]))
    if res > RESIDUAL_TOL:
        raise ConvergenceError(f"periodic residual {res:.3g} exceeds {RESIDUAL_TOL}")
    return p


def periodic_orbits(model: StripModel, words: np.ndarray):
    """Batch version for affine models: points, itinerary agreement, residuals."""
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    x, y = model.periodic_points(words)
    n = words.shape[1]
    labels, qx, qy = model.iterate(x, y, n)
    follows = (labels[:, :-1] == words).all(1) & (labels[:, -1] == words[:, 0])
    res = np.maximum(np.abs(qx - x), np.abs(qy - y))
    return x, y, follows, res


def cyclic_backward(word: Word, length: int) -> Word:
    """Last ``length`` symbols of ``word`` repeated leftwards."""
    if length == 0:
        return ()
    reps = -(-length // len(word)) + 1
    return (tuple(word) * reps)[-length:]


# ----------------------------------------------------------------- entropy

def entropy_estimate(model: StripModel, k: int) -> float:
    """``log(#nonempty forward words of length k) / k``."""
    if k < 1:
        raise PreconditionError("depth must be at least 1")
    fam = refine(model, k - 1).forward[-1]
    count = int(np.count_nonzero((fam.widths > 0) & (fam.min_gaps >= 0)))
    return math.log(count) / k


__all__ = [
    "Box", "CodedPoint", "decode", "decode_many", "itinerary", "conjugacy_check",
    "periodic_orbit_solve", "periodic_orbits", "cyclic_backward", "entropy_estimate",
]
