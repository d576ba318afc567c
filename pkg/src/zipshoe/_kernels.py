"""Hot numeric loops, compiled with numba when available.

Every kernel exists twice: an explicit-loop version that numba compiles in
nopython mode, and a vectorized numpy version.  ``ZIPSHOE_NUMBA=0`` (or a
missing numba) selects the numpy versions.  Both are importable directly as
``LOOP`` and ``NUMPY`` so tests and benchmarks can compare them.

Affine branch ``k`` acts as ``x' = ax[k] x + cx[k]``, ``y' = ay[k] y + cy[k]``
on the closed strip ``lo[k] <= x <= hi[k]``, ``0 <= y <= 1``.  Polyline
curves are sampled on a uniform grid over ``[0, 1]``.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def _env_enabled() -> bool:
    return os.environ.get("ZIPSHOE_NUMBA", "1").strip().lower() not in {"0", "false", "off", "no"}


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _env_enabled()


# --------------------------------------------------------------------- loops

def _poly_eval(vals, t):
    g = vals.shape[0]
    if g == 1:
        return vals[0]
    pos = t * (g - 1)
    i = int(np.floor(pos))
    if i < 0:
        i = 0
    elif i > g - 2:
        i = g - 2
    w = pos - i
    # Written as v0 + w*dv so a constant polyline evaluates exactly.
    return vals[i] + w * (vals[i + 1] - vals[i])


def polyline_fixed_point_loop(hvals, vvals, x0, tol, max_iter):
    b = hvals.shape[0]
    xs = np.empty(b)
    ys = np.empty(b)
    iters = np.empty(b, dtype=np.int64)
    for r in range(b):
        x = x0[r]
        done = -1
        for n in range(1, max_iter + 1):
            y = _poly_eval(hvals[r], x)
            xn = _poly_eval(vvals[r], y)
            if abs(xn - x) <= tol:
                x = xn
                done = n
                break
            x = xn
        xs[r] = x
        ys[r] = _poly_eval(hvals[r], x)
        iters[r] = done
    return xs, ys, iters


def pullback_intervals_loop(words, lo, hi, ax, cx):
    b, length = words.shape
    out_lo = np.empty(b)
    out_hi = np.empty(b)
    for r in range(b):
        s = words[r, length - 1]
        a = lo[s]
        c = hi[s]
        for i in range(length - 2, -1, -1):
            s = words[r, i]
            p = (a - cx[s]) / ax[s]
            q = (c - cx[s]) / ax[s]
            if p <= q:
                a, c = p, q
            else:
                a, c = q, p
        out_lo[r] = a
        out_hi[r] = c
    return out_lo, out_hi


def push_intervals_loop(zwords, hlo, hhi, ay, cy):
    b, length = zwords.shape
    out_lo = np.empty(b)
    out_hi = np.empty(b)
    for r in range(b):
        z = zwords[r, 0]
        a = hlo[z]
        c = hhi[z]
        for i in range(1, length):
            z = zwords[r, i]
            p = ay[z] * a + cy[z]
            q = ay[z] * c + cy[z]
            if p <= q:
                a, c = p, q
            else:
                a, c = q, p
        out_lo[r] = a
        out_hi[r] = c
    return out_lo, out_hi


def iterate_affine_loop(x0, y0, lo, hi, ax, cx, ay, cy, steps, tol):
    b = x0.shape[0]
    k = lo.shape[0]
    labels = np.full((b, steps + 1), -1, dtype=np.int64)
    xs = x0.copy()
    ys = y0.copy()
    for r in range(b):
        x = x0[r]
        y = y0[r]
        for n in range(steps + 1):
            found = -1
            if -tol <= y <= 1.0 + tol:
                for j in range(k):
                    if lo[j] - tol <= x <= hi[j] + tol:
                        found = j
                        break
            labels[r, n] = found
            if found < 0:
                break
            if n < steps:
                x = ax[found] * x + cx[found]
                y = ay[found] * y + cy[found]
        xs[r] = x
        ys[r] = y
    return labels, xs, ys


def backward_code_loop(x0, y0, hlo, hhi, ay, cy, steps, tol):
    b = x0.shape[0]
    nz = hlo.shape[0]
    codes = np.full((b, steps), -1, dtype=np.int64)
    for r in range(b):
        y = y0[r]
        for n in range(steps):
            found = -1
            for z in range(nz):
                if hlo[z] - tol <= y <= hhi[z] + tol:
                    found = z
                    break
            codes[r, steps - 1 - n] = found
            if found < 0:
                break
            y = (y - cy[found]) / ay[found]
    return codes


def periodic_affine_loop(words, ax, cx, ay, cy):
    b, length = words.shape
    xs = np.empty(b)
    ys = np.empty(b)
    for r in range(b):
        a_x, c_x, a_y, c_y = 1.0, 0.0, 1.0, 0.0
        for i in range(length):
            s = words[r, i]
            a_x, c_x = ax[s] * a_x, ax[s] * c_x + cx[s]
            a_y, c_y = ay[s] * a_y, ay[s] * c_y + cy[s]
        xs[r] = c_x / (1.0 - a_x)
        ys[r] = c_y / (1.0 - a_y)
    return xs, ys


# --------------------------------------------------------------------- numpy

def poly_eval(vals: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate row ``r`` of ``vals`` (uniform polylines) at ``t[r, ...]``."""
    vals = np.asarray(vals, dtype=float)
    t = np.asarray(t, dtype=float)
    g = vals.shape[-1]
    if g == 1:
        return np.broadcast_to(vals[..., :1], t.shape).astype(float)
    pos = t * (g - 1)
    i = np.clip(np.floor(pos).astype(np.int64), 0, g - 2)
    w = pos - i
    if vals.ndim == 1:
        v0, v1 = vals[i], vals[i + 1]
    else:
        extra = t.ndim - 1
        rows = np.arange(vals.shape[0]).reshape((-1,) + (1,) * extra)
        v0, v1 = vals[rows, i], vals[rows, i + 1]
    return v0 + w * (v1 - v0)


def polyline_fixed_point_np(hvals, vvals, x0, tol, max_iter):
    x = np.array(x0, dtype=float)
    iters = np.full(x.shape, -1, dtype=np.int64)
    active = np.ones(x.shape, dtype=bool)
    for n in range(1, max_iter + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        y = poly_eval(hvals[idx], x[idx])
        xn = poly_eval(vvals[idx], y)
        conv = np.abs(xn - x[idx]) <= tol
        x[idx] = xn
        iters[idx[conv]] = n
        active[idx[conv]] = False
    y = poly_eval(hvals, x)
    return x, y, iters


def pullback_intervals_np(words, lo, hi, ax, cx):
    words = np.asarray(words)
    s = words[:, -1]
    a, c = lo[s].astype(float), hi[s].astype(float)
    for i in range(words.shape[1] - 2, -1, -1):
        s = words[:, i]
        p = (a - cx[s]) / ax[s]
        q = (c - cx[s]) / ax[s]
        a, c = np.minimum(p, q), np.maximum(p, q)
    return a, c


def push_intervals_np(zwords, hlo, hhi, ay, cy):
    zwords = np.asarray(zwords)
    z = zwords[:, 0]
    a, c = hlo[z].astype(float), hhi[z].astype(float)
    for i in range(1, zwords.shape[1]):
        z = zwords[:, i]
        p = ay[z] * a + cy[z]
        q = ay[z] * c + cy[z]
        a, c = np.minimum(p, q), np.maximum(p, q)
    return a, c


def _locate_np(x, y, lo, hi, tol):
    inside = (lo[None, :] - tol <= x[:, None]) & (x[:, None] <= hi[None, :] + tol)
    inside &= ((-tol <= y) & (y <= 1.0 + tol))[:, None]
    return np.where(inside.any(axis=1), inside.argmax(axis=1), -1)


def iterate_affine_np(x0, y0, lo, hi, ax, cx, ay, cy, steps, tol):
    x = np.array(x0, dtype=float)
    y = np.array(y0, dtype=float)
    labels = np.full((x.shape[0], steps + 1), -1, dtype=np.int64)
    alive = np.ones(x.shape[0], dtype=bool)
    for n in range(steps + 1):
        idx = np.nonzero(alive)[0]
        lab = _locate_np(x[idx], y[idx], lo, hi, tol)
        labels[idx, n] = lab
        alive[idx[lab < 0]] = False
        if n == steps:
            break
        ok = idx[lab >= 0]
        k = lab[lab >= 0]
        x[ok] = ax[k] * x[ok] + cx[k]
        y[ok] = ay[k] * y[ok] + cy[k]
    return labels, x, y


def backward_code_np(x0, y0, hlo, hhi, ay, cy, steps, tol):
    y = np.array(y0, dtype=float)
    codes = np.full((y.shape[0], steps), -1, dtype=np.int64)
    alive = np.ones(y.shape[0], dtype=bool)
    for n in range(steps):
        idx = np.nonzero(alive)[0]
        yy = y[idx]
        inside = (hlo[None, :] - tol <= yy[:, None]) & (yy[:, None] <= hhi[None, :] + tol)
        z = np.where(inside.any(axis=1), inside.argmax(axis=1), -1)
        codes[idx, steps - 1 - n] = z
        alive[idx[z < 0]] = False
        ok = idx[z >= 0]
        zz = z[z >= 0]
        y[ok] = (y[ok] - cy[zz]) / ay[zz]
    return codes


def periodic_affine_np(words, ax, cx, ay, cy):
    words = np.asarray(words)
    b = words.shape[0]
    a_x, c_x = np.ones(b), np.zeros(b)
    a_y, c_y = np.ones(b), np.zeros(b)
    for i in range(words.shape[1]):
        s = words[:, i]
        a_x, c_x = ax[s] * a_x, ax[s] * c_x + cx[s]
        a_y, c_y = ay[s] * a_y, ay[s] * c_y + cy[s]
    return c_x / (1.0 - a_x), c_y / (1.0 - a_y)


_NAMES = ("polyline_fixed_point", "pullback_intervals", "push_intervals",
          "iterate_affine", "backward_code", "periodic_affine")

NUMPY = SimpleNamespace(**{name: globals()[f"{name}_np"] for name in _NAMES})

if HAVE_NUMBA:
    _poly_eval = numba.njit(cache=True)(_poly_eval)
    LOOP = SimpleNamespace(**{name: numba.njit(cache=True)(globals()[f"{name}_loop"])
                              for name in _NAMES})
else:  # pragma: no cover
    LOOP = SimpleNamespace(**{name: globals()[f"{name}_loop"] for name in _NAMES})

ACTIVE = LOOP if USE_NUMBA else NUMPY
BACKEND = "numba" if USE_NUMBA else "numpy"


def _as_float(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _as_int(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def polyline_fixed_point(hvals, vvals, x0, tol: float, max_iter: int, impl=None):
    impl = impl or ACTIVE
    return impl.polyline_fixed_point(_as_float(hvals), _as_float(vvals), _as_float(x0),
                                     float(tol), int(max_iter))


def pullback_intervals(words, lo, hi, ax, cx, impl=None):
    impl = impl or ACTIVE
    return impl.pullback_intervals(_as_int(words), _as_float(lo), _as_float(hi),
                                   _as_float(ax), _as_float(cx))


def push_intervals(zwords, hlo, hhi, ay, cy, impl=None):
    impl = impl or ACTIVE
    return impl.push_intervals(_as_int(zwords), _as_float(hlo), _as_float(hhi),
                               _as_float(ay), _as_float(cy))


def iterate_affine(x0, y0, lo, hi, ax, cx, ay, cy, steps: int, tol: float, impl=None):
    impl = impl or ACTIVE
    return impl.iterate_affine(_as_float(x0), _as_float(y0), _as_float(lo), _as_float(hi),
                               _as_float(ax), _as_float(cx), _as_float(ay), _as_float(cy),
                               int(steps), float(tol))


def backward_code(x0, y0, hlo, hhi, ay, cy, steps: int, tol: float, impl=None):
    impl = impl or ACTIVE
    return impl.backward_code(_as_float(x0), _as_float(y0), _as_float(hlo), _as_float(hhi),
                              _as_float(ay), _as_float(cy), int(steps), float(tol))


def periodic_affine(words, ax, cx, ay, cy, impl=None):
    impl = impl or ACTIVE
    return impl.periodic_affine(_as_int(words), _as_float(ax), _as_float(cx),
                                _as_float(ay), _as_float(cy))
