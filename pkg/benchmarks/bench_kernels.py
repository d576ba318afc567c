"""Time the compiled-loop kernels against the vectorized numpy ones.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Compilation happens in a warm-up call that is not timed.  Without numba the
loop column runs the same Python loops uncompiled and is skipped by default.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from zipshoe import _kernels
from zipshoe.horseshoe_model import HorseshoeParams, _all_words, build_horseshoe


def cases(scale: float):
    m = build_horseshoe(HorseshoeParams.default(2))
    lo, hi, ax, cx, ay, cy = m._x_lo, m._x_hi, m._ax, m._cx, m._ay, m._cy
    rng = np.random.default_rng(0)

    words = _all_words(4, 8)                                   # 65536 words of length 8
    zwords = _all_words(2, 14)                                 # 16384 Z-words
    n = max(1, int(200_000 * scale))
    x0, y0 = rng.random(n), rng.random(n)
    b = max(1, int(20_000 * scale))
    hv = rng.uniform(0.3, 0.5, (b, 33))
    vv = rng.uniform(0.3, 0.5, (b, 33))
    per = _all_words(4, 7)
    return {
        "pullback_intervals (65536 x 8)": lambda impl: _kernels.pullback_intervals(words, lo, hi, ax, cx, impl=impl),
        "push_intervals (16384 x 14)": lambda impl: _kernels.push_intervals(zwords, m._h_lo, m._h_hi, m._leg_ay, m._leg_cy, impl=impl),
        f"iterate_affine ({n} pts x 8)": lambda impl: _kernels.iterate_affine(x0, y0, lo, hi, ax, cx, ay, cy, 8, 1e-12, impl=impl),
        f"backward_code ({n} pts x 8)": lambda impl: _kernels.backward_code(x0, y0, m._h_lo, m._h_hi, m._leg_ay, m._leg_cy, 8, 1e-12, impl=impl),
        f"polyline_fixed_point ({b} pairs)": lambda impl: _kernels.polyline_fixed_point(hv, vv, np.full(b, 0.5), 1e-12, 200, impl=impl),
        "periodic_affine (16384 x 7)": lambda impl: _kernels.periodic_affine(per, ax, cx, ay, cy, impl=impl),
    }


def best_time(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--scale", type=float, default=1.0)
    args = p.parse_args(argv)
    backends = [("numpy", _kernels.NUMPY)]
    if _kernels.HAVE_NUMBA:
        backends.insert(0, ("numba", _kernels.LOOP))
    print(f"active backend: {_kernels.BACKEND}")
    header = f"{'kernel':42s}" + "".join(f"{name:>12s}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, fn in cases(args.scale).items():
        row = [best_time(lambda: fn(impl), args.repeat) for _, impl in backends]
        line = f"{name:42s}" + "".join(f"{t * 1e3:10.2f}ms" for t in row)
        if len(row) == 2:
            line += f"{row[1] / row[0]:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
