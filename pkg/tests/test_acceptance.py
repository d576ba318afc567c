"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines
inline; they are also written to the terminal report without ``-s``.
"""

import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest
from _gen import SYSTEMS, random_pair

from zipshoe.conjugacy import (
    conjugacy_check, cyclic_backward, decode_many, entropy_estimate, periodic_orbits,
)
from zipshoe.geometry import gap_bounds_batch, random_strip_pairs
from zipshoe.horseshoe_model import (
    DEFAULT_APERTURE, HorseshoeParams, _all_words, build_horseshoe, refine, swap_labels,
    verify_assumption1, verify_cones,
)
from zipshoe.stability import match_conjugacy, perturb, strip_displacement, verify_perturbed
from zipshoe.symbolic_core import (
    CylinderSpec, ZipSequence, ZipSystem, cylinder_contains, dense_orbit_prefix, distance,
    enumerate_periodic, expansivity_witness, forward_visits, iterate_distance,
    periodic_point_in_cylinder, pretransitive_witness, shift_n,
)

_reporter = None


@pytest.fixture(autouse=True)
def _terminal(pytestconfig):
    global _reporter
    _reporter = pytestconfig.pluginmanager.getplugin("terminalreporter")
    yield


def _emit(line):
    print(line)
    if _reporter is not None:
        _reporter.write_line(line)


@contextmanager
def criterion(tag, title, time_limit=None):
    """Time the body and print ``PASS``/``FAIL`` for it."""
    notes = []
    t0 = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - t0
        if time_limit is not None:
            assert elapsed < time_limit, f"took {elapsed:.1f} s, limit {time_limit} s"
    except AssertionError as exc:
        elapsed = time.perf_counter() - t0
        reason = str(exc).splitlines()[0] if str(exc) else "assertion failed"
        _emit(f"{tag} FAIL  {title} ({elapsed:.2f} s): {reason}")
        raise
    _emit(f"{tag} PASS  {title} ({elapsed:.2f} s){': ' + '; '.join(notes) if notes else ''}")


def _cylinders(sys, max_abs_start, max_len):
    for start in range(-max_abs_start, max_abs_start + 1):
        for n in range(1, max_len + 1):
            alphabets = [sys.Z if start + j < 0 else sys.S for j in range(n)]
            for w in itertools.product(*alphabets):
                yield CylinderSpec(start, w)


# ------------------------------------------------------------------ criteria

def test_c1_periodic_point_counts():
    with criterion("C1", "periodic-point counts", time_limit=30) as notes:
        for N in (1, 2, 3):
            m = build_horseshoe(HorseshoeParams.default(N))
            sys = m.zip_system
            leg = np.array([sys.Z.index(sys.tau[s]) for s in m.labels])
            for k in range(1, 6):
                expected = (2 * N) ** k
                pts = enumerate_periodic(sys, k)
                assert len(pts) == expected and len(set(pts)) == expected, (N, k)
                assert all(shift_n(sys, p, k) == p for p in pts)

                words = _all_words(2 * N, k)
                x, y, follows, res = periodic_orbits(m, words)
                # Closing the orbit by forward iteration amplifies rounding by alpha^k.
                assert follows.all() and res.max() <= 1e-15 * m.alpha ** k * 10, (N, k)
                assert len({(round(a, 12), round(b, 12)) for a, b in zip(x, y)}) == expected
                # The backward code of a periodic point repeats tau of its word.
                bw = np.array([cyclic_backward(tuple(leg[w]), k) for w in words])
                fw = np.concatenate([words, words[:, :1]], axis=1)
                boxes = decode_many(m, bw, fw)
                tol = 1e-12
                inside = ((boxes[:, 0] - tol <= x) & (x <= boxes[:, 1] + tol)
                          & (boxes[:, 2] - tol <= y) & (y <= boxes[:, 3] + tol))
                assert inside.all(), (N, k, int((~inside).sum()))
        notes.append("(2N)^k symbolic and geometric points for N=1..3, k=1..5")


def test_c2_entropy():
    with criterion("C2", "entropy equals log 2N") as notes:
        worst = 0.0
        for N in (1, 2, 3):
            m = build_horseshoe(HorseshoeParams.default(N))
            for k in range(1, 7):
                err = abs(entropy_estimate(m, k) - math.log(2 * N))
                worst = max(worst, err)
                assert err <= 1e-12, (N, k, err)
        notes.append(f"max error {worst:.1e}")


def test_c3_conjugacy_diagram():
    with criterion("C3", "conjugacy diagram commutes", time_limit=60) as notes:
        m = build_horseshoe(HorseshoeParams(2))
        rep = conjugacy_check(m, depth=8, samples=1000, seed=0)
        assert rep.info["failures"] == 0, rep.summary()
        bad = conjugacy_check(swap_labels(m, "2", "2p"), depth=8, samples=1000, seed=0)
        assert bad.info["failures"] > 0
        notes.append(f"0/1000 failures; mutant {bad.info['failures']}/1000")


def test_c4_agreement_and_distance():
    with criterion("C4", "agreement/distance implications") as notes:
        rng = np.random.default_rng(0)
        names = sorted(SYSTEMS)
        violations = 0
        for trial in range(10_000):
            sys = SYSTEMS[names[trial % len(names)]]
            x, y = random_pair(rng, sys)
            d = distance(sys, x, y)
            for M in range(0, 14):
                if d < Fraction(1, 2 ** (M + 1)):
                    violations += not all(x.symbol_at(i) == y.symbol_at(i) for i in range(-M + 1, M))
                if all(x.symbol_at(i) == y.symbol_at(i) for i in range(-M, M + 1)):
                    violations += not d <= Fraction(1, 2 ** M)
        assert violations == 0, f"{violations} violations"
        notes.append("10^4 pairs, M=0..13, 0 violations")


def test_c5_intersection_gap_bound():
    with criterion("C5", "intersection gap within bound (Euclidean)") as notes:
        rng = np.random.default_rng(0)
        total, worst = 0, (0.0, None)
        for mu_h, mu_v in itertools.product([0.1, 0.3, 0.6], repeat=2):
            hl, hu = random_strip_pairs(rng, mu_h, 1000)
            vl, vu = random_strip_pairs(rng, mu_v, 1000)
            gap, bound = gap_bounds_batch(hl, hu, vl, vu, mu_h, mu_v)
            bad = gap > bound + 1e-9
            total += int(bad.sum())
            ratio = float(np.max(gap / bound))
            if ratio > worst[0]:
                worst = (ratio, (mu_h, mu_v))
        notes.append(f"worst gap/bound {worst[0]:.5f} at {worst[1]}")
        assert total == 0, f"{total} of 9000 pairs exceed the bound; worst ratio {worst[0]:.5f} at {worst[1]}"


def test_c6_width_decay():
    with criterion("C6", "width decay and rate certificate") as notes:
        for N in (1, 2, 3):
            m = build_horseshoe(HorseshoeParams.default(N))
            tree = refine(m, 5 if N < 3 else 4)
            for k, fam in enumerate(tree.forward):
                err = float(np.max(np.abs(fam.widths - m.alpha ** -(k + 1))))
                assert err <= 1e-12, (N, k, err)
            mu = 1 / m.alpha
            mu_h, mu_v = DEFAULT_APERTURE
            assert verify_cones(m, mu, DEFAULT_APERTURE).passed
            assert tree.alpha_V <= mu / (1 - mu_h * mu_v), (N, tree.alpha_V)
        notes.append("widths alpha^-(k+1) to 1e-12; alpha_V within mu/(1-mu_h mu_v)")


def test_c7_density_constructions():
    with criterion("C7", "periodic point in every cylinder") as notes:
        sys = ZipSystem.horseshoe(2)
        count = failures = 0
        for C in _cylinders(sys, 4, 4):
            p = periodic_point_in_cylinder(sys, C)
            count += 1
            periodic = any(shift_n(sys, p, n) == p for n in range(1, 9))
            failures += not (cylinder_contains(sys, C, p) and periodic)
        assert failures == 0, f"{failures} of {count} cylinders"
        notes.append(f"{count} cylinders, 0 failures")


def test_c8_transitivity_and_pretransitivity():
    with criterion("C8", "dense orbit and preimage search") as notes:
        sys = ZipSystem.horseshoe(2)
        x = dense_orbit_prefix(sys, 4)
        horizon = len(x.left) + len(x.right) + 8
        seen = {(s, n): forward_visits(sys, x, s, n, horizon) for s in range(-4, 5) for n in range(1, 5)}
        cyls = list(_cylinders(sys, 4, 4))
        missed = [C for C in cyls if C.word not in seen[(C.start, len(C.word))]]
        assert not missed, f"forward orbit misses {len(missed)} cylinders, e.g. {missed[0]}"
        deepest = 0
        for C in cyls:
            found = pretransitive_witness(sys, x, C, horizon)
            assert found is not None, f"no preimage in {C}"
            k, y = found
            assert cylinder_contains(sys, C, y) and shift_n(sys, y, k) == x, C
            deepest = max(deepest, k)
        notes.append(f"{len(cyls)} cylinders, preimage depth <= {deepest}")


def test_c9_expansivity():
    with criterion("C9", "expansivity witness at distance 1") as notes:
        rng = np.random.default_rng(0)
        names = sorted(SYSTEMS)
        distinct = 0
        for trial in range(10_000):
            sys = SYSTEMS[names[trial % len(names)]]
            x, y = random_pair(rng, sys)
            n = expansivity_witness(sys, x, y)
            if x == y:
                assert n is None
                continue
            distinct += 1
            assert n is not None and iterate_distance(sys, x, y, n) == 1, (x, y, n)
        assert expansivity_witness(sys, x, ZipSequence(x.left_tail, x.left, x.right, x.right_tail)) is None
        notes.append(f"{distinct} distinct pairs")


def test_c10_stability_experiment():
    with criterion("C10", "finite-depth stability experiment") as notes:
        base = build_horseshoe(HorseshoeParams(2))
        pm = perturb(base, 1e-3)
        rep = verify_perturbed(pm)
        assert rep.passed, rep.summary()
        match = match_conjugacy(base, pm, depth=6)
        assert match.passed and match.info["mismatches"] == 0, match.summary()

        p0 = perturb(base, 0.0)
        assert strip_displacement(base, p0) == 0.0
        ta, tb = refine(base, 4), refine(p0, 4)
        for fa, fb in zip(ta.forward + ta.backward, tb.forward + tb.backward):
            assert np.array_equal(fa.bounding_boxes(), fb.bounding_boxes())
        rng = np.random.default_rng(0)
        xs, ys = rng.random(200), rng.random(200)
        for i in range(base.n_branches):
            assert all(np.array_equal(a, b) for a, b in zip(p0.map(i, xs, ys), base.map(i, xs, ys)))
        a, b = verify_assumption1(base), verify_assumption1(p0)
        assert [(c.name, c.passed) for c in a.checks] == [(c.name, c.passed) for c in b.checks]
        same = conjugacy_check(p0, depth=6, samples=200, seed=0).info["failures"]
        assert same == conjugacy_check(base, depth=6, samples=200, seed=0).info["failures"] == 0
        notes.append(f"eta=1e-3 {len(rep.checks)} checks pass, 0 mismatches; eta=0 exact")
