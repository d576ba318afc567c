"""Random sequence generators and brute-force oracles shared by the tests."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from zipshoe.symbolic_core import ZipSequence, ZipSystem

SYSTEMS = {
    "N1": ZipSystem.horseshoe(1),
    "N2": ZipSystem.horseshoe(2),
    "N3": ZipSystem.horseshoe(3),
    "doubling": ZipSystem.doubling(),
    "uneven": ZipSystem(("p", "q", "r"), ("u", "v"), {"p": "u", "q": "u", "r": "v"}),
}

SCAN = 80  # far beyond every finite part and joint tail period generated below


def random_sequence(rng: np.random.Generator, sys: ZipSystem, fin: int = 5, tail: int = 3) -> ZipSequence:
    def word(alphabet, lo, hi):
        return tuple(alphabet[i] for i in rng.integers(0, len(alphabet), rng.integers(lo, hi + 1)))

    return ZipSequence(word(sys.Z, 1, tail), word(sys.Z, 0, fin), word(sys.S, 0, fin), word(sys.S, 1, tail))


def with_symbol(x: ZipSequence, i: int, s: str) -> ZipSequence:
    """``x`` with the entry at index ``i`` replaced by ``s``."""
    lt, rt = len(x.left_tail), len(x.right_tail)
    nr = max(len(x.right), i + 1)
    nl = max(len(x.left), -i)
    left = list(x.window(-nl, nl))
    right = list(x.window(0, nr))
    if i >= 0:
        right[i] = s
    else:
        left[nl + i] = s
    return ZipSequence(x.window(-nl - lt, lt), tuple(left), tuple(right), x.window(nr, rt))


def random_pair(rng: np.random.Generator, sys: ZipSystem) -> tuple[ZipSequence, ZipSequence]:
    """Pairs that agree on a random-size window around 0, or are equal, or unrelated."""
    x = random_sequence(rng, sys)
    mode = rng.random()
    if mode < 0.1:
        return x, x
    if mode < 0.2:
        return x, random_sequence(rng, sys)
    y = x
    for _ in range(rng.integers(1, 3)):
        i = int(rng.integers(-12, 13))
        alphabet = sys.S if i >= 0 else sys.Z
        choices = [c for c in alphabet if c != y.symbol_at(i)]
        if choices:
            y = with_symbol(y, i, choices[int(rng.integers(len(choices)))])
    return x, y


def brute_M(x: ZipSequence, y: ZipSequence, scan: int = SCAN) -> int | None:
    """``min |i|`` over differing indices in ``[-scan, scan]``."""
    for m in range(scan + 1):
        if x.symbol_at(m) != y.symbol_at(m) or (m and x.symbol_at(-m) != y.symbol_at(-m)):
            return m
    return None


def brute_distance(x: ZipSequence, y: ZipSequence) -> Fraction:
    m = brute_M(x, y)
    return Fraction(0) if m is None else Fraction(1, 2 ** m)


def brute_shift(sys: ZipSystem, x: ZipSequence, lo: int = -20, hi: int = 20) -> tuple:
    """Window of the shifted sequence computed index by index from the definition."""
    return tuple(sys.tau[x.symbol_at(0)] if i == -1 else x.symbol_at(i + 1) for i in range(lo, hi))


@st.composite
def sequences(draw, sys: ZipSystem, fin: int = 5, tail: int = 3):
    Z, S = st.sampled_from(sys.Z), st.sampled_from(sys.S)
    return ZipSequence(tuple(draw(st.lists(Z, min_size=1, max_size=tail))),
                       tuple(draw(st.lists(Z, max_size=fin))),
                       tuple(draw(st.lists(S, max_size=fin))),
                       tuple(draw(st.lists(S, min_size=1, max_size=tail))))


@st.composite
def system_and_sequences(draw, count: int = 2):
    sys = draw(st.sampled_from(list(SYSTEMS.values())))
    return (sys,) + tuple(draw(sequences(sys)) for _ in range(count))
