"""Full zip shift spaces.

A zip shift lives on bi-infinite sequences whose entries at indices ``i >= 0``
come from a forward alphabet ``S`` and whose entries at ``i < 0`` come from a
backward alphabet ``Z``.  A surjection ``tau: S -> Z`` links the two; shifting
moves ``x_0`` across the origin and records ``tau(x_0)`` at index ``-1``.

Every sequence handled here is eventually periodic in both directions, which
makes equality, distance and the shift exactly computable.
"""

from __future__ import annotations

import itertools
import math
import os
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import AlphabetError, CapExceededError, ConfigError

Word = tuple[str, ...]

DEFAULT_CAP = 10**7


def enumeration_cap() -> int:
    """Largest enumeration allowed; ``ZIPSHOE_CAP`` overrides the default."""
    raw = os.environ.get("ZIPSHOE_CAP")
    if raw is None:
        return DEFAULT_CAP
    try:
        cap = int(float(raw))
    except ValueError as exc:
        raise ConfigError(f"ZIPSHOE_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ConfigError("ZIPSHOE_CAP must be positive")
    return cap


def check_cap(count: int, what: str = "enumeration") -> None:
    cap = enumeration_cap()
    if count > cap:
        raise CapExceededError(f"{what} of size {count} exceeds cap {cap} (set ZIPSHOE_CAP)")


def as_word(w: str | Iterable[str]) -> Word:
    """Normalize a word given as a whitespace separated string or an iterable.

    A trailing apostrophe is rewritten as the ASCII ``p`` suffix, so ``"1'"``
    and ``"1p"`` name the same symbol.
    """
    if isinstance(w, str):
        w = w.split()
    return tuple(str(s)[:-1] + "p" if str(s).endswith("'") else str(s) for s in w)


@dataclass(frozen=True, eq=False)
class ZipSystem:
    """Alphabet pair ``(S, Z)`` joined by a surjection ``tau``.

    Alphabet order is the declared order and doubles as the lexicographic
    order used by every enumeration.  Whether a symbol is read in ``S`` or in
    ``Z`` is decided by its index sign, so the two alphabets may share names
    (the two-sided shift ``S = Z, tau = id`` is allowed).
    """

    S: Word
    Z: Word
    tau: Mapping[str, str] = field(repr=False)

    def __post_init__(self) -> None:
        S, Z = tuple(self.S), tuple(self.Z)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "tau", dict(self.tau))
        if not S or not Z:
            raise ConfigError("alphabets must be nonempty")
        if len(set(S)) != len(S) or len(set(Z)) != len(Z):
            raise ConfigError("alphabets must not repeat symbols")
        if set(self.tau) != set(S):
            raise ConfigError("tau must be defined on exactly the symbols of S")
        stray = {z for z in self.tau.values() if z not in Z}
        if stray:
            raise ConfigError(f"tau maps outside Z: {sorted(stray)}")
        if set(self.tau.values()) != set(Z):
            raise ConfigError("tau must be surjective onto Z")
        if len(Z) > len(S):
            raise ConfigError("#Z must not exceed #S")
        object.__setattr__(self, "_s_index", {s: i for i, s in enumerate(S)})
        object.__setattr__(self, "_z_index", {z: i for i, z in enumerate(Z)})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ZipSystem):
            return NotImplemented
        return self.S == other.S and self.Z == other.Z and self.tau == other.tau

    def __hash__(self) -> int:
        return hash((self.S, self.Z, tuple(self.tau[s] for s in self.S)))

    @classmethod
    def horseshoe(cls, N: int) -> ZipSystem:
        """``S = {1..N, 1p..Np}``, ``Z = {a, b}``, unprimed to ``a``, primed to ``b``."""
        if N < 1:
            raise ConfigError("N must be at least 1")
        plain = [str(k) for k in range(1, N + 1)]
        primed = [f"{k}p" for k in range(1, N + 1)]
        tau = {s: "a" for s in plain} | {s: "b" for s in primed}
        return cls(tuple(plain + primed), ("a", "b"), tau)

    @classmethod
    def doubling(cls) -> ZipSystem:
        """Coding of ``x -> 2x mod 1``: ``S = {0, 1}`` and a single backward letter."""
        return cls(("0", "1"), ("a",), {"0": "a", "1": "a"})

    @classmethod
    def full_shift(cls, symbols: Sequence[str]) -> ZipSystem:
        symbols = tuple(symbols)
        return cls(symbols, symbols, {s: s for s in symbols})

    @classmethod
    def from_dict(cls, data: Mapping) -> ZipSystem:
        try:
            return cls(as_word(data["S"]), as_word(data["Z"]),
                       {as_word([k])[0]: as_word([v])[0] for k, v in data["tau"].items()})
        except KeyError as exc:
            raise ConfigError(f"zip system config is missing {exc}") from exc

    def to_dict(self) -> dict:
        return {"S": list(self.S), "Z": list(self.Z), "tau": {s: self.tau[s] for s in self.S}}

    @property
    def degree(self) -> int:
        """Largest fiber size of ``tau``."""
        return max(len(self.fiber(z)) for z in self.Z)

    def fiber(self, z: str) -> Word:
        """Preimages of ``z`` under ``tau``, in alphabet order."""
        if z not in self._z_index:
            raise AlphabetError(f"{z!r} is not in Z")
        return tuple(s for s in self.S if self.tau[s] == z)

    def s_index(self, s: str) -> int:
        try:
            return self._s_index[s]
        except KeyError:
            raise AlphabetError(f"{s!r} is not in S") from None

    def z_index(self, z: str) -> int:
        try:
            return self._z_index[z]
        except KeyError:
            raise AlphabetError(f"{z!r} is not in Z") from None

    def check_forward(self, word: Iterable[str]) -> None:
        for s in word:
            if s not in self._s_index:
                raise AlphabetError(f"{s!r} is not in S")

    def check_backward(self, word: Iterable[str]) -> None:
        for z in word:
            if z not in self._z_index:
                raise AlphabetError(f"{z!r} is not in Z")

    def validate(self, x: ZipSequence) -> None:
        """Raise ``AlphabetError`` unless every entry of ``x`` sits in its alphabet."""
        self.check_backward(x.left_tail + x.left)
        self.check_forward(x.right + x.right_tail)


def tau_apply(sys: ZipSystem, u: Iterable[str]) -> Word:
    u = as_word(u) if isinstance(u, str) else tuple(u)
    sys.check_forward(u)
    return tuple(sys.tau[s] for s in u)


def _primitive(w: Word) -> Word:
    n = len(w)
    for p in range(1, n + 1):
        if n % p == 0 and w[:p] * (n // p) == w:
            return w[:p]
    return w


@dataclass(frozen=True)
class ZipSequence:
    """Eventually periodic point of a zip shift space.

    Reading left to right the sequence is
    ``... left_tail left_tail left . right right_tail right_tail ...`` with
    index 0 at ``right[0]`` (or ``right_tail[0]`` when ``right`` is empty).
    Construction canonicalizes: tails become primitive and finite parts are
    absorbed into the tails, so dataclass equality is sequence equality.
    """

    left_tail: Word
    left: Word
    right: Word
    right_tail: Word

    def __post_init__(self) -> None:
        lt, l = tuple(self.left_tail), tuple(self.left)
        r, rt = tuple(self.right), tuple(self.right_tail)
        if not lt or not rt:
            raise ValueError("tail words must be nonempty")
        lt, rt = _primitive(lt), _primitive(rt)
        while r and r[-1] == rt[-1]:
            r, rt = r[:-1], rt[-1:] + rt[:-1]
        while l and l[0] == lt[0]:
            l, lt = l[1:], lt[1:] + lt[:1]
        object.__setattr__(self, "left_tail", lt)
        object.__setattr__(self, "left", l)
        object.__setattr__(self, "right", r)
        object.__setattr__(self, "right_tail", rt)

    def __getitem__(self, i: int) -> str:
        return self.symbol_at(i)

    def symbol_at(self, i: int) -> str:
        if i >= 0:
            if i < len(self.right):
                return self.right[i]
            k = i - len(self.right)
            return self.right_tail[k % len(self.right_tail)]
        m = len(self.left)
        if -i <= m:
            return self.left[m + i]
        k = -i - m - 1
        lt = self.left_tail
        return lt[len(lt) - 1 - (k % len(lt))]

    def window(self, start: int, length: int) -> Word:
        return tuple(self.symbol_at(i) for i in range(start, start + length))

    @property
    def span(self) -> tuple[int, int]:
        """Indices ``(lo, hi)`` outside of which both halves are purely periodic."""
        return -len(self.left), len(self.right)

    def to_dict(self) -> dict:
        return {"left_tail": list(self.left_tail), "left": list(self.left),
                "right": list(self.right), "right_tail": list(self.right_tail)}

    @classmethod
    def from_dict(cls, data: Mapping) -> ZipSequence:
        return cls(as_word(data["left_tail"]), as_word(data.get("left", ())),
                   as_word(data.get("right", ())), as_word(data["right_tail"]))

    def __str__(self) -> str:
        def bar(w: Word) -> str:
            return "(" + " ".join(w) + ")*"
        left = " ".join((bar(self.left_tail),) + self.left)
        right = " ".join(self.right + (bar(self.right_tail),))
        return f"{left} . {right}"


def periodic(sys: ZipSystem, word: Iterable[str]) -> ZipSequence:
    """The periodic point ``(bar tau(w) . bar w)`` generated by an S-word."""
    w = as_word(word) if isinstance(word, str) else tuple(word)
    if not w:
        raise ValueError("periodic word must be nonempty")
    return ZipSequence(tau_apply(sys, w), (), (), w)


def shift(sys: ZipSystem, x: ZipSequence) -> ZipSequence:
    if x.right:
        s0, right, tail = x.right[0], x.right[1:], x.right_tail
    else:
        s0, right, tail = x.right_tail[0], (), x.right_tail[1:] + x.right_tail[:1]
    return ZipSequence(x.left_tail, x.left + (sys.tau[s0],), right, tail)


def shift_n(sys: ZipSystem, x: ZipSequence, n: int) -> ZipSequence:
    """``n``-th forward iterate, computed in one pass."""
    if n < 0:
        raise ValueError("use preimages for backward iterates")
    if n == 0:
        return x
    lo = len(x.right)
    head = tuple(x.symbol_at(i) for i in range(n))
    if n <= lo:
        right, tail = x.right[n:], x.right_tail
    else:
        k = (n - lo) % len(x.right_tail)
        right, tail = (), x.right_tail[k:] + x.right_tail[:k]
    return ZipSequence(x.left_tail, x.left + tuple(sys.tau[s] for s in head), right, tail)


def _pop_left(y: ZipSequence) -> tuple[str, Word, Word]:
    """Split off ``y_{-1}``; returns it with the remaining left tail and left word."""
    if y.left:
        return y.left[-1], y.left_tail, y.left[:-1]
    lt = y.left_tail
    return lt[-1], lt[-1:] + lt[:-1], ()


def preimage_with(sys: ZipSystem, y: ZipSequence, s: str) -> ZipSequence:
    """The preimage of ``y`` whose entry at index 0 is ``s``."""
    z, lt, left = _pop_left(y)
    if sys.tau.get(s) != z:
        raise AlphabetError(f"tau({s!r}) != y_-1 = {z!r}")
    return ZipSequence(lt, left, (s,) + y.right, y.right_tail)


def preimages(sys: ZipSystem, y: ZipSequence) -> list[ZipSequence]:
    """All ``x`` with ``shift(x) == y``, ordered by ``x_0`` in alphabet order."""
    z, lt, left = _pop_left(y)
    return [ZipSequence(lt, left, (s,) + y.right, y.right_tail) for s in sys.fiber(z)]


def _scan_bounds(x: ZipSequence, y: ZipSequence) -> tuple[int, int]:
    """Index range whose comparison decides agreement everywhere."""
    r = max(len(x.right), len(y.right)) + math.lcm(len(x.right_tail), len(y.right_tail))
    l = max(len(x.left), len(y.left)) + math.lcm(len(x.left_tail), len(y.left_tail))
    return -l, r


def differences(x: ZipSequence, y: ZipSequence) -> Iterator[int]:
    """Indices where ``x`` and ``y`` differ, ordered by ``|i|`` (forward first on ties).

    Infinite when the sequences differ; empty when they are equal.
    """
    lo, hi = _scan_bounds(x, y)
    right = [i for i in range(hi) if x.symbol_at(i) != y.symbol_at(i)]
    left = [i for i in range(-1, lo - 1, -1) if x.symbol_at(i) != y.symbol_at(i)]
    if not right and not left:
        return
    rp = math.lcm(len(x.right_tail), len(y.right_tail))
    lp = math.lcm(len(x.left_tail), len(y.left_tail))
    rstart = max(len(x.right), len(y.right))
    lstart = -max(len(x.left), len(y.left))
    # Differences inside the periodic zones repeat with the joint period.
    rper = [i for i in right if i >= rstart]
    lper = [i for i in left if i < lstart]

    def stream(base: list[int], per: list[int], step: int) -> Iterator[int]:
        yield from base
        if not per:
            return
        for k in itertools.count(1):
            for i in per:
                yield i + k * step

    rs = stream(right, rper, rp)
    ls = stream(left, lper, -lp)
    a, b = next(rs, None), next(ls, None)
    while a is not None or b is not None:
        if b is None or (a is not None and a <= -b):
            yield a
            a = next(rs, None)
        else:
            yield b
            b = next(ls, None)


def mismatch_index(x: ZipSequence, y: ZipSequence) -> int | None:
    """Index ``i`` realizing ``M(x, y) = min |i|`` over differences, or ``None``."""
    return next(differences(x, y), None)


def distance(sys: ZipSystem, x: ZipSequence, y: ZipSequence) -> Fraction:
    """``2 ** -M(x, y)`` as an exact rational; ``0`` for equal sequences."""
    i = mismatch_index(x, y)
    return Fraction(0) if i is None else Fraction(1, 2 ** abs(i))


@dataclass(frozen=True)
class CylinderSpec:
    """Cylinder ``[s_i ... s_{i+l}]`` fixing ``word`` at indices ``start...``."""

    start: int
    word: Word

    def __post_init__(self) -> None:
        w = as_word(self.word) if isinstance(self.word, str) else tuple(self.word)
        if not w:
            raise ValueError("cylinder word must be nonempty")
        object.__setattr__(self, "word", w)

    @property
    def stop(self) -> int:
        return self.start + len(self.word)

    def validate(self, sys: ZipSystem) -> None:
        for j, s in enumerate(self.word):
            if self.start + j < 0:
                sys.check_backward([s])
            else:
                sys.check_forward([s])


def cylinder_contains(sys: ZipSystem, C: CylinderSpec, x: ZipSequence) -> bool:
    return x.window(C.start, len(C.word)) == C.word


def periodic_point_in_cylinder(sys: ZipSystem, C: CylinderSpec) -> ZipSequence:
    """A periodic point inside ``C``, built by the density construction.

    Free symbols and preimage choices take the least symbol in alphabet order.
    """
    C.validate(sys)
    i, w = C.start, C.word
    last = i + len(w) - 1
    if i >= 0:
        base = (sys.S[0],) * i + w
    elif last < 0:
        # Period -i; c_{j-i} must sit over the prescribed Z-symbol at index j.
        n = -i
        base = [sys.S[0]] * n
        for j, z in enumerate(w):
            base[j] = sys.fiber(z)[0]
        base = tuple(base)
    else:
        n = len(w)
        base = [sys.S[0]] * n
        for j in range(0, last + 1):
            base[j] = w[j - i]
        for j in range(i, 0):
            base[j + n] = sys.fiber(w[j - i])[0]
        base = tuple(base)
    return periodic(sys, base)


def _blocks(alphabet: Word, length: int) -> Iterator[Word]:
    return itertools.product(alphabet, repeat=length)


def dense_orbit_prefix(sys: ZipSystem, n: int) -> ZipSequence:
    """Point whose two halves list every block of length ``<= n``.

    The forward half concatenates the S-blocks of lengths ``1..n`` in
    lexicographic order (shortest first), which makes its forward orbit visit
    every cylinder of depth ``<= n``.  The backward half lists the Z-blocks the
    same way, mirrored around the origin, so its iterated preimages reach
    every such cylinder too.  Both halves are padded with the first letter.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    check_cap(sum(len(sys.S) ** k * k for k in range(1, n + 1)), "dense orbit prefix")
    right = tuple(s for k in range(1, n + 1) for b in _blocks(sys.S, k) for s in b)
    left = tuple(z for k in range(n, 0, -1) for b in reversed(list(_blocks(sys.Z, k))) for z in b)
    return ZipSequence((sys.Z[0],), left, right, (sys.S[0],))


def _window_after(sys: ZipSystem, x: ZipSequence, k: int, start: int, length: int) -> Word:
    """``shift^k(x)`` restricted to ``start .. start+length-1`` without building it."""
    out = []
    for j in range(start, start + length):
        m = j + k
        s = x.symbol_at(m)
        out.append(sys.tau[s] if (j < 0 <= m) else s)
    return tuple(out)


def forward_visits(sys: ZipSystem, x: ZipSequence, start: int, length: int,
                   max_k: int) -> dict[Word, int]:
    """First time ``k <= max_k`` each window at ``start`` is seen along the forward orbit."""
    seen: dict[Word, int] = {}
    for k in range(max_k + 1):
        seen.setdefault(_window_after(sys, x, k, start, length), k)
    return seen


def transit_time(sys: ZipSystem, x: ZipSequence, C: CylinderSpec, max_k: int) -> int | None:
    """Least ``k <= max_k`` with ``shift^k(x)`` in ``C``."""
    for k in range(max_k + 1):
        if _window_after(sys, x, k, C.start, len(C.word)) == C.word:
            return k
    return None


def pretransitive_witness(sys: ZipSystem, x: ZipSequence, C: CylinderSpec,
                          max_depth: int) -> tuple[int, ZipSequence] | None:
    """A ``k``-fold preimage of ``x`` inside ``C`` with the least ``k <= max_depth``.

    Level ``k`` of the preimage tree is the product of the ``tau``-fibers over
    ``x_{-k} .. x_{-1}`` placed at indices ``0 .. k-1``, with ``x`` shifted right
    by ``k`` elsewhere.  Membership in ``C`` constrains positions independently,
    so each level is searched exactly without expanding the product.
    """
    C.validate(sys)
    for k in range(max_depth + 1):
        choice: dict[int, str] = {}
        ok = True
        for j, s in enumerate(C.word):
            m = C.start + j
            src = x.symbol_at(m - k)
            if 0 <= m < k:
                if sys.tau[s] != src:
                    ok = False
                    break
                choice[m] = s
            elif src != s:
                ok = False
                break
        if not ok:
            continue
        y = x
        for m in range(k - 1, -1, -1):
            s = choice.get(m) or sys.fiber(_pop_left(y)[0])[0]
            y = preimage_with(sys, y, s)
        return k, y
    return None


def enumerate_periodic(sys: ZipSystem, n: int) -> list[ZipSequence]:
    """All fixed points of ``shift^n``, one per S-word of length ``n``.

    Words are taken in lexicographic order; points of smaller true period
    appear once per generating word of length ``n``.
    """
    if n < 1:
        raise ValueError("period must be at least 1")
    check_cap(len(sys.S) ** n, "periodic enumeration")
    return [periodic(sys, w) for w in _blocks(sys.S, n)]


def is_preperiodic(sys: ZipSystem, q: ZipSequence, p: ZipSequence, max_k: int) -> int | None:
    """Least ``0 < k <= max_k`` with ``shift^k(q) == p``."""
    y = q
    for k in range(1, max_k + 1):
        y = shift(sys, y)
        if y == p:
            return k
    return None


def iterate_distance(sys: ZipSystem, x: ZipSequence, y: ZipSequence, n: int) -> Fraction:
    """Distance between the ``n``-th iterates of ``x`` and ``y``.

    For ``n < 0`` the iterates are the preimage sets and the distance is the
    minimum over pairs.  Fibers over distinct Z-symbols are disjoint and free
    positions can be matched, so the minimum is ``2 ** -min |m|`` over indices
    ``m`` with ``x_{m+n} != y_{m+n}``.
    """
    if n >= 0:
        return distance(sys, shift_n(sys, x, n), shift_n(sys, y, n))
    j = -n
    diffs = differences(x, y)
    first = next(diffs, None)
    if first is None:
        return Fraction(0)
    best = abs(first + j)
    # Differences stream out by |d|; once |d| - j >= best no closer one remains.
    for d in diffs:
        if abs(d) - j >= best:
            break
        best = min(best, abs(d + j))
    return Fraction(1, 2 ** best)


def expansivity_witness(sys: ZipSystem, x: ZipSequence, y: ZipSequence) -> int | None:
    """An ``n`` with ``iterate_distance(x, y, n) == 1``, or ``None`` when ``x == y``.

    A difference at forward index ``i`` is moved to the origin by ``shift^i``;
    a difference at backward index ``-j`` reaches index 0 of every ``j``-fold
    preimage, where the ``tau``-fibers are disjoint.
    """
    return mismatch_index(x, y)
