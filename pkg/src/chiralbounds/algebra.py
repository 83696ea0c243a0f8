"""Words in Virasoro, W3 and Heisenberg modes over exact rationals.

A :class:`ModePolynomial` maps words (tuples of :class:`Gen`) to Fraction
coefficients; the empty word is the identity.  The quadratic Wick sums
``:L^2:_n`` are carried by a single marker generator of family ``"LL"`` and
only expanded, truncated at a level cutoff, when a computation needs them.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, NamedTuple


class AlgebraKind(str, Enum):
    VIRASORO = "Virasoro"
    W3 = "W3"
    HEISENBERG = "Heisenberg"


class DomainError(ValueError):
    """Symbol or parameter outside the domain of an operation."""


class RewriteBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class AlgebraSpec:
    kind: AlgebraKind
    c: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "kind", AlgebraKind(self.kind))
        object.__setattr__(self, "c", Fraction(self.c))
        if self.kind is AlgebraKind.W3 and 22 + 5 * self.c == 0:
            raise DomainError("W3 requires c != -22/5")

    @property
    def b_sq(self) -> Fraction | None:
        if self.kind is not AlgebraKind.W3:
            return None
        return Fraction(16) / (22 + 5 * self.c)

    @property
    def families(self) -> tuple[str, ...]:
        return {
            AlgebraKind.VIRASORO: ("L", "LL"),
            AlgebraKind.W3: ("L", "W", "LL"),
            AlgebraKind.HEISENBERG: ("J", "Z"),
        }[self.kind]


def virasoro(c) -> AlgebraSpec:
    return AlgebraSpec(AlgebraKind.VIRASORO, Fraction(c))


def w3(c) -> AlgebraSpec:
    return AlgebraSpec(AlgebraKind.W3, Fraction(c))


def heisenberg() -> AlgebraSpec:
    return AlgebraSpec(AlgebraKind.HEISENBERG, Fraction(1))


class Gen(NamedTuple):
    """A mode generator ``family_index``; ``Z`` carries index 0."""

    family: str
    index: int = 0

    def __repr__(self) -> str:
        if self.family == "Z":
            return "Z"
        if self.family == "LL":
            return f":L2:_{self.index}"
        return f"{self.family}_{self.index}"


def L(n: int) -> Gen:
    return Gen("L", n)


def W(n: int) -> Gen:
    return Gen("W", n)


def J(n: int) -> Gen:
    return Gen("J", n)


Z = Gen("Z", 0)

_FAMILY_RANK = {"L": 0, "J": 0, "W": 1, "LL": 2}


def pbw_key(g: Gen) -> tuple[int, int, int]:
    """Total order used for normal forms.

    Central ``Z`` first, then raising modes, zero modes, lowering modes; inside
    a sector L before W and ascending mode index.
    """
    if g.family == "Z":
        return (-1, 0, 0)
    sector = 0 if g.index < 0 else (1 if g.index == 0 else 2)
    return (sector, _FAMILY_RANK[g.family], g.index)


@dataclass(frozen=True)
class FieldSpec:
    name: str
    family: str
    dimension: int
    hermitian: bool = True


STRESS_ENERGY = FieldSpec("T", "L", 2)
W_FIELD = FieldSpec("W", "W", 3)
CURRENT = FieldSpec("J", "J", 1)


Word = tuple[Gen, ...]


class ModePolynomial(Mapping[Word, Fraction]):
    """Finite linear combination of mode words with exact coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Word, object] | Iterable[tuple[Word, object]] = ()):
        acc: dict[Word, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for w, coeff in items:
            coeff = Fraction(coeff)
            if coeff:
                acc[tuple(w)] = acc.get(tuple(w), Fraction(0)) + coeff
        self._terms = {w: x for w, x in acc.items() if x}

    @classmethod
    def gen(cls, g: Gen, coeff=1) -> "ModePolynomial":
        return cls({(g,): coeff})

    @classmethod
    def scalar(cls, coeff) -> "ModePolynomial":
        return cls({(): coeff})

    @classmethod
    def word(cls, *gens: Gen, coeff=1) -> "ModePolynomial":
        return cls({tuple(gens): coeff})

    def __getitem__(self, w: Word) -> Fraction:
        return self._terms[w]

    def __iter__(self) -> Iterator[Word]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def coeff(self, w: Iterable[Gen]) -> Fraction:
        return self._terms.get(tuple(w), Fraction(0))

    def __add__(self, other: "ModePolynomial") -> "ModePolynomial":
        acc = dict(self._terms)
        for w, x in other.items():
            acc[w] = acc.get(w, Fraction(0)) + x
        return ModePolynomial(acc)

    def __neg__(self) -> "ModePolynomial":
        return ModePolynomial({w: -x for w, x in self._terms.items()})

    def __sub__(self, other: "ModePolynomial") -> "ModePolynomial":
        return self + (-other)

    def scale(self, s) -> "ModePolynomial":
        s = Fraction(s)
        return ModePolynomial({w: s * x for w, x in self._terms.items()})

    def __rmul__(self, s) -> "ModePolynomial":
        return self.scale(s)

    def __mul__(self, other):
        if isinstance(other, ModePolynomial):
            acc: dict[Word, Fraction] = {}
            for w1, x1 in self._terms.items():
                for w2, x2 in other.items():
                    w = w1 + w2
                    acc[w] = acc.get(w, Fraction(0)) + x1 * x2
            return ModePolynomial(acc)
        return self.scale(other)

    def __eq__(self, other) -> bool:
        if isinstance(other, ModePolynomial):
            return self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for w, x in sorted(self._terms.items(), key=lambda t: [pbw_key(g) for g in t[0]]):
            name = "*".join(map(repr, w)) or "1"
            parts.append(f"({x})*{name}")
        return " + ".join(parts)

    def grade(self) -> int:
        """Common total mode index of all words; raises if inhomogeneous."""
        grades = {sum(g.index for g in w) for w in self._terms}
        if len(grades) > 1:
            raise DomainError(f"inhomogeneous polynomial, grades {sorted(grades)}")
        return grades.pop() if grades else 0

    def has_markers(self) -> bool:
        return any(g.family == "LL" for w in self._terms for g in w)


# --------------------------------------------------------------------------
# relations
# --------------------------------------------------------------------------

def _check(g: Gen, alg: AlgebraSpec) -> None:
    if g.family not in alg.families:
        raise DomainError(f"{g!r} is not a generator of the {alg.kind.value} algebra")


def wick_square_L(n: int) -> ModePolynomial:
    """``:L^2:_n`` as its marker; see :func:`expand_wick_square`."""
    return ModePolynomial.gen(Gen("LL", n))


def lambda_modes(n: int) -> ModePolynomial:
    """``Lambda_n = :L^2:_n - 3/10 (n+2)(n+3) L_n``."""
    return wick_square_L(n) - ModePolynomial.gen(L(n), Fraction(3, 10) * (n + 2) * (n + 3))


def lambda_linear_coefficient(n: int) -> Fraction:
    return -Fraction(3, 10) * (n + 2) * (n + 3)


def expand_wick_square(n: int, cutoff: int) -> ModePolynomial:
    """Finite part of ``:L^2:_n`` acting on vectors of level <= cutoff.

    ``sum_{k>-2} L_{n-k} L_k + sum_{k<=-2} L_k L_{n-k}``, keeping only words whose
    rightmost factor has index <= cutoff (the rest annihilate such vectors).
    """
    terms: dict[Word, Fraction] = {}
    for k in range(-1, cutoff + 1):
        w = (L(n - k), L(k))
        terms[w] = terms.get(w, Fraction(0)) + 1
    for k in range(n - cutoff, -1):
        w = (L(k), L(n - k))
        terms[w] = terms.get(w, Fraction(0)) + 1
    return ModePolynomial(terms)


def expand_markers(p: ModePolynomial, cutoff: int) -> ModePolynomial:
    acc: dict[Word, Fraction] = {}
    for w, x in p.items():
        pieces = [ModePolynomial.word()]
        for g in w:
            if g.family == "LL":
                factor = expand_wick_square(g.index, cutoff)
            else:
                factor = ModePolynomial.gen(g)
            pieces = [piece * factor for piece in pieces]
        for piece in pieces:
            for w2, y in piece.items():
                acc[w2] = acc.get(w2, Fraction(0)) + x * y
    return ModePolynomial(acc)


# Coefficient of (m-n)(2m^2-mn+2n^2-8) L_{m+n} in [W_m, W_n].  1/30 is the value
# forced by the L-W-W Jacobi identity given the central term c/360; the
# alternative 1/20 makes the c=3 vacuum Gram indefinite at level 5.
W_LINEAR_COEFF = Fraction(1, 30)


def commutator(a: Gen, b: Gen, alg: AlgebraSpec) -> ModePolynomial:
    """Right-hand side of ``[a, b]`` from the defining relations."""
    _check(a, alg)
    _check(b, alg)
    if a.family == "LL" or b.family == "LL":
        raise DomainError("commutators with :L^2: markers need an explicit expansion cutoff")
    if a.family == "Z" or b.family == "Z":
        return ModePolynomial()
    m, n = a.index, b.index
    c = alg.c
    if a.family == "J" and b.family == "J":
        return ModePolynomial.gen(Z, m) if m + n == 0 else ModePolynomial()
    if a.family == "L" and b.family == "L":
        out = ModePolynomial.gen(L(m + n), m - n)
        if m + n == 0:
            out = out + ModePolynomial.scalar(c / 12 * (m ** 3 - m))
        return out
    if a.family == "L" and b.family == "W":
        return ModePolynomial.gen(W(m + n), 2 * m - n)
    if a.family == "W" and b.family == "L":
        return -commutator(b, a, alg)
    if a.family == "W" and b.family == "W":
        out = (m - n) * alg.b_sq * lambda_modes(m + n)
        out = out + ModePolynomial.gen(L(m + n), W_LINEAR_COEFF * (m - n) * (2 * m * m - m * n + 2 * n * n - 8))
        if m + n == 0:
            out = out + ModePolynomial.scalar(c / 360 * (m * m - 4) * (m * m - 1) * m)
        return out
    raise DomainError(f"no relation for {a!r}, {b!r}")


# --------------------------------------------------------------------------
# normal ordering
# --------------------------------------------------------------------------

@dataclass
class _Rewriter:
    alg: AlgebraSpec
    cutoff: int | None
    strategy: str
    budget: int
    rng: random.Random
    steps: int = 0
    memo: dict = field(default_factory=dict)

    def _out_of_order(self, w: Word) -> list[int]:
        return [i for i in range(len(w) - 1) if pbw_key(w[i]) > pbw_key(w[i + 1])]

    def word(self, w: Word) -> dict[Word, Fraction]:
        hit = self.memo.get(w)
        if hit is not None:
            return hit
        if any(g.family == "LL" for g in w):
            if self.cutoff is None:
                if len([g for g in w if g.family != "Z"]) == 1:
                    self.memo[w] = {w: Fraction(1)}
                    return self.memo[w]
                raise DomainError("word contains a :L^2: marker; pass a level cutoff to expand it")
            expanded = expand_markers(ModePolynomial.word(*w), self.cutoff)
            res = self.poly(expanded)
            self.memo[w] = res
            return res
        bad = self._out_of_order(w)
        if not bad:
            self.memo[w] = {w: Fraction(1)}
            return self.memo[w]
        self.steps += 1
        if self.steps > self.budget:
            raise RewriteBudgetExceeded(f"normal_order exceeded {self.budget} rewrite steps")
        if self.strategy == "leftmost":
            i = bad[0]
        elif self.strategy == "rightmost":
            i = bad[-1]
        else:
            i = self.rng.choice(bad)
        a, b = w[i], w[i + 1]
        head, tail = w[:i], w[i + 2:]
        acc: dict[Word, Fraction] = {}
        for w2, x in self.word(head + (b, a) + tail).items():
            acc[w2] = acc.get(w2, Fraction(0)) + x
        for cw, cx in commutator(a, b, self.alg).items():
            for w2, x in self.word(head + cw + tail).items():
                acc[w2] = acc.get(w2, Fraction(0)) + cx * x
        res = {k: v for k, v in acc.items() if v}
        self.memo[w] = res
        return res

    def poly(self, p: ModePolynomial) -> dict[Word, Fraction]:
        acc: dict[Word, Fraction] = {}
        for w, x in p.items():
            for w2, y in self.word(w).items():
                acc[w2] = acc.get(w2, Fraction(0)) + x * y
        return {k: v for k, v in acc.items() if v}


def normal_order(
    p: ModePolynomial,
    alg: AlgebraSpec,
    cutoff: int | None = None,
    strategy: str = "leftmost",
    budget: int = 10_000_000,
    seed: int | None = None,
) -> ModePolynomial:
    """Rewrite ``p`` into PBW order (see :func:`pbw_key`).

    ``cutoff`` bounds the level of any vector a ``:L^2:`` marker acts on; it is
    required whenever a marker must be commuted past another generator.
    ``strategy`` picks which out-of-order adjacent pair is rewritten first
    (``leftmost``, ``rightmost`` or ``random``); the normal form does not
    depend on it.
    """
    for w in p:
        for g in w:
            if g.family != "LL":
                _check(g, alg)
    if strategy not in ("leftmost", "rightmost", "random"):
        raise ValueError(f"unknown strategy {strategy!r}")
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20000))
    try:
        rw = _Rewriter(alg, cutoff, strategy, budget, random.Random(seed))
        return ModePolynomial(rw.poly(p))
    finally:
        sys.setrecursionlimit(old)


def bracket(p: ModePolynomial, q: ModePolynomial, alg: AlgebraSpec, cutoff: int | None = None) -> ModePolynomial:
    return normal_order(p * q - q * p, alg, cutoff=cutoff)


def adjoint_word(w: Word) -> Word:
    """``(X1...Xk)^dagger = Xk^dagger ... X1^dagger`` with ``X_n^dagger = X_{-n}``."""
    return tuple(Gen(g.family, -g.index) if g.family != "Z" else g for g in reversed(w))


def lowest_weight_expectation(p: ModePolynomial, h=0, w=0, c=0) -> Fraction:
    """``<Omega, p Omega>`` for a normal-ordered, marker-free ``p``.

    Only words made of zero modes and central elements contribute.
    """
    total = Fraction(0)
    values = {"L": Fraction(h), "W": Fraction(w), "J": Fraction(0)}
    for word, x in p.items():
        val = x
        for g in word:
            if g.family == "Z":
                continue
            if g.family == "LL":
                raise DomainError("expand markers before evaluating")
            if g.index != 0:
                val = Fraction(0)
                break
            val *= values[g.family]
        total += val
    return total
