"""Lowest-weight modules of the Virasoro and W3 algebras, level by level.

Vectors of the universal (PBW) module are dicts ``monomial -> Fraction`` where
a monomial is a tuple of creation factors ``(family, n)`` standing for
``X_{-n}``, written in PBW order (all L before W, most negative index first)
and applied to the lowest-weight vector.  Modes act by commuting them into
place with :func:`chiralbounds.algebra.commutator`.

``reduced=True`` (vacuum only, ``h = w = 0``) drops the factors that create
null vectors directly from the vacuum (``L_{-1}``, plus ``W_{-1}, W_{-2}`` for
W3).  The submodule they generate lies in the radical, so the irreducible
quotient is the same and the basis is much smaller.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Union

import numpy as np

from .algebra import (
    AlgebraKind,
    AlgebraSpec,
    DomainError,
    Gen,
    ModePolynomial,
    commutator,
    virasoro,
    w3,
)
from .exact import (
    NegativeForm,
    PivotResult,
    bareiss_det_rank,
    float_min_eig,
    format_rational,
    parse_rational,
    qmatrix,
    qmatmul,
    qzeros,
    solve_exact,
    symmetric_pivots,
)

Factor = tuple[str, int]
Monomial = tuple[Factor, ...]
Vector = dict[Monomial, Fraction]

OMEGA: Monomial = ()


class LevelRangeError(IndexError):
    """Requested level is outside the built range."""


@dataclass(frozen=True, order=True)
class PBWMonomial:
    l_part: tuple[int, ...] = ()
    w_part: tuple[int, ...] = ()

    def __post_init__(self):
        for part in (self.l_part, self.w_part):
            if any(x <= 0 for x in part) or list(part) != sorted(part, reverse=True):
                raise ValueError(f"parts must be weakly decreasing positive integers: {part}")

    @property
    def level(self) -> int:
        return sum(self.l_part) + sum(self.w_part)

    def factors(self) -> Monomial:
        """Factors in engine order (see :func:`_factor_key`)."""
        fs = [("L", n) for n in self.l_part] + [("W", n) for n in self.w_part]
        return tuple(sorted(fs, key=_factor_key))

    @classmethod
    def from_factors(cls, mono: Monomial) -> "PBWMonomial":
        return cls(tuple(n for f, n in mono if f == "L"), tuple(n for f, n in mono if f == "W"))

    def __str__(self) -> str:
        s = "".join(f"L_{{-{n}}}" for n in self.l_part) + "".join(f"W_{{-{n}}}" for n in self.w_part)
        return (s or "1") + "Ω"


# --------------------------------------------------------------------------
# partitions and bases
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def partitions(n: int, max_part: int | None = None, min_part: int = 1) -> tuple[tuple[int, ...], ...]:
    """Partitions of ``n`` into parts in ``[min_part, max_part]``, weakly decreasing.

    Ordered with the largest first part first.
    """
    if max_part is None:
        max_part = n
    if n == 0:
        return ((),)
    out = []
    for first in range(min(n, max_part), min_part - 1, -1):
        for rest in partitions(n - first, first, min_part):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def partition_count(n: int) -> int:
    return len(partitions(n))


def _min_parts(alg: AlgebraSpec, reduced: bool) -> dict[str, int]:
    if not reduced:
        return {"L": 1, "W": 1}
    return {"L": 2, "W": 3}


def enumerate_basis(alg: AlgebraSpec, level: int, reduced: bool = False) -> list[PBWMonomial]:
    """PBW monomials of a level in the fixed order (L part first, then W part)."""
    if level < 0:
        return []
    mins = _min_parts(alg, reduced)
    if alg.kind is AlgebraKind.W3:
        out = []
        for wl in range(level + 1):
            for lp in reversed(partitions(level - wl, None, mins["L"])):
                for wp in reversed(partitions(wl, None, mins["W"])):
                    out.append(PBWMonomial(lp, wp))
        return out
    if alg.kind is AlgebraKind.VIRASORO:
        return [PBWMonomial(lp) for lp in reversed(partitions(level, None, mins["L"]))]
    raise DomainError("Heisenberg Fock bases live in chiralbounds.oscillator")


def expected_dimension(alg: AlgebraSpec, level: int) -> int:
    if alg.kind is AlgebraKind.W3:
        return sum(partition_count(a) * partition_count(level - a) for a in range(level + 1))
    return partition_count(level)


def mono_level(m: Monomial) -> int:
    return sum(n for _, n in m)


def _factor_key(f: Factor) -> tuple[int, int]:
    # deepest mode first, L before W at equal depth; this keeps L_{-1}, W_{-2},
    # W_{-1} rightmost so the reduced vacuum quotient kills them directly
    return (-f[1], 0 if f[0] == "L" else 1)


def _axpy(acc: Vector, x: Fraction, v: Vector) -> None:
    for k, y in v.items():
        s = acc.get(k, 0) + x * y
        if s:
            acc[k] = s
        else:
            acc.pop(k, None)


# --------------------------------------------------------------------------
# the action engine
# --------------------------------------------------------------------------

class ModeAction:
    """Exact action of modes on PBW monomials of a lowest-weight module."""

    def __init__(self, alg: AlgebraSpec, h=0, w=0, reduced: bool = False):
        if alg.kind is AlgebraKind.HEISENBERG:
            raise DomainError("use chiralbounds.oscillator for the Heisenberg algebra")
        self.alg = alg
        self.h = Fraction(h)
        self.w = Fraction(w)
        if alg.kind is AlgebraKind.VIRASORO and self.w:
            raise DomainError("w is only meaningful for W3")
        if reduced and (self.h or self.w):
            raise DomainError("reduced bases are only valid for the vacuum h = w = 0")
        self.reduced = reduced
        self._null_creators = {("L", 1), ("W", 1), ("W", 2)} if reduced else set()
        self._cache: dict[tuple[str, int, Monomial], Vector] = {}
        self._comm_cache: dict[tuple[Gen, Gen], ModePolynomial] = {}

    def _commutator(self, a: Gen, b: Gen) -> ModePolynomial:
        key = (a, b)
        hit = self._comm_cache.get(key)
        if hit is None:
            hit = commutator(a, b, self.alg)
            self._comm_cache[key] = hit
        return hit

    def act(self, family: str, index: int, mono: Monomial) -> Vector:
        key = (family, index, mono)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        res = self._act(family, index, mono)
        self._cache[key] = res
        return res

    def _act(self, family: str, index: int, mono: Monomial) -> Vector:
        if family not in ("L", "W") or (family == "W" and self.alg.kind is not AlgebraKind.W3):
            raise DomainError(f"{family}_{index} does not act on a {self.alg.kind.value} module")
        if not mono:
            if index > 0:
                return {}
            if index == 0:
                ev = self.h if family == "L" else self.w
                return {OMEGA: ev} if ev else {}
            if (family, -index) in self._null_creators:
                return {}
            return {((family, -index),): Fraction(1)}
        first, rest = mono[0], mono[1:]
        if index < 0 and _factor_key((family, -index)) <= _factor_key(first):
            return {((family, -index),) + mono: Fraction(1)}
        out: Vector = {}
        inner = self.act(family, index, rest)
        for m, x in inner.items():
            _axpy(out, x, self.act(first[0], -first[1], m))
        comm = self._commutator(Gen(family, index), Gen(first[0], -first[1]))
        _axpy(out, Fraction(1), self.apply_poly_mono(comm, rest))
        return out

    def apply_gen(self, g: Gen, v: Vector) -> Vector:
        out: Vector = {}
        if g.family == "Z":
            return dict(v)
        if g.family == "LL":
            for m, x in v.items():
                _axpy(out, x, self.apply_wick_square(g.index, m))
            return out
        for m, x in v.items():
            _axpy(out, x, self.act(g.family, g.index, m))
        return out

    def apply_wick_square(self, n: int, mono: Monomial) -> Vector:
        """``:L^2:_n`` on a monomial; the sum is finite at the monomial's level."""
        key = ("LL", n, mono)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        lvl = mono_level(mono)
        out: Vector = {}
        base = {mono: Fraction(1)}
        for k in range(-1, lvl + 1):
            _axpy(out, Fraction(1), self.apply_gen(Gen("L", n - k), self.apply_gen(Gen("L", k), base)))
        for k in range(n - lvl, -1):
            _axpy(out, Fraction(1), self.apply_gen(Gen("L", k), self.apply_gen(Gen("L", n - k), base)))
        self._cache[key] = out
        return out

    def apply_word(self, word: Iterable[Gen], v: Vector) -> Vector:
        for g in reversed(tuple(word)):
            v = self.apply_gen(g, v)
            if not v:
                break
        return v

    def apply_poly_mono(self, p: ModePolynomial, mono: Monomial) -> Vector:
        out: Vector = {}
        base = {mono: Fraction(1)}
        for word, x in p.items():
            _axpy(out, x, self.apply_word(word, base))
        return out

    def apply_poly(self, p: ModePolynomial, v: Vector) -> Vector:
        out: Vector = {}
        for m, x in v.items():
            _axpy(out, x, self.apply_poly_mono(p, m))
        return out


# --------------------------------------------------------------------------
# graded module with Gram blocks and radical quotients
# --------------------------------------------------------------------------

@dataclass
class Quotient:
    """Radical quotient of one level.

    ``pivots`` index a maximal set of basis monomials with positive-definite
    Gram ``gram``; ``projection[:, j]`` expresses basis monomial ``j`` in
    those pivots modulo the radical.
    """

    pivots: list[int]
    gram: np.ndarray
    projection: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.pivots)


@dataclass
class LevelData:
    level: int
    basis: list[Monomial]
    gram: np.ndarray | None = None
    quotient: Quotient | None = None
    index: dict[Monomial, int] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {m: i for i, m in enumerate(self.basis)}


Operator = Union[Gen, ModePolynomial]


@dataclass
class LevelBlockOperator:
    """Matrices of an operator between quotient levels.

    ``blocks[n]`` maps quotient coordinates at level ``n`` to level
    ``n - grade``; levels outside the built range are absent.
    """

    symbol: Operator
    grade: int
    blocks: dict[int, np.ndarray]

    def block(self, n: int) -> np.ndarray:
        if n not in self.blocks:
            raise LevelRangeError(f"no block for source level {n}")
        return self.blocks[n]


def _as_poly(g: Operator) -> ModePolynomial:
    return g if isinstance(g, ModePolynomial) else ModePolynomial.gen(g)


class GradedModule:
    """Lowest-weight module of Virasoro or W3 built level by level."""

    def __init__(self, alg: AlgebraSpec, h=0, w=0, reduced: bool = False):
        self.alg = alg
        self.h = Fraction(h)
        self.w = Fraction(w)
        self.reduced = reduced
        self.action = ModeAction(alg, self.h, self.w, reduced)
        self.levels: dict[int, LevelData] = {}

    # -- construction -----------------------------------------------------
    @classmethod
    def vacuum(cls, alg: AlgebraSpec, reduced: bool = True) -> "GradedModule":
        return cls(alg, 0, 0, reduced=reduced)

    @property
    def max_level(self) -> int:
        return max(self.levels) if self.levels else -1

    def build(self, max_level: int, quotient: bool = True) -> "GradedModule":
        """Build basis and Gram (and optionally the quotient) for levels <= max_level.

        Levels are completed in order; a level is only registered once its
        Gram block (and quotient, if requested) is final.
        """
        for n in range(max_level + 1):
            data = self.levels.get(n)
            if data is None:
                basis = [b.factors() for b in enumerate_basis(self.alg, n, self.reduced)]
                data = LevelData(n, basis)
                data.gram = self._gram(data)
                self.levels[n] = data
            if quotient and data.quotient is None:
                data.quotient = self._quotient(data)
        return self

    def _gram(self, data: LevelData) -> np.ndarray:
        n = data.level
        size = len(data.basis)
        g = qzeros(size, size)
        if n == 0:
            g[0, 0] = Fraction(1)
            return g
        # <X_{-m} A' , B> = <A', X_m B>
        for i, a in enumerate(data.basis):
            (fam, m), rest = a[0], a[1:]
            lower = self.levels[n - m]
            for j in range(i, size):
                v = self.action.act(fam, m, data.basis[j])
                if not v:
                    continue
                ri = lower.index[rest]
                s = Fraction(0)
                row = lower.gram[ri]
                for mono, x in v.items():
                    s += x * row[lower.index[mono]]
                g[i, j] = s
                g[j, i] = s
        return g

    def _quotient(self, data: LevelData) -> Quotient:
        res = symmetric_pivots(data.gram)
        if not res.psd:
            raise NegativeForm(
                f"Gram block at level {data.level} is not positive semidefinite",
                res.witness,
                res.witness_value,
                data.level,
            )
        piv = sorted(res.pivots)
        gpp = qmatrix([[data.gram[p, q] for q in piv] for p in piv], (len(piv), len(piv)))
        rows = qmatrix([[data.gram[p, j] for j in range(len(data.basis))] for p in piv], (len(piv), len(data.basis)))
        proj = solve_exact(gpp, rows) if piv else np.empty((0, len(data.basis)), dtype=object)
        return Quotient(piv, gpp, proj)

    # -- access ------------------------------------------------------------
    def level(self, n: int) -> LevelData:
        if n not in self.levels:
            raise LevelRangeError(f"level {n} not built (max {self.max_level})")
        return self.levels[n]

    def basis(self, n: int) -> list[PBWMonomial]:
        return [PBWMonomial.from_factors(m) for m in self.level(n).basis]

    def gram(self, n: int) -> np.ndarray:
        return self.level(n).gram

    def quotient(self, n: int) -> Quotient:
        data = self.level(n)
        if data.quotient is None:
            data.quotient = self._quotient(data)
        return data.quotient

    def dim(self, n: int) -> int:
        """Dimension of the irreducible quotient at level ``n`` (0 below the vacuum)."""
        if n < 0:
            return 0
        return self.quotient(n).rank

    # -- vectors -------------------------------------------------------------
    def coords(self, v: Vector, n: int) -> np.ndarray:
        """Quotient coordinates of a level-``n`` vector."""
        q = self.quotient(n)
        data = self.level(n)
        out = qzeros(q.rank, 1)
        for mono, x in v.items():
            j = data.index[mono]
            for r in range(q.rank):
                out[r, 0] += x * q.projection[r, j]
        return out

    def inner(self, u: Vector, v: Vector, n: int) -> Fraction:
        data = self.level(n)
        s = Fraction(0)
        for a, x in u.items():
            row = data.gram[data.index[a]]
            for b, y in v.items():
                s += x * y * row[data.index[b]]
        return s

    def vacuum_expectation(self, a: PBWMonomial, b: PBWMonomial) -> Fraction:
        """``<A Omega, B Omega>`` by applying the adjoint of ``A`` to ``B Omega``."""
        if a.level != b.level:
            return Fraction(0)
        v: Vector = {b.factors(): Fraction(1)}
        for fam, n in a.factors():
            v = self.action.apply_gen(Gen(fam, n), v)
            if not v:
                return Fraction(0)
        return v.get(OMEGA, Fraction(0))

    # -- operators -----------------------------------------------------------
    def mode_matrix(self, g: Operator, from_level: int) -> np.ndarray:
        """Matrix of ``g`` from quotient level ``from_level`` to ``from_level - grade``."""
        poly = _as_poly(g)
        grade = poly.grade()
        target = from_level - grade
        src = self.quotient(from_level)
        src_basis = self.level(from_level).basis
        if target < 0:
            return np.empty((0, src.rank), dtype=object)
        if target > self.max_level:
            raise LevelRangeError(f"target level {target} not built (max {self.max_level})")
        tq = self.quotient(target)
        out = qzeros(tq.rank, src.rank)
        for col, p in enumerate(src.pivots):
            v = self.action.apply_poly_mono(poly, src_basis[p])
            if v:
                out[:, col] = self.coords(v, target)[:, 0]
        return out

    def operator(self, g: Operator, levels: Iterable[int] | None = None) -> LevelBlockOperator:
        poly = _as_poly(g)
        grade = poly.grade()
        if levels is None:
            levels = [n for n in range(self.max_level + 1) if n - grade <= self.max_level]
        blocks = {n: self.mode_matrix(poly, n) for n in levels}
        return LevelBlockOperator(g, grade, blocks)

    def lowest_weight(self, n: int) -> Fraction:
        return self.h + n

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        levels = []
        for n in sorted(self.levels):
            d = self.levels[n]
            entry = {
                "level": n,
                "basis": [str(PBWMonomial.from_factors(m)) for m in d.basis],
                "gram": [[format_rational(x) for x in row] for row in d.gram],
            }
            if d.quotient is not None:
                entry["rank"] = d.quotient.rank
                entry["pivots"] = d.quotient.pivots
                entry["projection"] = [[format_rational(x) for x in row] for row in d.quotient.projection]
            levels.append(entry)
        return {
            "algebra": self.alg.kind.value,
            "c": format_rational(self.alg.c),
            "h": format_rational(self.h),
            "w": format_rational(self.w),
            "reduced": self.reduced,
            "levels": levels,
        }

    def gram_csv(self, n: int) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        labels = [str(b) for b in self.basis(n)]
        writer.writerow([""] + labels)
        for lab, row in zip(labels, self.gram(n)):
            writer.writerow([lab] + [format_rational(x) for x in row])
        return buf.getvalue()


def module_from_json(doc: dict) -> GradedModule:
    """Rebuild a module from :meth:`GradedModule.to_json` output (recomputes, then checks)."""
    kind = AlgebraKind(doc["algebra"])
    alg = AlgebraSpec(kind, parse_rational(doc["c"]))
    mod = GradedModule(alg, parse_rational(doc["h"]), parse_rational(doc["w"]), doc.get("reduced", False))
    top = max(e["level"] for e in doc["levels"])
    mod.build(top, quotient=all("rank" in e for e in doc["levels"]))
    for e in doc["levels"]:
        stored = [[parse_rational(x) for x in row] for row in e["gram"]]
        if stored != [list(r) for r in mod.gram(e["level"])]:
            raise ValueError(f"stored Gram at level {e['level']} does not match recomputation")
    return mod


# --------------------------------------------------------------------------
# free functions mirroring the operation list
# --------------------------------------------------------------------------

def gram_matrix(module: GradedModule, level: int) -> np.ndarray:
    module.build(level, quotient=False)
    return module.gram(level)


def radical_quotient(module: GradedModule, level: int) -> Quotient:
    module.build(level, quotient=False)
    return module.quotient(level)


def mode_matrix(module: GradedModule, g: Operator, from_level: int) -> np.ndarray:
    return module.mode_matrix(g, from_level)


def vacuum_expectation(module: GradedModule, a: PBWMonomial, b: PBWMonomial) -> Fraction:
    return module.vacuum_expectation(a, b)


@dataclass
class KacLevel:
    level: int
    dimension: int
    determinant: Fraction
    determinant_sign: int
    rank: int
    min_eigenvalue: float | None

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "dimension": self.dimension,
            "determinant": format_rational(self.determinant),
            "determinant_sign": self.determinant_sign,
            "rank": self.rank,
            "min_eigenvalue": self.min_eigenvalue,
        }


def kac_positivity_report(c, h, max_level: int, levels: Iterable[int] | None = None) -> list[KacLevel]:
    """Exact Virasoro Verma Gram determinants per level (float eigenvalues as diagnostics)."""
    mod = GradedModule(virasoro(c), h)
    mod.build(max_level, quotient=False)
    out = []
    for n in levels if levels is not None else range(1, max_level + 1):
        g = mod.gram(n)
        det, rank = bareiss_det_rank(g)
        sign = (det > 0) - (det < 0)
        out.append(KacLevel(n, g.shape[0], det, sign, rank, float_min_eig(g)))
    return out


def admissible_region(c, h, w) -> bool:
    """``h >= (c-2)/24`` and ``|w| <= sqrt(8/(198+45c)) (2h-(c-2)/12)^{3/2}``, decided exactly."""
    c, h, w = Fraction(c), Fraction(h), Fraction(w)
    if 198 + 45 * c <= 0:
        raise DomainError("the bound needs 198 + 45c > 0")
    if h < (c - 2) / 24:
        return False
    base = 2 * h - (c - 2) / 12
    if base < 0:
        return False
    return w * w * (198 + 45 * c) <= 8 * base ** 3


def psd_report(g: np.ndarray) -> PivotResult:
    return symmetric_pivots(g)


def w3_vacuum(c, max_level: int, reduced: bool = True) -> GradedModule:
    return GradedModule.vacuum(w3(c), reduced=reduced).build(max_level)


def virasoro_module(c, h, max_level: int, reduced: bool | None = None) -> GradedModule:
    h = Fraction(h)
    if reduced is None:
        reduced = h == 0
    return GradedModule(virasoro(c), h, reduced=reduced).build(max_level)
