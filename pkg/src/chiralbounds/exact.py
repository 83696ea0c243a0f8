"""Exact rational helpers: parsing, Gaussian rationals, fraction-free elimination."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class NegativeForm(ValueError):
    """Raised when a Gram block has a negative direction.

    ``witness`` holds an exact vector ``v`` (basis coordinates) with
    ``<v, v> < 0``; ``value`` is that norm.
    """

    def __init__(self, message: str, witness: list[Fraction], value: Fraction, level: int | None = None):
        super().__init__(message)
        self.witness = witness
        self.value = value
        self.level = level


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or a decimal string into a Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    s = str(text).strip()
    if not s:
        raise ValueError("empty rational string")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"invalid rational {text!r}") from exc


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class QI:
    """Gaussian rational ``re + i*im`` with Fraction parts."""

    re: Fraction
    im: Fraction = Fraction(0)

    @staticmethod
    def coerce(x) -> "QI":
        if isinstance(x, QI):
            return x
        if isinstance(x, (int, Fraction)):
            return QI(Fraction(x), Fraction(0))
        raise TypeError(f"cannot coerce {type(x).__name__} to QI")

    def __add__(self, other):
        try:
            o = QI.coerce(other)
        except TypeError:
            return NotImplemented
        return QI(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return QI(-self.re, -self.im)

    def __sub__(self, other):
        try:
            o = QI.coerce(other)
        except TypeError:
            return NotImplemented
        return QI(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return QI.coerce(other) - self

    def __mul__(self, other):
        try:
            o = QI.coerce(other)
        except TypeError:
            return NotImplemented
        return QI(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = QI.coerce(other)
        den = o.re * o.re + o.im * o.im
        num = self * o.conjugate()
        return QI(num.re / den, num.im / den)

    def __eq__(self, other):
        try:
            o = QI.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self) -> "QI":
        return QI(self.re, -self.im)

    def is_real(self) -> bool:
        return self.im == 0

    def __repr__(self):
        if self.im == 0:
            return f"QI({self.re})"
        return f"QI({self.re} + {self.im}i)"


def simplify_scalar(x):
    """Collapse a real QI to a Fraction; leave other values alone."""
    if isinstance(x, QI) and x.im == 0:
        return x.re
    return x


def to_complex(x) -> complex:
    if isinstance(x, (QI, complex, np.complexfloating)):
        return complex(x)
    return complex(float(x))


# --------------------------------------------------------------------------
# matrices as numpy object arrays of Fractions
# --------------------------------------------------------------------------

def qmatrix(rows: Sequence[Sequence], shape: tuple[int, int] | None = None) -> np.ndarray:
    if shape is not None and shape[0] * shape[1] == 0:
        return np.empty(shape, dtype=object)
    out = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            out[i, j] = Fraction(v) if isinstance(v, int) else v
    return out


def qzeros(n: int, m: int) -> np.ndarray:
    out = np.empty((n, m), dtype=object)
    out.fill(Fraction(0))
    return out


def qidentity(n: int) -> np.ndarray:
    out = qzeros(n, n)
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


def qmatmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    if a.shape[1] == 0:
        return qzeros(a.shape[0], b.shape[1])
    if a.shape[0] == 0 or b.shape[1] == 0:
        return np.empty((a.shape[0], b.shape[1]), dtype=object)
    return a.dot(b)


def is_zero_matrix(a: np.ndarray) -> bool:
    return all(not x for x in a.flat)


def to_float(a: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return np.zeros(a.shape)
    if any(isinstance(x, QI) and x.im != 0 for x in a.flat):
        return np.array([[to_complex(x) for x in row] for row in a], dtype=complex).reshape(a.shape)
    return np.array([[float(simplify_scalar(x)) for x in row] for row in a], dtype=float).reshape(a.shape)


def solve_exact(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for square nonsingular ``a`` by Gauss-Jordan over Q."""
    n = a.shape[0]
    m = b.shape[1]
    if n == 0:
        return np.empty((0, m), dtype=object)
    aug = [list(a[i]) + list(b[i]) for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix in exact solve")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        row = [x / p for x in aug[col]]
        aug[col] = row
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], row)]
    out = np.empty((n, m), dtype=object)
    for i in range(n):
        for j in range(m):
            out[i, j] = aug[i][n + j]
    return out


def _integer_scaled(a: np.ndarray) -> tuple[list[list[int]], int]:
    den = 1
    for x in a.flat:
        den = math.lcm(den, Fraction(x).denominator)
    rows = [[int(Fraction(x) * den) for x in row] for row in a]
    return rows, den


@dataclass
class PivotResult:
    """Outcome of fraction-free symmetric elimination with diagonal pivots."""

    pivots: list[int]
    pivot_signs: list[int]
    rank: int
    psd: bool
    witness: list[Fraction] | None = None
    witness_value: Fraction | None = None


def symmetric_pivots(a: np.ndarray) -> PivotResult:
    """Exact positive-semidefiniteness test for a symmetric rational matrix.

    Bareiss elimination on the integer-scaled matrix, always taking the first
    remaining index with a positive Schur diagonal as the next pivot.  After
    pivots ``P`` the stored entries are the bordered minors
    ``det A[P+i, P+j]``; dividing by ``det A[P,P] > 0`` gives the Schur
    complement, so signs are read off directly.
    """
    n = a.shape[0]
    if n == 0:
        return PivotResult([], [], 0, True)
    m, _ = _integer_scaled(a)
    prev = 1
    pivots: list[int] = []
    remaining = list(range(n))
    while remaining:
        neg = next((i for i in remaining if m[i][i] < 0), None)
        if neg is not None:
            u = {neg: Fraction(1)}
            return _indefinite(a, pivots, u)
        piv = next((i for i in remaining if m[i][i] > 0), None)
        if piv is None:
            for i in remaining:
                for j in remaining:
                    if i != j and m[i][j] != 0:
                        mij, mjj = Fraction(m[i][j]), Fraction(m[j][j])
                        t = -(mjj + abs(mij)) / (2 * mij)
                        return _indefinite(a, pivots, {i: t, j: Fraction(1)})
            break
        pp = m[piv][piv]
        remaining.remove(piv)
        for i in remaining:
            mip = m[i][piv]
            row = m[i]
            prow = m[piv]
            for j in remaining:
                row[j] = (pp * row[j] - mip * prow[j]) // prev
        prev = pp
        pivots.append(piv)
    return PivotResult(pivots, [1] * len(pivots), len(pivots), True)


def _indefinite(a: np.ndarray, pivots: list[int], u: dict[int, Fraction]) -> PivotResult:
    n = a.shape[0]
    v = [Fraction(0)] * n
    for i, x in u.items():
        v[i] = x
    if pivots:
        app = qmatrix([[a[p, q] for q in pivots] for p in pivots])
        rhs = qzeros(len(pivots), 1)
        for k, p in enumerate(pivots):
            rhs[k, 0] = sum((a[p, i] * x for i, x in u.items()), Fraction(0))
        sol = solve_exact(app, rhs)
        for k, p in enumerate(pivots):
            v[p] = -sol[k, 0]
    value = sum((v[i] * a[i, j] * v[j] for i in range(n) for j in range(n) if v[i] and v[j]), Fraction(0))
    assert value < 0, "witness construction failed"
    return PivotResult(pivots, [1] * len(pivots), len(pivots), False, v, value)


def bareiss_det_rank(a: np.ndarray) -> tuple[Fraction, int]:
    """Exact determinant and rank via fraction-free elimination with row pivoting."""
    n, k = a.shape
    if n == 0 or k == 0:
        return (Fraction(1) if n == k else Fraction(0)), 0
    m, den = _integer_scaled(a)
    sign = 1
    prev = 1
    rank = 0
    row = 0
    for col in range(k):
        piv = next((r for r in range(row, n) if m[r][col] != 0), None)
        if piv is None:
            continue
        if piv != row:
            m[row], m[piv] = m[piv], m[row]
            sign = -sign
        pr = m[row]
        pv = pr[col]
        for r in range(row + 1, n):
            rr = m[r]
            f = rr[col]
            for j in range(col + 1, k):
                rr[j] = (pv * rr[j] - f * pr[j]) // prev
            rr[col] = 0
        prev = pv
        row += 1
        rank += 1
        if row == n:
            break
    if n != k or rank < n:
        return Fraction(0), rank
    return Fraction(sign * m[n - 1][n - 1], den ** n), rank


def float_min_eig(a: np.ndarray) -> float | None:
    if a.shape[0] == 0:
        return None
    return float(np.linalg.eigvalsh(to_float(a)).min())


def lcm_denominator(values: Iterable[Fraction]) -> int:
    den = 1
    for x in values:
        den = math.lcm(den, Fraction(x).denominator)
    return den
