"""U(1) current Fock space, its Sugawara Virasoro action and a deformed family.

Fock vectors are dicts ``partition -> scalar`` for the unnormalized basis
``J_{-n_1}...J_{-n_k} Omega``; scalars are Fractions or :class:`QI` when
imaginary couplings are involved.  The charge is zero, so ``J_0 = 0``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .exact import QI, format_rational, qzeros, simplify_scalar, symmetric_pivots, to_float
from .lowest_weight import partitions

Partition = tuple[int, ...]
FockVector = dict[Partition, object]

VACUUM: Partition = ()


def _add(acc: FockVector, key: Partition, x) -> None:
    s = acc.get(key, 0) + x
    if s:
        acc[key] = s
    else:
        acc.pop(key, None)


def _axpy(acc: FockVector, x, v: FockVector) -> None:
    if not x:
        return
    for k, y in v.items():
        _add(acc, k, x * y)


def fock_basis(level: int) -> list[Partition]:
    return list(partitions(level)) if level >= 0 else []


def fock_level(p: Partition) -> int:
    return sum(p)


def fock_norm_sq(p: Partition) -> int:
    """``||J_{-n_1}...J_{-n_k} Omega||^2 = prod(multiplicity! * part^multiplicity)``."""
    out = 1
    for part, mult in Counter(p).items():
        out *= math.factorial(mult) * part ** mult
    return out


def fock_inner(u: FockVector, v: FockVector):
    """Sesquilinear, antilinear in the first slot."""
    s = Fraction(0)
    for p, x in u.items():
        y = v.get(p)
        if y:
            xc = x.conjugate() if isinstance(x, QI) else x
            s = s + xc * y * fock_norm_sq(p)
    return simplify_scalar(s)


def fock_norm(v: FockVector) -> float:
    return math.sqrt(float(simplify_scalar(fock_inner(v, v))))


# --------------------------------------------------------------------------
# currents and Sugawara modes
# --------------------------------------------------------------------------

def j_apply(n: int, v: FockVector) -> FockVector:
    """``J_n v``: creation for n < 0, ``n * mult * (drop one part n)`` for n > 0."""
    out: FockVector = {}
    if n == 0:
        return out
    for p, x in v.items():
        if n < 0:
            _add(out, tuple(sorted(p + (-n,), reverse=True)), x)
        else:
            mult = p.count(n)
            if mult:
                i = p.index(n)
                _add(out, p[:i] + p[i + 1:], x * n * mult)
    return out


def _max_level(v: FockVector) -> int:
    return max((fock_level(p) for p in v), default=0)


def sugawara_L(n: int, v: FockVector, cutoff: int | None = None) -> FockVector:
    """``L_n = 1/2 sum_k :J_{n-k} J_k:`` acting on ``v``.

    Annihilators stand right; only finitely many terms act on a vector of
    bounded level.  ``cutoff`` drops output components above that level.
    """
    top = _max_level(v)
    out: FockVector = {}
    half = Fraction(1, 2)
    # k >= 1: J_{n-k} J_k
    for k in range(1, top + 1):
        w = j_apply(k, v)
        if w:
            _axpy(out, half, j_apply(n - k, w))
    # k <= -1: J_k J_{n-k}; J_{n-k} is creation or annihilation depending on k
    for k in range(min(n - top, 0), 0):
        if n - k == 0:
            continue
        w = j_apply(n - k, v)
        if w:
            _axpy(out, half, j_apply(k, w))
    if cutoff is not None:
        out = {p: x for p, x in out.items() if fock_level(p) <= cutoff}
    return out


# --------------------------------------------------------------------------
# deformed family
# --------------------------------------------------------------------------

def parse_coupling(text: str | int | Fraction) -> tuple[Fraction, bool]:
    """Parse ``"3/2"``, ``"i/2"``, ``"2i"``, ``"-3i/4"`` into (magnitude, imaginary)."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text), False
    s = str(text).strip().replace(" ", "")
    if "i" not in s:
        return Fraction(s), False
    if s.count("i") != 1:
        raise ValueError(f"invalid coupling {text!r}")
    num, _, den = s.partition("/")
    num = num.replace("*", "")
    if num in ("i", "+i"):
        mag = Fraction(1)
    elif num == "-i":
        mag = Fraction(-1)
    else:
        mag = Fraction(num.replace("i", ""))
    if den:
        mag /= Fraction(den)
    return mag, True


@dataclass(frozen=True)
class DeformationParams:
    """Couplings of the deformed Sugawara family.

    Each coupling is a rational magnitude times ``i`` if ``*_imag``.  With the
    default roles the modes are ``L_n + (eta + i n kappa) J_n`` (n != 0) and
    ``L_0 + (kappa^2 + eta^2)/2``: ``kappa`` then carries the central charge
    ``1 + 12 kappa^2`` and ``eta`` is a charge shift.  ``roles_as_printed``
    swaps them back to ``L_n + (kappa + i n eta) J_n``.
    """

    kappa: Fraction
    eta: Fraction = Fraction(0)
    kappa_imag: bool = False
    eta_imag: bool = False
    roles_as_printed: bool = False

    @classmethod
    def parse(cls, kappa, eta=0, roles_as_printed: bool = False) -> "DeformationParams":
        k, ki = parse_coupling(kappa)
        e, ei = parse_coupling(eta)
        return cls(k, e, ki, ei, roles_as_printed)

    @staticmethod
    def _value(mag: Fraction, imag: bool) -> QI:
        return QI(Fraction(0), mag) if imag else QI(mag)

    @property
    def kappa_value(self) -> QI:
        return self._value(self.kappa, self.kappa_imag)

    @property
    def eta_value(self) -> QI:
        return self._value(self.eta, self.eta_imag)

    @property
    def kappa_sq(self) -> Fraction:
        return -self.kappa ** 2 if self.kappa_imag else self.kappa ** 2

    @property
    def eta_sq(self) -> Fraction:
        return -self.eta ** 2 if self.eta_imag else self.eta ** 2

    @property
    def h(self) -> Fraction:
        return (self.kappa_sq + self.eta_sq) / 2

    def current_coefficient(self, n: int) -> QI:
        """Coefficient of ``J_n`` in the deformed ``L_n`` (n != 0)."""
        i_n = QI(Fraction(0), Fraction(n))
        if self.roles_as_printed:
            return self.kappa_value + i_n * self.eta_value
        return self.eta_value + i_n * self.kappa_value

    def label(self) -> str:
        def fmt(m, im):
            s = format_rational(m)
            return f"{s}i" if im else s
        return f"kappa={fmt(self.kappa, self.kappa_imag)},eta={fmt(self.eta, self.eta_imag)}"


def deformed_L(n: int, params: DeformationParams, v: FockVector, cutoff: int | None = None) -> FockVector:
    out = sugawara_L(n, v, cutoff)
    if n == 0:
        _axpy(out, params.h, v)
    else:
        _axpy(out, params.current_coefficient(n), j_apply(n, v))
        if cutoff is not None:
            out = {p: x for p, x in out.items() if fock_level(p) <= cutoff}
    return {p: simplify_scalar(x) for p, x in out.items()}


def _vac_coeff(v: FockVector):
    return simplify_scalar(v.get(VACUUM, Fraction(0)))


def detect_central_charge(params: DeformationParams):
    """``c = 2 (<Omega, [L_2, L_{-2}] Omega> - 4h)`` for the deformed modes.

    ``h`` is read off ``L_0 Omega``, so nothing about the family is assumed.
    """
    omega = {VACUUM: Fraction(1)}
    h = _vac_coeff(deformed_L(0, params, omega))
    a = deformed_L(2, params, deformed_L(-2, params, omega))
    b = deformed_L(-2, params, deformed_L(2, params, omega))
    bracket = simplify_scalar(QI.coerce(_vac_coeff(a)) - QI.coerce(_vac_coeff(b)))
    return simplify_scalar(2 * (QI.coerce(bracket) - 4 * QI.coerce(h)))


def jminus_apply(v: FockVector, cutoff: int | None = None) -> FockVector:
    """``J_- = sum_{n>0} J_n``."""
    out: FockVector = {}
    for n in range(1, _max_level(v) + 1):
        _axpy(out, 1, j_apply(n, v))
    return out


def jprime_apply(v: FockVector, cutoff: int | None = None) -> FockVector:
    """``J_-' = sum_{k>0} k J_k``."""
    out: FockVector = {}
    for k in range(1, _max_level(v) + 1):
        _axpy(out, k, j_apply(k, v))
    return out


def jplus_apply(v: FockVector, cutoff: int) -> FockVector:
    """``J_+ = sum_{n>0} J_{-n}`` truncated to output levels <= cutoff."""
    out: FockVector = {}
    for n in range(1, cutoff + 1):
        for p, x in j_apply(-n, v).items():
            if fock_level(p) <= cutoff:
                _add(out, p, x)
    return out


# --------------------------------------------------------------------------
# level matrices
# --------------------------------------------------------------------------

def _operator_matrix(apply, level: int) -> np.ndarray:
    basis = fock_basis(level)
    index = {p: i for i, p in enumerate(basis)}
    m = qzeros(len(basis), len(basis))
    for j, p in enumerate(basis):
        for q, x in apply({p: Fraction(1)}).items():
            m[index[q], j] = x
    return m


def lk_quadratic_form(level: int, params: DeformationParams | None = None) -> np.ndarray:
    """Matrix of ``sum_{k>=0} L_{-k} L_k`` on a Fock level (columns are images).

    Sugawara modes when ``params`` is None, deformed modes otherwise.  The
    matrix is in the unnormalized partition basis, so it is symmetric only
    after weighting by :func:`fock_norm_sq`.
    """
    def op(k, v):
        return sugawara_L(k, v) if params is None else deformed_L(k, params, v)

    def apply(v):
        out: FockVector = {}
        for k in range(0, level + 1):
            w = op(k, v)
            if w:
                _axpy(out, 1, op(-k, w))
        return out

    return _operator_matrix(apply, level)


def norm_weights(level: int) -> np.ndarray:
    d = qzeros(len(fock_basis(level)), len(fock_basis(level)))
    for i, p in enumerate(fock_basis(level)):
        d[i, i] = Fraction(fock_norm_sq(p))
    return d


def orthonormal_matrix(m: np.ndarray, level: int) -> np.ndarray:
    """Float matrix of the same operator in the orthonormal Fock basis."""
    s = np.sqrt([float(fock_norm_sq(p)) for p in fock_basis(level)])
    return (s[:, None] * to_float(m)) / s[None, :]


@dataclass
class LemmaLevel:
    level: int
    dimension: int
    max_eigenvalue: float
    bound: Fraction
    nonnegative: bool
    below_bound: bool

    @property
    def ok(self) -> bool:
        return self.nonnegative and self.below_bound


def sugawara_lemma_check(level: int) -> LemmaLevel:
    """Decide ``0 <= sum_{k>=0} L_{-k}L_k <= (9/4) n^3`` on a level exactly."""
    m = lk_quadratic_form(level)
    d = norm_weights(level)
    gram_form = d.dot(m) if m.size else m
    bound = Fraction(9, 4) * level ** 3
    size = m.shape[0]
    gap = qzeros(size, size)
    for i in range(size):
        for j in range(size):
            gap[i, j] = (bound if i == j else 0) * d[i, i] - gram_form[i, j]
    lower = symmetric_pivots(gram_form).psd
    upper = symmetric_pivots(gap).psd
    ev = np.linalg.eigvalsh(orthonormal_matrix(m, level)) if size else np.zeros(1)
    return LemmaLevel(level, size, float(ev.max()), bound, lower, upper)


@dataclass
class DeformedLevel:
    level: int
    eigenvalues: np.ndarray
    bound: float
    ratio: float

    def ok(self, rel_tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.eigenvalues) <= self.bound * (1 + rel_tol)))


def deformed_bound_check(params: DeformationParams, level: int, c=None, constant: Fraction = Fraction(5)) -> DeformedLevel:
    """Eigenvalues of the deformed level form against ``constant (c+1)(n+h)^3``."""
    if c is None:
        c = detect_central_charge(params)
    c = float(simplify_scalar(c)) if not isinstance(c, QI) else complex(c).real
    m = orthonormal_matrix(lk_quadratic_form(level, params), level)
    ev = np.linalg.eigvals(m) if m.size else np.zeros(1)
    bound = float(constant) * (c + 1) * (level + float(params.h)) ** 3
    top = float(np.max(np.abs(ev)))
    ratio = top / bound if bound > 0 else math.inf if top > 0 else 0.0
    return DeformedLevel(level, ev, bound, ratio)


def sum_Ln_form(window: int, cutoff: int | None = None) -> tuple[np.ndarray, np.ndarray, list[Partition]]:
    """Matrices of ``<a, (sum_n L_n) b>`` between Fock vectors of level <= window.

    Returns (termwise, split, basis) where ``termwise`` sums the Sugawara
    modes directly and ``split`` uses ``1/2 (J_+J_+ + J_-J_-) + J_+J_-``.
    """
    if cutoff is None:
        cutoff = 2 * window
    basis = [p for n in range(window + 1) for p in fock_basis(n)]
    size = len(basis)
    termwise = qzeros(size, size)
    split = qzeros(size, size)
    for j, b in enumerate(basis):
        vb = {b: Fraction(1)}
        lb = fock_level(b)
        total: FockVector = {}
        for n in range(lb - window, lb + 1):
            _axpy(total, 1, sugawara_L(n, vb))
        jm = jminus_apply(vb)
        jmjm = jminus_apply(jm)
        jpjm = jplus_apply(jm, cutoff)
        jpjp = jplus_apply(jplus_apply(vb, cutoff), cutoff)
        other: FockVector = {}
        _axpy(other, Fraction(1, 2), jpjp)
        _axpy(other, Fraction(1, 2), jmjm)
        _axpy(other, 1, jpjm)
        for i, a in enumerate(basis):
            va = {a: Fraction(1)}
            termwise[i, j] = fock_inner(va, total)
            split[i, j] = fock_inner(va, other)
    return termwise, split, basis


def virasoro_defect(op, c, level_max: int, mode_max: int) -> int:
    """Count (m, n, basis vector) triples where ``[L_m, L_n] != (m-n)L_{m+n} + c/12 (m^3-m)`` fails."""
    bad = 0
    for lvl in range(level_max + 1):
        for p in fock_basis(lvl):
            v = {p: Fraction(1)}
            for m in range(-mode_max, mode_max + 1):
                for n in range(-mode_max, mode_max + 1):
                    lhs: FockVector = {}
                    _axpy(lhs, 1, op(m, op(n, v)))
                    _axpy(lhs, -1, op(n, op(m, v)))
                    _axpy(lhs, -(m - n), op(m + n, v))
                    if m + n == 0:
                        _axpy(lhs, -QI.coerce(Fraction(m ** 3 - m, 12)) * QI.coerce(c), v)
                    if any(simplify_scalar(x) != 0 for x in lhs.values()):
                        bad += 1
    return bad


def matrix_csv(m: np.ndarray, labels: Iterable[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = list(labels) if labels is not None else [str(i) for i in range(m.shape[0])]
    w.writerow([""] + labels)

    def fmt(x):
        x = simplify_scalar(x)
        if isinstance(x, QI):
            return f"{format_rational(x.re)}+{format_rational(x.im)}i"
        return format_rational(x)

    for lab, row in zip(labels, m):
        w.writerow([lab] + [fmt(x) for x in row])
    return buf.getvalue()


def eigenvalue_csv(rows: Iterable[tuple[int, Iterable[complex]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "index", "re", "im"])
    for level, evs in rows:
        for i, z in enumerate(sorted(evs, key=lambda z: (z.real, z.imag))):
            w.writerow([level, i, repr(float(z.real)), repr(float(z.imag))])
    return buf.getvalue()
