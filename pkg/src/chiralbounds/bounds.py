"""Level-wise operator norms and the energy-bound inequalities built on them.

Norms are computed in Gram-orthonormal coordinates of the quotient levels:
for a block ``M`` from level ``n`` to level ``m`` with quotient Grams
``G_n = R_n^T R_n`` and ``G_m = R_m^T R_m`` the operator is
``R_m M R_n^{-1}``.  Exact matrices are converted to float only here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy import linalg as sla

from .algebra import (
    CURRENT,
    STRESS_ENERGY,
    W_FIELD,
    AlgebraKind,
    DomainError,
    FieldSpec,
    Gen,
    ModePolynomial,
    commutator,
    wick_square_L,
)
from .exact import NegativeForm, format_rational, qmatmul, qzeros, symmetric_pivots, to_float
from .lowest_weight import GradedModule, LevelBlockOperator, LevelRangeError

DEFAULT_TOL = 1e-9


@dataclass
class NormValue:
    value: float
    error_bound: float


@dataclass
class NormProfile:
    """``gamma(n) = ||phi_k restricted to level n||`` with float error bounds."""

    field: FieldSpec
    k: int
    gamma: dict[int, float] = field(default_factory=dict)
    error: dict[int, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "field": self.field.name,
            "k": self.k,
            "gamma": {str(n): g for n, g in sorted(self.gamma.items())},
            "error_bound": {str(n): e for n, e in sorted(self.error.items())},
        }


@dataclass
class BoundReport:
    inequality: str
    parameters: dict
    constant: float | None
    margins: list[tuple[int, float]]
    tolerance: float = DEFAULT_TOL
    exact_checks: dict[str, bool] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(m >= -self.tolerance for _, m in self.margins) and all(self.exact_checks.values())

    @property
    def min_margin(self) -> float | None:
        return min((m for _, m in self.margins), default=None)

    def to_json(self) -> dict:
        return {
            "inequality": self.inequality,
            "parameters": {k: _jsonable(v) for k, v in self.parameters.items()},
            "constant": self.constant,
            "tolerance": self.tolerance,
            "margins": [{"level": n, "margin": m} for n, m in self.margins],
            "exact_checks": dict(self.exact_checks),
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
            "passed": self.passed,
        }

    def margins_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "margin"])
        for n, m in self.margins:
            w.writerow([n, repr(m)])
        return buf.getvalue()


def _jsonable(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _rel_margin(rhs: float, lhs: float) -> float:
    """``(rhs - lhs) / max(|rhs|, 1)``; nonnegative iff lhs <= rhs."""
    return (rhs - lhs) / max(abs(rhs), 1.0)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

def _cholesky_factor(module: GradedModule, n: int) -> np.ndarray:
    try:
        g = module.quotient(n).gram
    except NegativeForm as exc:
        raise DomainError(f"Gram at level {n} is not positive semidefinite; norm undefined") from exc
    if g.shape[0] == 0:
        return np.zeros((0, 0))
    return sla.cholesky(to_float(g), lower=False)


def _orthonormal_block(module: GradedModule, block: np.ndarray, src: int, dst: int) -> np.ndarray:
    rs = _cholesky_factor(module, src)
    rt = _cholesky_factor(module, dst) if dst >= 0 else np.zeros((0, 0))
    if block.size == 0:
        return np.zeros(block.shape)
    a = rt @ to_float(block)
    # right-multiply by R_s^{-1}
    return sla.solve_triangular(rs, a.T, trans="T", lower=False).T


def spectral_norm(a: np.ndarray) -> NormValue:
    """Largest singular value via the symmetric normal matrix, with an error bound.

    The bound adds the eigen-residual of the top pair to a rounding term
    ``dim * eps * ||N||_inf``, transferred to the square root.
    """
    if a.size == 0:
        return NormValue(0.0, 0.0)
    normal = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    w, v = np.linalg.eigh(normal)
    lam = max(float(w[-1]), 0.0)
    resid = float(np.linalg.norm(normal @ v[:, -1] - w[-1] * v[:, -1]))
    gersh = float(np.max(np.sum(np.abs(normal), axis=1)))
    err_sq = resid + normal.shape[0] * np.finfo(float).eps * gersh
    val = math.sqrt(lam)
    err = err_sq / (2 * val) if val > 0 else math.sqrt(err_sq)
    return NormValue(val, err)


def level_norm(module: GradedModule, op, n: int, with_error: bool = False):
    """Norm of ``op`` (generator, polynomial or block operator) restricted to level ``n``."""
    try:
        if isinstance(op, LevelBlockOperator):
            block = op.block(n)
            grade = op.grade
        else:
            poly = op if isinstance(op, ModePolynomial) else ModePolynomial.gen(op)
            grade = poly.grade()
            block = module.mode_matrix(poly, n)
    except NegativeForm as exc:
        raise DomainError(f"Gram at level {exc.level} is not positive semidefinite; norm undefined") from exc
    res = spectral_norm(_orthonormal_block(module, block, n, n - grade))
    return res if with_error else res.value


def norm_profile(module: GradedModule, fld: FieldSpec, k: int, levels: Iterable[int]) -> NormProfile:
    prof = NormProfile(fld, k)
    for n in levels:
        r = level_norm(module, Gen(fld.family, k), n, with_error=True)
        prof.gamma[n] = r.value
        prof.error[n] = r.error_bound
    return prof


def adjoint_norm_gap(module: GradedModule, g: Gen, n: int) -> float:
    """Relative gap between ``||g_{-k}: V_n -> V_{n+k}||`` and ``||g_k: V_{n+k} -> V_n||``."""
    a = level_norm(module, Gen(g.family, -g.index), n)
    b = level_norm(module, Gen(g.family, g.index), n + g.index)
    return abs(a - b) / max(a, b, 1e-300)


# --------------------------------------------------------------------------
# bound improvement
# --------------------------------------------------------------------------

def improve_constant(C: float, k: int, beta: float) -> float:
    """``C' = sqrt(C / (k (beta + 1)))``."""
    if k == 0:
        raise DomainError("the improvement needs k != 0")
    if C <= 0 or beta <= 0:
        raise DomainError("C and beta must be positive")
    return math.sqrt(C / (abs(k) * (beta + 1)))


def replay_induction(C: float, k: int, beta: float, top: int) -> list[float]:
    """Worst case allowed by the step inequality with zero seed below ``k``."""
    b = [0.0] * (top + 1)
    for n in range(k, top + 1):
        b[n] = b[n - k] + C * (n - k + 1) ** beta
    return b


def recursion_verify(module: GradedModule, fld: FieldSpec, k: int, beta: float, max_level: int,
                     tol: float = DEFAULT_TOL) -> BoundReport:
    """Run the commutator-to-field bound improvement on a built module.

    ``C_N = max_{n<=N} ||[phi_k, phi_{-k}] on V_n|| / (n+1)^beta``; then
    ``gamma(n+k)^2 <= gamma(n)^2 + C_N (n+1)^beta`` and
    ``gamma(n)^2 <= C_N/(k(beta+1)) (n+1)^(beta+1)`` are checked for n <= N.
    """
    if k <= 0:
        raise DomainError("recursion_verify needs k >= 1")
    if module.max_level < max_level + k:
        raise LevelRangeError(f"module must be built to level {max_level + k}")
    up, down = Gen(fld.family, -k), Gen(fld.family, k)
    comm = commutator(down, up, module.alg)
    comm_norm = {n: level_norm(module, comm, n) for n in range(max_level + 1)}
    gamma = {n: level_norm(module, down, n) for n in range(max_level + k + 1)}
    c_n = max(comm_norm[n] / (n + 1) ** beta for n in range(max_level + 1))
    closed = c_n / (k * (beta + 1))
    margins = []
    step_ok = True
    closed_ok = True
    for n in range(max_level + 1):
        lhs = gamma[n + k] ** 2
        rhs = gamma[n] ** 2 + c_n * (n + 1) ** beta
        m_step = _rel_margin(rhs, lhs)
        m_closed = _rel_margin(closed * (n + 1) ** (beta + 1), gamma[n] ** 2)
        step_ok &= m_step >= -tol
        closed_ok &= m_closed >= -tol
        margins.append((n, min(m_step, m_closed)))
    worst = replay_induction(c_n, k, beta, max_level)
    implied = all(_rel_margin(closed * (n + 1) ** (beta + 1), worst[n]) >= -tol for n in range(max_level + 1))
    seed = all(gamma[n] == 0.0 for n in range(min(k, max_level + 1)))
    c_prime = improve_constant(c_n, k, beta) if c_n > 0 else 0.0
    field_ok = all(gamma[n] <= c_prime * (n + 1) ** ((beta + 1) / 2) * (1 + tol) for n in range(max_level + 1))
    return BoundReport(
        "recursion",
        {"c": module.alg.c, "h": module.h, "field": fld.name, "d": fld.dimension, "k": k, "beta": beta,
         "max_level": max_level},
        c_n,
        margins,
        tol,
        {"step": step_ok, "closed_form": closed_ok, "induction_implies_closed_form": implied,
         "zero_seed": seed, "field_bound": field_ok},
        {"C_prime": c_prime, "gamma": gamma, "commutator_norm": comm_norm},
    )


# --------------------------------------------------------------------------
# quadratic stress-energy bound
# --------------------------------------------------------------------------

def wick_zero_matrix(module: GradedModule, n: int) -> np.ndarray:
    return module.mode_matrix(wick_square_L(0), n)


def _sym_psd(a: np.ndarray) -> bool:
    return symmetric_pivots(a).psd


def _generalized_eigs(gram: np.ndarray, op: np.ndarray) -> np.ndarray:
    if gram.shape[0] == 0:
        return np.zeros(0)
    gf = to_float(gram)
    return sla.eigh(gf @ to_float(op), gf, eigvals_only=True)


def t2_bound_check(module: GradedModule, max_level: int, tol: float = DEFAULT_TOL,
                   constant: Fraction = Fraction(11)) -> BoundReport:
    """``0 <= :L^2:_0 <= constant (c+1)(1 + L_0^3)`` per quotient level, exactly and in floats.

    The exact check decides positive semidefiniteness of ``G M`` and
    ``G (K - M)``; the 5(c+1) variant is reported as a diagnostic.
    """
    module.build(max_level)
    c = module.alg.c
    margins = []
    lower_ok = upper_ok = True
    alt = {}
    for n in range(max_level + 1):
        q = module.quotient(n)
        if q.rank == 0:
            margins.append((n, 0.0))
            continue
        m = wick_zero_matrix(module, n)
        gm = qmatmul(q.gram, m)
        energy = module.h + n
        k_main = constant * (c + 1) * (1 + energy ** 3)
        k_alt = Fraction(5) * (c + 1) * (1 + energy ** 3)
        gap = k_main * q.gram - gm
        lower_ok &= _sym_psd(gm)
        upper_ok &= _sym_psd(gap)
        alt[n] = _sym_psd(k_alt * q.gram - gm)
        ev = _generalized_eigs(q.gram, m)
        scale = float(k_main)
        margins.append((n, min(float(ev.min()) / scale, (scale - float(ev.max())) / scale)))
    return BoundReport(
        "wick_square_zero",
        {"c": c, "h": module.h, "constant": constant, "max_level": max_level},
        float(constant * (c + 1)),
        margins,
        tol,
        {"nonnegative": lower_ok, "upper": upper_ok},
        {"five_c_plus_one_passes": all(alt.values()), "five_c_plus_one_by_level": alt},
    )


def wick_zero_identity_defect(module: GradedModule, n: int) -> bool:
    """True if ``:L^2:_0 = 2L_0 + L_0^2 + 2 sum_{k>=1} L_{-k} L_k`` holds on level n."""
    m = wick_zero_matrix(module, n)
    e = module.h + n
    size = m.shape[0]
    rhs = qzeros(size, size)
    for i in range(size):
        rhs[i, i] = 2 * e + e * e
    for k in range(1, n + 1):
        down = module.mode_matrix(Gen("L", k), n)
        up = module.mode_matrix(Gen("L", -k), n - k)
        if down.size and up.size:
            rhs = rhs + 2 * qmatmul(up, down)
    return all(a == b for a, b in zip(m.flat, rhs.flat))


# --------------------------------------------------------------------------
# W-field growth and linear stress-energy bound
# --------------------------------------------------------------------------

def w_optimal_report(module: GradedModule, k_list: Iterable[int], max_level: int,
                     tol: float = DEFAULT_TOL) -> BoundReport:
    """Fit ``gamma_k(n) <= C (n+1)^2`` per k and report finite-window growth exponents.

    Passing means the degree-2 fit holds.  ``lower_degree_not_excluded`` is
    always reported since a finite window cannot rule out smaller exponents.
    """
    if module.alg.kind is not AlgebraKind.W3:
        raise DomainError("w_optimal_report needs a W3 module")
    module.build(max_level)
    margins = []
    per_k = {}
    for k in k_list:
        gam = [level_norm(module, Gen("W", k), n) for n in range(max_level + 1)]
        c_fit = max(g / (n + 1) ** 2 for n, g in enumerate(gam))
        # compare ratios so the fitted level has margin exactly 0
        for n, g in enumerate(gam):
            margins.append((n, _rel_margin(c_fit, g / (n + 1) ** 2)))
        top = gam[max_level]
        exponent = math.log(top) / math.log(max_level + 1) if top > 0 and max_level > 0 else None
        prev = gam[max_level - 1] if max_level > 0 else 0.0
        local = (math.log(top / prev) / math.log((max_level + 1) / max_level)
                 if top > 0 and prev > 0 else None)
        per_k[k] = {"gamma": gam, "C": c_fit, "exponent": exponent, "local_exponent": local,
                    "lower_degree_not_excluded": True}
    return BoundReport(
        "w_degree_two",
        {"c": module.alg.c, "k_list": list(per_k), "max_level": max_level, "s": 2, "d": 3},
        max(v["C"] for v in per_k.values()) if per_k else None,
        margins,
        tol,
        {},
        {"per_k": per_k},
    )


def linear_bound_check(module: GradedModule, max_mode: int, max_level: int,
                       tol: float = DEFAULT_TOL) -> BoundReport:
    """``||L_n on V_m|| <= sqrt(1 + c/12) (1 + |n|^{3/2}) (1 + m + h)``."""
    module.build(max_level + max_mode)
    c = float(module.alg.c)
    pref = math.sqrt(1 + c / 12)
    margins = []
    for m in range(max_level + 1):
        worst = math.inf
        for n in range(-max_mode, max_mode + 1):
            if m - n > module.max_level or m - n < 0:
                continue
            val = level_norm(module, Gen("L", n), m)
            rhs = pref * (1 + abs(n) ** 1.5) * (1 + m + float(module.h))
            worst = min(worst, _rel_margin(rhs, val))
        margins.append((m, worst))
    return BoundReport("linear_stress_energy", {"c": module.alg.c, "h": module.h, "max_mode": max_mode,
                                                "max_level": max_level}, pref, margins, tol)


FIELDS = {"L": STRESS_ENERGY, "W": W_FIELD, "J": CURRENT}
