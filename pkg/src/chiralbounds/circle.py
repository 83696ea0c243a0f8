"""Test functions on the circle, smeared fields on truncated modules, and circle diffeomorphisms.

A test function is a trig polynomial ``f(e^{i theta}) = sum_n fhat_n e^{i n theta}``.
Derivatives use ``f' := (1/i) d/dtheta``, i.e. coefficients ``n fhat_n``.
A diffeomorphism is stored through its lift ``sigma`` on a uniform grid with
``gamma(e^{i theta}) = e^{i sigma(theta)}``; the periodic part
``sigma(theta) - theta`` is interpolated trigonometrically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .algebra import FieldSpec, Gen, STRESS_ENERGY, W_FIELD, DomainError, ModePolynomial, commutator, normal_order
from .exact import QI, format_rational, qzeros, simplify_scalar, to_complex, to_float
from .lowest_weight import GradedModule, LevelRangeError

TWO_PI = 2 * math.pi
DEFAULT_GRID = 2 ** 12


class AccuracyError(RuntimeError):
    """Numerical tolerance not met; ``achieved`` holds the residual."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, QI))


def _scalar_key(x):
    x = simplify_scalar(x)
    return Fraction(x) if isinstance(x, int) else x


# --------------------------------------------------------------------------
# test functions
# --------------------------------------------------------------------------

class TestFunction:
    """Trig polynomial on the circle with exact or float coefficients."""

    __test__ = False  # not a pytest class

    def __init__(self, coeffs: Mapping[int, object], real: bool | None = None, positive: bool | None = None):
        cleaned = {}
        for n, x in coeffs.items():
            x = _scalar_key(x) if _is_exact(x) else complex(x)
            if x != 0:
                cleaned[int(n)] = x
        self.coeffs: dict[int, object] = dict(sorted(cleaned.items()))
        self.real = self._check_real() if real is None else real
        self.positive = positive
        self._vec = None

    # -- constructors --------------------------------------------------------
    @classmethod
    def constant(cls, a=1) -> "TestFunction":
        return cls({0: a}, real=True)

    @classmethod
    def exponential(cls, k: int) -> "TestFunction":
        """``e_k(z) = z^k``."""
        return cls({k: Fraction(1)})

    @classmethod
    def cosine(cls, k: int, amplitude=1) -> "TestFunction":
        a = Fraction(amplitude) if _is_exact(amplitude) else amplitude
        if k == 0:
            return cls({0: a}, real=True)
        return cls({k: a / 2, -k: a / 2}, real=True)

    @classmethod
    def from_samples(cls, samples: np.ndarray, degree: int | None = None, trim: float = 1e-15) -> "TestFunction":
        """Coefficients from uniform samples on [0, 2pi) by FFT, trimmed to ``degree``."""
        samples = np.asarray(samples)
        m = samples.shape[0]
        hat = np.fft.fft(samples) / m
        top = m // 2 - 1 if degree is None else min(degree, m // 2 - 1)
        scale = float(np.max(np.abs(hat))) if hat.size else 0.0
        coeffs = {}
        for n in range(-top, top + 1):
            x = hat[n % m]
            if abs(x) > trim * max(scale, 1.0):
                coeffs[n] = complex(x)
        real = bool(np.all(np.isreal(samples)))
        return cls(coeffs, real=real)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], grid: int = DEFAULT_GRID,
                      degree: int | None = None) -> "TestFunction":
        return cls.from_samples(fn(uniform_grid(grid)), degree)

    # -- structure -------------------------------------------------------------
    def _check_real(self) -> bool:
        for n, x in self.coeffs.items():
            y = self.coeffs.get(-n, 0)
            if _is_exact(x) and _is_exact(y):
                if QI.coerce(x).conjugate() != QI.coerce(y):
                    return False
            elif abs(complex(x).conjugate() - complex(y)) > 1e-14 * max(1.0, abs(complex(x))):
                return False
        return True

    @property
    def degree(self) -> int:
        return max((abs(n) for n in self.coeffs), default=0)

    @property
    def exact(self) -> bool:
        return all(_is_exact(x) for x in self.coeffs.values())

    def coefficient(self, n: int):
        return self.coeffs.get(n, Fraction(0) if self.exact else 0j)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        out = dict(self.coeffs)
        for n, x in other.coeffs.items():
            out[n] = out.get(n, 0) + x
        return TestFunction(out)

    def scale(self, a) -> "TestFunction":
        return TestFunction({n: a * x for n, x in self.coeffs.items()})

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + other.scale(-1)

    def __mul__(self, other: "TestFunction") -> "TestFunction":
        out: dict[int, object] = {}
        for n, x in self.coeffs.items():
            for m, y in other.coeffs.items():
                out[n + m] = out.get(n + m, 0) + x * y
        return TestFunction(out)

    def power(self, k: int) -> "TestFunction":
        out = TestFunction.constant(1)
        for _ in range(k):
            out = out * self
        return out

    def derivative(self) -> "TestFunction":
        """``(1/i) d/dtheta``: coefficient ``n fhat_n``."""
        return TestFunction({n: n * x for n, x in self.coeffs.items()})

    def _arrays(self):
        if self._vec is None:
            ns = np.array(sorted(self.coeffs), dtype=float)
            cs = np.array([to_complex(self.coeffs[int(n)]) for n in ns], dtype=complex)
            self._vec = (ns, cs)
        return self._vec

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        ns, cs = self._arrays()
        if ns.size == 0:
            return np.zeros(theta.shape, dtype=complex)
        flat = theta.reshape(-1)
        out = np.empty(flat.shape, dtype=complex)
        chunk = max(1, 2 ** 20 // max(ns.size, 1))
        for s in range(0, flat.size, chunk):
            out[s:s + chunk] = np.exp(1j * np.outer(flat[s:s + chunk], ns)) @ cs
        return out.reshape(theta.shape)

    def values(self, theta) -> np.ndarray:
        v = self(theta)
        return v.real if self.real else v

    def samples(self, grid: int = DEFAULT_GRID) -> np.ndarray:
        return self.values(uniform_grid(grid))

    def to_json(self) -> dict:
        def enc(x):
            if isinstance(x, QI):
                return {"re": format_rational(x.re), "im": format_rational(x.im)}
            if isinstance(x, Fraction):
                return {"re": format_rational(x), "im": "0/1"}
            return {"re": complex(x).real, "im": complex(x).imag}
        return {"coefficients": [{"n": n, **enc(x)} for n, x in self.coeffs.items()], "real": self.real}

    @classmethod
    def from_json(cls, doc: dict) -> "TestFunction":
        coeffs = {}
        for e in doc["coefficients"]:
            re, im = e["re"], e["im"]
            if isinstance(re, str):
                coeffs[e["n"]] = simplify_scalar(QI(Fraction(re), Fraction(im)))
            else:
                coeffs[e["n"]] = complex(re, im)
        return cls(coeffs, real=doc.get("real"))

    def samples_csv(self, grid: int = 256) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "re", "im"])
        th = uniform_grid(grid)
        for t, v in zip(th, self(th)):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    def __repr__(self):
        return f"TestFunction({self.coeffs})"


def uniform_grid(m: int) -> np.ndarray:
    return TWO_PI * np.arange(m) / m


def ng_constant(g: TestFunction, grid: int = DEFAULT_GRID) -> float:
    """``N_g = (1/2pi) int 1/g dtheta`` by the periodic trapezoid rule."""
    vals = g(uniform_grid(grid))
    if np.max(np.abs(vals.imag)) > 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        raise DomainError("N_g needs a real function")
    if float(vals.real.min()) <= 0:
        raise DomainError("N_g needs a strictly positive function")
    return float(np.mean(1.0 / vals.real))


# --------------------------------------------------------------------------
# diffeomorphisms
# --------------------------------------------------------------------------

class CircleDiffeo:
    """Orientation preserving circle diffeomorphism through its lift on a uniform grid."""

    def __init__(self, sigma: np.ndarray, trim: float = 1e-16):
        sigma = np.asarray(sigma, dtype=float)
        self.grid = sigma.shape[0]
        self.theta = uniform_grid(self.grid)
        self.sigma = sigma
        if np.any(np.diff(sigma) <= 0) or sigma[-1] >= sigma[0] + TWO_PI:
            raise DomainError("lift must be strictly increasing with sigma(2pi) = sigma(0) + 2pi")
        hat = np.fft.fft(sigma - self.theta) / self.grid
        half = self.grid // 2
        hat[half] = 0.0
        ns = np.fft.fftfreq(self.grid, d=1.0 / self.grid)
        scale = max(float(np.max(np.abs(hat))), 1.0)
        keep = np.abs(hat) > trim * scale
        self._ns = ns[keep]
        self._hat = hat[keep]

    @property
    def offset(self) -> float:
        """``sigma(0)``."""
        return float(self.sigma[0])

    # -- constructors --------------------------------------------------------
    @classmethod
    def identity(cls, grid: int = DEFAULT_GRID) -> "CircleDiffeo":
        return cls(uniform_grid(grid))

    @classmethod
    def rotation(cls, angle: float, grid: int = DEFAULT_GRID) -> "CircleDiffeo":
        return cls(uniform_grid(grid) + angle)

    @classmethod
    def mobius(cls, a: complex, b: complex, grid: int = DEFAULT_GRID) -> "CircleDiffeo":
        """``z -> (a z + b) / (conj(b) z + conj(a))`` with ``|a| > |b|``."""
        if abs(a) <= abs(b):
            raise DomainError("Möbius map needs |a| > |b|")
        th = uniform_grid(grid)
        z = np.exp(1j * th)
        w = (a * z + b) / (np.conj(b) * z + np.conj(a))
        return cls(np.unwrap(np.angle(w)))

    @classmethod
    def from_lift(cls, fn: Callable[[np.ndarray], np.ndarray], grid: int = DEFAULT_GRID) -> "CircleDiffeo":
        return cls(fn(uniform_grid(grid)))

    # -- evaluation ------------------------------------------------------------
    def _series(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.empty(flat.shape, dtype=complex)
        w = (1j * self._ns) ** order * self._hat
        chunk = max(1, 2 ** 20 // max(self._ns.size, 1))
        for s in range(0, flat.size, chunk):
            out[s:s + chunk] = np.exp(1j * np.outer(flat[s:s + chunk], self._ns)) @ w
        return out.real.reshape(x.shape)

    def __call__(self, x) -> np.ndarray:
        """``sigma(x)`` for arbitrary real ``x``."""
        x = np.asarray(x, dtype=float)
        return x + self._series(x, 0)

    def derivative(self, x=None, order: int = 1) -> np.ndarray:
        x = self.theta if x is None else np.asarray(x, dtype=float)
        d = self._series(x, order)
        return d + 1.0 if order == 1 else d

    def compose(self, inner: "CircleDiffeo") -> "CircleDiffeo":
        """``self o inner``."""
        return CircleDiffeo(self(inner.sigma))

    def invert_at(self, y: np.ndarray, tol: float = 1e-14, iters: int = 50) -> np.ndarray:
        """Solve ``sigma(x) = y`` by Newton iteration."""
        y = np.asarray(y, dtype=float)
        base = np.concatenate([self.sigma - TWO_PI, self.sigma, self.sigma + TWO_PI])
        grid = np.concatenate([self.theta - TWO_PI, self.theta, self.theta + TWO_PI])
        shift = np.floor((y - self.sigma[0]) / TWO_PI) * TWO_PI
        x = np.interp(y - shift, base, grid) + shift
        for _ in range(iters):
            step = (self(x) - y) / self.derivative(x)
            x = x - step
            if np.max(np.abs(step)) < tol:
                break
        return x

    def inverse(self) -> "CircleDiffeo":
        x = self.invert_at(self.theta)
        # lift of the inverse must be increasing; shift keeps sigma(0) in range
        return CircleDiffeo(x)

    def lift_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "sigma"])
        for t, s in zip(self.theta, self.sigma):
            w.writerow([repr(float(t)), repr(float(s))])
        return buf.getvalue()


def periodicity_defect(g: TestFunction, steps: int = DEFAULT_GRID) -> float:
    """Integrate two periods and report ``max |sigma(s + 2pi) - sigma(s) - 2pi|``."""
    traj = _rk4(g, steps, periods=2)
    return float(np.max(np.abs(traj[steps:2 * steps] - traj[:steps] - TWO_PI)))


def _rk4(g: TestFunction, steps: int, periods: int = 1) -> np.ndarray:
    if not g.real:
        raise DomainError("the vector field must be real")
    ng = ng_constant(g)
    h = TWO_PI / steps
    out = np.empty(steps * periods + 1)
    y = 0.0
    out[0] = y
    ns, cs = g._arrays()

    def f(y):
        return ng * float((np.exp(1j * ns * y) @ cs).real)

    for i in range(steps * periods):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        out[i + 1] = y
    return out


@dataclass
class FlowResult:
    diffeo: CircleDiffeo
    ng: float
    residual: float
    periodicity: float
    endpoint_error: float


def exp_vector_field(g: TestFunction, steps: int = DEFAULT_GRID, tol: float = 1e-6,
                     check_periodicity: bool = True) -> FlowResult:
    """Solve ``sigma' = N_g g(e^{i sigma})``, ``sigma(0) = 0`` by RK4 on ``steps`` steps.

    The residual is ``sup_j |sigma'(theta_j) - N_g g(sigma(theta_j))|`` with
    ``sigma'`` from spectral differentiation of the computed lift.
    """
    if steps < 8 or steps & (steps - 1):
        raise DomainError("step count must be a power of two >= 8")
    ng = ng_constant(g)
    traj = _rk4(g, steps, periods=1)
    endpoint = abs(traj[-1] - TWO_PI)
    try:
        gamma = CircleDiffeo(traj[:-1])
    except DomainError as exc:
        raise AccuracyError(f"{steps} steps give an invalid lift ({exc})", math.inf) from exc
    lhs = gamma.derivative()
    rhs = ng * g(gamma.sigma).real
    residual = float(np.max(np.abs(lhs - rhs)))
    period = periodicity_defect(g, steps) if check_periodicity else float("nan")
    if residual > tol:
        raise AccuracyError(f"flow residual {residual:.3e} exceeds {tol:.1e} at {steps} steps", residual)
    return FlowResult(gamma, ng, residual, period, endpoint)


def flow_generator_residual(flow: FlowResult, g: TestFunction, grid: int | None = None) -> float:
    """``sup |(d gamma o gamma^{-1}) - N_g g|`` evaluated on a uniform grid of target points."""
    gamma = flow.diffeo
    th = uniform_grid(grid or gamma.grid)
    x = gamma.invert_at(th)
    return float(np.max(np.abs(gamma.derivative(x) - flow.ng * g(th).real)))


def covariance_transform(gamma: CircleDiffeo, f: TestFunction, d: int, grid: int | None = None,
                         as_function: bool = True):
    """``(d gamma o gamma^{-1})^{d-1} (f o gamma^{-1})`` on the grid.

    Returns a :class:`TestFunction` built from the samples (FFT), or the raw
    samples when ``as_function`` is False.
    """
    th = uniform_grid(grid or gamma.grid)
    x = gamma.invert_at(th)
    vals = gamma.derivative(x) ** (d - 1) * f(x)
    if f.real:
        vals = vals.real
    return TestFunction.from_samples(vals) if as_function else vals


def span_residual(f: TestFunction, max_abs_index: int) -> float:
    """Largest Fourier coefficient outside ``|n| <= max_abs_index``."""
    return max((abs(to_complex(x)) for n, x in f.coeffs.items() if abs(n) > max_abs_index), default=0.0)


def schwarzian(gamma: CircleDiffeo, x=None) -> np.ndarray:
    """Circle Schwarzian ``S(sigma) + (sigma'^2 - 1)/2``; vanishes exactly on Möbius maps.

    For ``z = e^{i theta}`` this equals ``-z^2 {gamma, z}`` in terms of the
    holomorphic Schwarz derivative.
    """
    d1 = gamma.derivative(x, 1)
    d2 = gamma.derivative(x, 2)
    d3 = gamma.derivative(x, 3)
    return d3 / d1 - 1.5 * (d2 / d1) ** 2 + 0.5 * (d1 ** 2 - 1)


def schwarzian_cocycle(gamma: CircleDiffeo, f: TestFunction, c) -> float:
    """``r = -(c/24) (1/2pi) int s(theta) f(theta) dtheta`` with ``s`` the circle Schwarzian."""
    s = schwarzian(gamma)
    fv = f(gamma.theta)
    val = np.mean(s * fv)
    return float((-float(c) / 24 * val).real)


# --------------------------------------------------------------------------
# smeared fields on truncated modules
# --------------------------------------------------------------------------

Block = dict[tuple[int, int], np.ndarray]


class SmearedOperator:
    """Level-block matrix of ``sum_n fhat_n phi_n`` on levels <= cutoff.

    ``blocks[(target, source)]`` is in quotient coordinates.
    """

    def __init__(self, module: GradedModule, blocks: Block, cutoff: int):
        self.module = module
        self.blocks = blocks
        self.cutoff = cutoff

    def __matmul__(self, other: "SmearedOperator") -> "SmearedOperator":
        out: Block = {}
        by_target: dict[int, list] = {}
        for (t, s), b in other.blocks.items():
            by_target.setdefault(t, []).append((s, b))
        for (t, mid), a in self.blocks.items():
            for s, b in by_target.get(mid, []):
                prod = a.dot(b) if a.size and b.size else qzeros(a.shape[0], b.shape[1])
                out[(t, s)] = out[(t, s)] + prod if (t, s) in out else prod
        return SmearedOperator(self.module, out, self.cutoff)

    def __sub__(self, other: "SmearedOperator") -> "SmearedOperator":
        out = dict(self.blocks)
        for k, b in other.blocks.items():
            out[k] = out[k] - b if k in out else -b
        return SmearedOperator(self.module, out, self.cutoff)

    def __add__(self, other: "SmearedOperator") -> "SmearedOperator":
        return self - other.scale(-1)

    def scale(self, a) -> "SmearedOperator":
        return SmearedOperator(self.module, {k: a * b for k, b in self.blocks.items()}, self.cutoff)

    def restrict(self, window: int) -> "SmearedOperator":
        return SmearedOperator(self.module, {k: b for k, b in self.blocks.items()
                                             if k[0] <= window and k[1] <= window}, window)

    def dense(self, levels: int | None = None, orthonormal: bool = True) -> np.ndarray:
        """Complex matrix on levels <= ``levels`` (Gram-orthonormal coordinates by default)."""
        from .bounds import _orthonormal_block

        top = self.cutoff if levels is None else levels
        ranks = [self.module.quotient(n).rank for n in range(top + 1)]
        offs = np.concatenate([[0], np.cumsum(ranks)]).astype(int)
        out = np.zeros((offs[-1], offs[-1]), dtype=complex)
        for (t, s), b in self.blocks.items():
            if t > top or s > top or b.size == 0:
                continue
            if orthonormal:
                blk = _complex_orthonormal(self.module, b, s, t)
            else:
                blk = _complex(b)
            out[offs[t]:offs[t + 1], offs[s]:offs[s + 1]] += blk
        return out

    def max_abs(self) -> float:
        m = 0.0
        for b in self.blocks.values():
            for x in b.flat:
                m = max(m, abs(to_complex(x)) if _is_exact(x) else abs(complex(x)))
        return m

    def is_exact_zero(self) -> bool:
        return all(_is_exact(x) and not x for b in self.blocks.values() for x in b.flat)


def _complex(b: np.ndarray) -> np.ndarray:
    return np.array([[to_complex(x) if _is_exact(x) else complex(x) for x in row] for row in b],
                    dtype=complex).reshape(b.shape)


def _complex_orthonormal(module: GradedModule, b: np.ndarray, src: int, dst: int) -> np.ndarray:
    from .bounds import _cholesky_factor
    from scipy import linalg as sla

    rs = _cholesky_factor(module, src)
    rt = _cholesky_factor(module, dst)
    a = rt @ _complex(b)
    return sla.solve_triangular(rs, a.T, trans="T", lower=False).T


class _ModeCache:
    def __init__(self, module: GradedModule):
        self.module = module
        self.cache: dict[tuple[str, int, int], np.ndarray] = {}

    def get(self, family: str, k: int, n: int) -> np.ndarray:
        key = (family, k, n)
        hit = self.cache.get(key)
        if hit is None:
            hit = self.module.mode_matrix(Gen(family, k), n)
            self.cache[key] = hit
        return hit


_CACHES: dict[int, _ModeCache] = {}


def _mode_cache(module: GradedModule) -> _ModeCache:
    c = _CACHES.get(id(module))
    if c is None or c.module is not module:
        c = _ModeCache(module)
        _CACHES[id(module)] = c
    return c


def smear_truncated(module: GradedModule, family: str, f: TestFunction, cutoff: int) -> SmearedOperator:
    """``phi(f) = sum_n fhat_n phi_n`` on quotient levels <= cutoff."""
    if module.max_level < cutoff:
        raise LevelRangeError(f"module built to {module.max_level}, cutoff {cutoff}")
    cache = _mode_cache(module)
    blocks: Block = {}
    for k, x in f.coeffs.items():
        for n in range(cutoff + 1):
            t = n - k
            if t < 0 or t > cutoff:
                continue
            m = cache.get(family, k, n)
            if m.size == 0:
                continue
            term = x * m
            blocks[(t, n)] = blocks[(t, n)] + term if (t, n) in blocks else term
    return SmearedOperator(module, blocks, cutoff)


def bracket_test_function(f: TestFunction, g: TestFunction, d: int) -> TestFunction:
    """``(d-1) f g' - f' g``."""
    return (f * g.derivative()).scale(d - 1) - f.derivative() * g


def calibrate_bracket_sign(fld: FieldSpec, alg) -> int:
    """Sign ``s`` with ``[phi(f), T(g)] = s phi((d-1) f g' - f' g)``, fixed on ``f = e_1, g = e_{-1}``."""
    lhs = normal_order(commutator(Gen(fld.family, 1), Gen("L", -1), alg), alg)
    rhs_fn = bracket_test_function(TestFunction.exponential(1), TestFunction.exponential(-1), fld.dimension)
    coeff = rhs_fn.coefficient(0)
    mode = lhs.coeff((Gen(fld.family, 0),))
    if not coeff or not mode:
        raise DomainError("calibration pair gives a vanishing bracket")
    ratio = Fraction(mode) / Fraction(coeff)
    if ratio not in (1, -1):
        raise DomainError(f"bracket calibration ratio {ratio} is not a sign")
    return int(ratio)


@dataclass
class WindowReport:
    window: int
    cutoff: int
    sign: int
    bracket_max: float
    identity_defect: float
    exact: bool

    def to_json(self) -> dict:
        return {"window": self.window, "cutoff": self.cutoff, "sign": self.sign,
                "bracket_max": self.bracket_max, "identity_defect": self.identity_defect, "exact": self.exact}


def virasoro_cocycle(f: TestFunction, g: TestFunction, c):
    """Scalar part of ``[T(f), T(g)]``: ``(c/12) sum_m (m^3 - m) fhat_m ghat_{-m}``."""
    total = 0
    for m, x in f.coeffs.items():
        y = g.coeffs.get(-m)
        if y is not None:
            total = total + Fraction(m ** 3 - m) * x * y
    return simplify_scalar(total * c / 12) if total else 0


def scalar_operator(module: GradedModule, a, window: int) -> "SmearedOperator":
    blocks: Block = {}
    for n in range(window + 1):
        r = module.quotient(n).rank
        if r:
            blk = qzeros(r, r)
            for i in range(r):
                blk[i, i] = a
            blocks[(n, n)] = blk
    return SmearedOperator(module, blocks, window)


def commutator_window_check(module: GradedModule, f: TestFunction, g: TestFunction, fld: FieldSpec,
                            cutoff: int) -> WindowReport:
    """Compare ``[phi(f), T(g)]`` with the smeared bracket field on the exact window.

    The window is levels ``<= cutoff - deg f - deg g``; both products only pass
    through levels <= cutoff there, so truncation does not enter.
    """
    window = cutoff - f.degree - g.degree
    if window < 0:
        raise LevelRangeError("empty window: cutoff too small for the degrees")
    sign = calibrate_bracket_sign(fld, module.alg)
    a = smear_truncated(module, fld.family, f, cutoff)
    b = smear_truncated(module, "L", g, cutoff)
    bracket = ((a @ b) - (b @ a)).restrict(window)
    field_side = smear_truncated(module, fld.family, bracket_test_function(f, g, fld.dimension), cutoff)
    field_side = field_side.restrict(window).scale(sign)
    if fld.family == "L":
        # T is not primary: the Virasoro cocycle adds a scalar
        central = virasoro_cocycle(f, g, module.alg.c)
        if central:
            field_side = field_side + scalar_operator(module, central, window)
    diff = bracket - field_side
    exact = f.exact and g.exact
    return WindowReport(window, cutoff, sign, _max_abs_orth(bracket, window), _max_abs_orth(diff, window), exact)


def _max_abs_orth(op: SmearedOperator, window: int) -> float:
    if not op.blocks:
        return 0.0
    if op.is_exact_zero():
        return 0.0
    m = op.dense(window)
    return float(np.max(np.abs(m))) if m.size else 0.0


def vanishing_bracket_check(module: GradedModule, g: TestFunction, fld: FieldSpec, cutoff: int) -> WindowReport:
    """``[phi(g^{d-1}), T(g)]`` on the window; the bracket field vanishes identically."""
    return commutator_window_check(module, g.power(fld.dimension - 1), g, fld, cutoff)


@dataclass
class SpectrumSequence:
    cutoffs: list[int]
    minima: list[float]

    @property
    def non_increasing(self) -> bool:
        return all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(self.minima, self.minima[1:]))

    @property
    def decreasing_trend(self) -> bool:
        """Strictly decreasing from first to last cutoff: hint of unboundedness below."""
        return len(self.minima) > 1 and all(b < a - 1e-12 for a, b in zip(self.minima, self.minima[1:]))

    @property
    def r_estimate(self) -> float:
        """``-min Sp`` at the largest cutoff; a truncation estimate, not the true constant."""
        return -self.minima[-1]

    def to_json(self) -> dict:
        return {"cutoffs": self.cutoffs, "minima": self.minima, "non_increasing": self.non_increasing,
                "decreasing_trend": self.decreasing_trend, "r_estimate": self.r_estimate}


def t_min_spectrum_sequence(module: GradedModule, g: TestFunction, cutoffs: Sequence[int]) -> SpectrumSequence:
    """Minimum eigenvalue of truncated ``T(g)`` (Gram-orthonormal, Hermitian part) per cutoff."""
    top = max(cutoffs)
    t = smear_truncated(module, "L", g, top)
    full = t.dense(top)
    ranks = [module.quotient(n).rank for n in range(top + 1)]
    offs = np.cumsum([0] + ranks)
    minima = []
    for n in cutoffs:
        m = full[:offs[n + 1], :offs[n + 1]]
        herm = 0.5 * (m + m.conj().T)
        minima.append(float(np.linalg.eigvalsh(herm).min()) if herm.size else 0.0)
    return SpectrumSequence(list(cutoffs), minima)


@dataclass
class ProbeRow:
    level: int
    numerator: float
    denominator: float
    ratio: float | None
    skipped: bool


def local_bound_probe(module: GradedModule, g: TestFunction, cutoff: int,
                      samples: Iterable[np.ndarray] | int = 50, seed: int = 0,
                      r_estimate: float | None = None) -> list[ProbeRow]:
    """Ratios ``||W(g^2) psi|| / ||(T(g) + r)^2 psi||`` for samples of level <= cutoff/2.

    Samples are vectors in Gram-orthonormal coordinates on levels <= cutoff/2,
    padded to the cutoff.  Exploratory only.
    """
    half = cutoff // 2
    if r_estimate is None:
        r_estimate = t_min_spectrum_sequence(module, g, [cutoff]).r_estimate
    w = smear_truncated(module, "W", g.power(2), cutoff).dense(cutoff)
    t = smear_truncated(module, "L", g, cutoff).dense(cutoff)
    size = t.shape[0]
    shifted = t + r_estimate * np.eye(size)
    ranks = [module.quotient(n).rank for n in range(cutoff + 1)]
    offs = np.cumsum([0] + ranks)
    low = int(offs[half + 1])
    if isinstance(samples, int):
        rng = np.random.default_rng(seed)
        vecs = []
        for _ in range(samples):
            v = rng.standard_normal(low) + 1j * rng.standard_normal(low)
            vecs.append(v / np.linalg.norm(v))
    else:
        vecs = [np.asarray(v, dtype=complex) for v in samples]
    rows = []
    for v in vecs:
        psi = np.zeros(size, dtype=complex)
        psi[:v.size] = v
        lvl = max((n for n in range(cutoff + 1) if np.any(np.abs(psi[offs[n]:offs[n + 1]]) > 0)), default=0)
        num = float(np.linalg.norm(w @ psi))
        den = float(np.linalg.norm(shifted @ (shifted @ psi)))
        if den < 1e-12:
            rows.append(ProbeRow(lvl, num, den, None, True))
        else:
            rows.append(ProbeRow(lvl, num, den, num / den, False))
    return rows


def level_vector(module: GradedModule, level: int, coords: Sequence, cutoff: int) -> np.ndarray:
    """Embed Gram-orthonormal coordinates of one level into the truncated space."""
    ranks = [module.quotient(n).rank for n in range(cutoff + 1)]
    offs = np.cumsum([0] + ranks)
    v = np.zeros(offs[level + 1], dtype=complex)
    v[offs[level]:offs[level + 1]] = coords
    return v
