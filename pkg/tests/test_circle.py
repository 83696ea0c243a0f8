import csv
import io
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralbounds.algebra import DomainError, L, W, STRESS_ENERGY, W_FIELD
from chiralbounds.circle import (
    AccuracyError,
    CircleDiffeo,
    TestFunction,
    bracket_test_function,
    calibrate_bracket_sign,
    commutator_window_check,
    covariance_transform,
    exp_vector_field,
    flow_generator_residual,
    level_vector,
    local_bound_probe,
    ng_constant,
    schwarzian,
    schwarzian_cocycle,
    smear_truncated,
    span_residual,
    t_min_spectrum_sequence,
    uniform_grid,
    vanishing_bracket_check,
)
from chiralbounds.exact import to_complex

GENERIC = TestFunction({0: Fraction(3), 2: Fraction(1, 2), -2: Fraction(1, 2), 3: Fraction(1, 4), -3: Fraction(1, 4)})


def exact_blocks_equal(a, b):
    keys = set(a.blocks) | set(b.blocks)
    for k in keys:
        x, y = a.blocks.get(k), b.blocks.get(k)
        if x is None:
            x = np.zeros_like(y)
        if y is None:
            y = np.zeros_like(x)
        if not all(p == q for p, q in zip(x.flat, y.flat)):
            return False
    return True


# -- test functions ----------------------------------------------------------------

def test_function_basics():
    c = TestFunction.cosine(2, Fraction(3))
    assert c.coefficient(2) == c.coefficient(-2) == Fraction(3, 2)
    assert c.real and c.degree == 2 and c.exact
    th = uniform_grid(64)
    assert np.allclose(c(th), 3 * np.cos(2 * th), atol=1e-14)
    assert np.allclose((c * c)(th), 9 * np.cos(2 * th) ** 2, atol=1e-13)
    d = c.derivative()
    assert d.coefficient(2) == 3 and d.coefficient(-2) == -3
    e = TestFunction.exponential(3)
    assert not e.real and np.allclose(e(th), np.exp(3j * th))


def test_from_samples_matches_trig_evaluation():
    th = uniform_grid(256)
    f = TestFunction.from_samples(np.exp(np.cos(th)))
    assert np.max(np.abs(f(th) - np.exp(np.cos(th)))) < 1e-12
    assert f.real


def test_function_json_and_csv():
    doc = json.loads(json.dumps(GENERIC.to_json()))
    back = TestFunction.from_json(doc)
    assert back.coeffs == GENERIC.coeffs
    rows = list(csv.reader(io.StringIO(GENERIC.samples_csv(16))))
    assert len(rows) == 17
    assert float(rows[1][1]) == pytest.approx(float(GENERIC(0.0).real))


# -- N_g ---------------------------------------------------------------------------

def test_ng_examples():
    assert ng_constant(TestFunction.constant(1)) == pytest.approx(1, rel=1e-15)
    assert ng_constant(TestFunction({0: Fraction(2), 1: Fraction(1, 2), -1: Fraction(1, 2)})) == pytest.approx(
        1 / math.sqrt(3), rel=1e-12)
    assert ng_constant(TestFunction.constant(Fraction(7, 2))) == pytest.approx(2 / 7, rel=1e-15)
    with pytest.raises(DomainError):
        ng_constant(TestFunction.cosine(1))


@pytest.mark.parametrize("k", [1, 3, 8, 16])
@pytest.mark.parametrize("a,b", [(2, 1), (1.25, 1), (5, 3)])
def test_ng_closed_form(a, b, k):
    # (1/2pi) int dtheta / (a + b cos k theta) = 1/sqrt(a^2 - b^2)
    g = TestFunction({0: a, k: b / 2, -k: b / 2})
    assert ng_constant(g) == pytest.approx(1 / math.sqrt(a * a - b * b), rel=1e-10)


# -- flows -------------------------------------------------------------------------

def test_flow_of_constant_is_identity():
    res = exp_vector_field(TestFunction.constant(1))
    assert np.max(np.abs(res.diffeo.sigma - res.diffeo.theta)) < 1e-12


def test_flow_of_two_plus_cos():
    g = TestFunction({0: 2, 1: 0.5, -1: 0.5})
    res = exp_vector_field(g)
    assert res.ng == pytest.approx(1 / math.sqrt(3), rel=1e-12)
    assert res.residual <= 1e-6
    assert res.periodicity <= 1e-8
    assert res.endpoint_error <= 1e-8
    assert flow_generator_residual(res, g) <= 1e-6


def test_flow_accuracy_error():
    g = TestFunction({0: 1.1, 5: 0.5, -5: 0.5})
    with pytest.raises(AccuracyError) as exc:
        exp_vector_field(g, steps=16, tol=1e-12)
    assert exc.value.achieved > 1e-12


@settings(max_examples=8, deadline=None)
@given(coeffs=st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=8))
def test_flow_residual_random_fields(coeffs):
    g = TestFunction({0: 0.0})
    for k, (a, b) in enumerate(coeffs, start=1):
        g = g + TestFunction({k: complex(a, -b) / 2, -k: complex(a, b) / 2})
    lo = float(g(uniform_grid(4096)).real.min())
    g = g + TestFunction.constant(0.1 - lo)
    res = exp_vector_field(g, tol=1.0)
    assert res.residual <= 1e-6


# -- covariance ----------------------------------------------------------------------

def test_covariance_identity():
    out = covariance_transform(CircleDiffeo.identity(256), GENERIC, 3)
    for n in range(-4, 5):
        assert abs(to_complex(out.coefficient(n)) - to_complex(GENERIC.coefficient(n))) < 1e-12


@pytest.mark.parametrize("k", [-2, 1, 3])
def test_covariance_rotation(k):
    alpha = 0.7
    out = covariance_transform(CircleDiffeo.rotation(alpha, 256), TestFunction.exponential(k), 3)
    coeff = to_complex(out.coefficient(k))
    assert abs(coeff - np.exp(-1j * k * alpha)) < 1e-12
    assert span_residual(out, abs(k)) < 1e-12


def test_covariance_mobius_keeps_span():
    gamma = CircleDiffeo.mobius(1.0, 0.3 + 0.2j, 512)
    for k in range(-2, 3):
        out = covariance_transform(gamma, TestFunction.exponential(k), 3)
        assert span_residual(out, 2) <= 1e-8


def test_covariance_generic_diffeo_leaves_span():
    flow = exp_vector_field(GENERIC).diffeo
    out = covariance_transform(flow, TestFunction.exponential(1), 3)
    assert span_residual(out, 2) > 1e-4


def test_covariance_action_property():
    g1 = exp_vector_field(GENERIC, steps=1024).diffeo
    g2 = CircleDiffeo.mobius(1.0, 0.25j, 1024)
    f = TestFunction({0: 1, 1: 0.5, -1: 0.5, 2: 0.25j, -2: -0.25j})
    for d in (2, 3):
        lhs = covariance_transform(g1.compose(g2), f, d, as_function=False)
        rhs = covariance_transform(g1, covariance_transform(g2, f, d), d, as_function=False)
        assert np.max(np.abs(lhs - rhs)) <= 1e-6


def test_diffeo_inverse_and_csv():
    g = exp_vector_field(GENERIC, steps=1024).diffeo
    th = uniform_grid(128)
    assert np.max(np.abs(g(g.invert_at(th)) - th)) < 1e-10
    rows = list(csv.reader(io.StringIO(g.lift_csv())))
    assert len(rows) == g.grid + 1


# -- Schwarzian --------------------------------------------------------------------------

def test_schwarzian_vanishes_on_mobius():
    for gamma in (CircleDiffeo.identity(512), CircleDiffeo.rotation(1.3, 512), CircleDiffeo.mobius(2.0, 1 - 0.5j, 512)):
        assert np.max(np.abs(schwarzian(gamma))) <= 1e-6
        assert abs(schwarzian_cocycle(gamma, TestFunction.constant(1), 2)) <= 1e-6


def test_schwarzian_analytic_lift():
    eps = 0.2
    gamma = CircleDiffeo.from_lift(lambda t: t + eps * np.sin(2 * t), 512)
    t = gamma.theta
    d1, d2, d3 = 1 + 2 * eps * np.cos(2 * t), -4 * eps * np.sin(2 * t), -8 * eps * np.cos(2 * t)
    expected = d3 / d1 - 1.5 * (d2 / d1) ** 2 + 0.5 * (d1 ** 2 - 1)
    assert np.max(np.abs(schwarzian(gamma) - expected)) < 1e-9


def test_two_plus_cos_flow_is_mobius():
    """The field 2 + cos lies in the sl(2) span, so its time-one flow has vanishing Schwarzian."""
    flow = exp_vector_field(TestFunction({0: 2, 1: 0.5, -1: 0.5})).diffeo
    r1 = schwarzian_cocycle(flow, TestFunction.constant(1), 2)
    flow2 = exp_vector_field(TestFunction({0: 2, 1: 0.5, -1: 0.5}), steps=2 ** 13).diffeo
    r2 = schwarzian_cocycle(flow2, TestFunction.constant(1), 2)
    assert abs(r1) <= 1e-6 and abs(r1 - r2) <= 1e-4


def test_cocycle_generic_flow_stable_under_refinement():
    vals = [schwarzian_cocycle(exp_vector_field(GENERIC, steps=s).diffeo, TestFunction.constant(1), 2)
            for s in (2 ** 11, 2 ** 12, 2 ** 13)]
    assert abs(vals[0]) > 1e-3
    assert abs(vals[1] - vals[2]) <= 1e-4 and abs(vals[0] - vals[1]) <= 1e-4


# -- smearing -------------------------------------------------------------------------

def test_smear_single_modes(w3_vacuum_c3):
    m = w3_vacuum_c3
    for k in (-2, 0, 1, 3):
        op = smear_truncated(m, "W", TestFunction.exponential(k), 8)
        for (t, s), b in op.blocks.items():
            assert t == s - k
            assert (b == m.mode_matrix(W(k), s)).all()


def test_smear_cosine(w3_vacuum_c3):
    m = w3_vacuum_c3
    op = smear_truncated(m, "L", TestFunction.cosine(2), 8)
    for s in range(2, 7):
        up = op.blocks.get((s + 2, s))
        if up is not None:
            assert (up == Fraction(1, 2) * m.mode_matrix(L(-2), s)).all()
        down = op.blocks.get((s - 2, s))
        if down is not None:
            assert (down == Fraction(1, 2) * m.mode_matrix(L(2), s)).all()


def test_t_of_one_is_l0(w3_vacuum_c3):
    op = smear_truncated(w3_vacuum_c3, "L", TestFunction.constant(1), 8)
    assert all(t == s for t, s in op.blocks)
    dense = op.dense(8)
    assert np.allclose(dense, np.diag(np.diag(dense)))
    ranks = [w3_vacuum_c3.quotient(n).rank for n in range(9)]
    assert np.allclose(np.diag(dense).real, np.repeat(np.arange(9), ranks))


def test_smear_linear(w3_vacuum_c3):
    f, g = TestFunction.cosine(1, 2), TestFunction({0: Fraction(1, 3), 2: Fraction(1, 5), -2: Fraction(1, 5)})
    a = smear_truncated(w3_vacuum_c3, "W", f + g.scale(3), 8)
    b = smear_truncated(w3_vacuum_c3, "W", f, 8) - smear_truncated(w3_vacuum_c3, "W", g, 8).scale(-3)
    assert exact_blocks_equal(a, b)


# -- brackets ------------------------------------------------------------------------

def test_bracket_sign_calibration():
    from chiralbounds.algebra import w3, virasoro
    assert calibrate_bracket_sign(W_FIELD, w3(3)) == -1
    assert calibrate_bracket_sign(STRESS_ENERGY, virasoro(3)) == -1


def test_bracket_examples(w3_vacuum_c3):
    m = w3_vacuum_c3
    rep = commutator_window_check(m, TestFunction.constant(1), TestFunction.constant(1), W_FIELD, 10)
    assert rep.bracket_max == 0 and rep.identity_defect == 0
    rep = commutator_window_check(m, TestFunction.exponential(1), TestFunction.exponential(-1), W_FIELD, 10)
    assert rep.exact and rep.identity_defect == 0
    w0 = smear_truncated(m, "W", TestFunction.constant(1), 10)
    assert rep.bracket_max == pytest.approx(3 * w0.restrict(rep.window).dense(rep.window).__abs__().max(), rel=1e-12)


@pytest.mark.parametrize("fld", [W_FIELD, STRESS_ENERGY])
def test_bracket_identity_generic(w3_vacuum_c3, fld):
    f = TestFunction({1: Fraction(1), -1: Fraction(1), 2: Fraction(1, 3)})
    g = TestFunction({0: Fraction(2), 1: Fraction(1, 2), -1: Fraction(1, 2), -2: Fraction(1, 7)})
    rep = commutator_window_check(w3_vacuum_c3, f, g, fld, 10)
    assert rep.window == 6 and rep.bracket_max > 0 and rep.identity_defect == 0


def test_virasoro_cocycle_term():
    from chiralbounds.circle import virasoro_cocycle
    f = TestFunction({2: Fraction(1, 3)})
    g = TestFunction({-2: Fraction(1, 7)})
    # [L_2, L_{-2}] central part c/12 * 6 = c/2
    assert virasoro_cocycle(f, g, Fraction(3)) == Fraction(3, 2) * Fraction(1, 21)
    assert virasoro_cocycle(TestFunction.exponential(1), TestFunction.exponential(-1), 3) == 0


def test_window_exactness(w3_vacuum_c3):
    f = TestFunction.cosine(1)
    g = TestFunction({0: Fraction(2), 2: Fraction(1, 2), -2: Fraction(1, 2)})
    windows = []
    for cutoff in (8, 10):
        a = smear_truncated(w3_vacuum_c3, "W", f, cutoff)
        b = smear_truncated(w3_vacuum_c3, "L", g, cutoff)
        windows.append(((a @ b) - (b @ a)).restrict(5))
    assert exact_blocks_equal(windows[0], windows[1])


def test_empty_window_rejected(w3_vacuum_c3):
    with pytest.raises(IndexError):
        commutator_window_check(w3_vacuum_c3, TestFunction.cosine(4), TestFunction.cosine(4), W_FIELD, 6)


@pytest.mark.parametrize("g", [
    TestFunction.constant(1),
    TestFunction({0: Fraction(1), 1: Fraction(1, 4), -1: Fraction(1, 4)}),
    TestFunction({0: Fraction(2), 1: Fraction(1, 2), -1: Fraction(1, 2)}),
])
def test_vanishing_bracket_examples(w3_vacuum_c3, g):
    rep = vanishing_bracket_check(w3_vacuum_c3, g, W_FIELD, 10)
    assert rep.exact and rep.bracket_max == 0


@settings(max_examples=6, deadline=None)
@given(a=st.integers(-3, 3), b=st.integers(-3, 3), shift=st.integers(0, 3))
def test_vanishing_bracket_nonnegative(w3_vacuum_c3, a, b, shift):
    # g = |p|^2 with p = shift + a e_1 + b e_{-1} real-coefficient, so g >= 0 and deg g <= 2
    p = TestFunction({0: Fraction(shift), 1: Fraction(a), -1: Fraction(b)})
    conj = TestFunction({-n: x for n, x in p.coeffs.items()})
    g = p * conj
    rep = vanishing_bracket_check(w3_vacuum_c3, g, W_FIELD, 10)
    assert rep.identity_defect <= 1e-9
    assert rep.bracket_max <= 1e-9


def test_vanishing_bracket_float_coefficients(w3_vacuum_c3):
    g = TestFunction({0: 1.7, 1: 0.3 - 0.2j, -1: 0.3 + 0.2j})
    rep = vanishing_bracket_check(w3_vacuum_c3, g, W_FIELD, 10)
    assert not rep.exact and rep.bracket_max <= 1e-9


def test_bracket_field_of_power_vanishes():
    g = TestFunction({0: Fraction(2), 1: Fraction(1, 2), -1: Fraction(1, 2), 2: Fraction(1, 3), -2: Fraction(1, 3)})
    assert all(not x for x in bracket_test_function(g.power(2), g, 3).coeffs.values())
    assert all(not x for x in bracket_test_function(g, g, 2).coeffs.values())


# -- spectra and probes ------------------------------------------------------------------

def test_min_spectrum_examples(w3_vacuum_c3):
    seq = t_min_spectrum_sequence(w3_vacuum_c3, TestFunction.constant(1), [4, 6, 8, 10])
    assert seq.minima == pytest.approx([0, 0, 0, 0], abs=1e-12)
    seq = t_min_spectrum_sequence(w3_vacuum_c3, TestFunction({0: 1, 1: Fraction(1, 2), -1: Fraction(1, 2)}),
                                  [4, 6, 8, 10])
    assert seq.non_increasing
    seq = t_min_spectrum_sequence(w3_vacuum_c3, TestFunction.cosine(1), [4, 6, 8, 10])
    assert seq.decreasing_trend and seq.minima[-1] < -1
    assert seq.r_estimate == -seq.minima[-1]


def test_min_spectrum_matches_direct_eigensolve(w3_vacuum_c3):
    g = TestFunction({0: 1, 1: Fraction(1, 2), -1: Fraction(1, 2)})
    seq = t_min_spectrum_sequence(w3_vacuum_c3, g, [6])
    m = smear_truncated(w3_vacuum_c3, "L", g, 6).dense(6)
    assert np.allclose(m, m.conj().T, atol=1e-12)
    assert seq.minima[0] == pytest.approx(np.linalg.eigvalsh(m).min(), abs=1e-12)


def test_probe_examples(w3_vacuum_c3):
    m = w3_vacuum_c3
    one = TestFunction.constant(1)
    omega = level_vector(m, 0, [1.0], 10)
    rows = local_bound_probe(m, one, 10, samples=[omega], r_estimate=0.0)
    assert rows[0].skipped and rows[0].ratio is None
    idx = [str(b) for b in m.basis(3)].index("W_{-3}Ω")
    coords = np.zeros(m.quotient(3).rank)
    coords[idx] = 1.0
    psi = level_vector(m, 3, coords, 10)
    rows = local_bound_probe(m, one, 10, samples=[psi], r_estimate=0.0)
    w0 = smear_truncated(m, "W", one, 10).dense(10)
    padded = np.zeros(w0.shape[0], dtype=complex)
    padded[:psi.size] = psi
    assert rows[0].denominator == pytest.approx(9.0, rel=1e-12)
    assert rows[0].numerator == pytest.approx(np.linalg.norm(w0 @ padded), rel=1e-12)


def test_probe_random_samples_finite(w3_vacuum_c3):
    g = TestFunction({0: 1, 1: Fraction(1, 2), -1: Fraction(1, 2)})
    rows = local_bound_probe(w3_vacuum_c3, g, 10, samples=50, seed=3)
    assert len(rows) == 50
    assert all(r.skipped or math.isfinite(r.ratio) for r in rows)
