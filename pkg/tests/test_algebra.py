import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import chiralbounds.algebra as alg_mod
from chiralbounds.algebra import (
    DomainError,
    Gen,
    J,
    L,
    ModePolynomial,
    RewriteBudgetExceeded,
    W,
    Z,
    adjoint_word,
    commutator,
    expand_wick_square,
    heisenberg,
    lambda_linear_coefficient,
    lambda_modes,
    lowest_weight_expectation,
    normal_order,
    virasoro,
    w3,
    wick_square_L,
)
from chiralbounds.lowest_weight import GradedModule
from chiralbounds.exact import qmatmul, is_zero_matrix

C3 = w3(3)


def lam0(b_sq_times):
    return ModePolynomial.gen(Gen("LL", 0), b_sq_times) + ModePolynomial.gen(L(0), -b_sq_times * Fraction(9, 5))


# -- AlgebraSpec -------------------------------------------------------------

def test_b_sq_identity():
    for c in (Fraction(1, 2), 2, 3, 7, Fraction(-4, 3)):
        a = w3(c)
        assert a.b_sq * (22 + 5 * a.c) == 16


def test_w3_rejects_singular_c():
    with pytest.raises(DomainError):
        w3(Fraction(-22, 5))


def test_family_validity():
    with pytest.raises(DomainError):
        commutator(W(1), L(2), virasoro(1))
    with pytest.raises(DomainError):
        commutator(J(1), J(-1), C3)
    with pytest.raises(DomainError):
        normal_order(ModePolynomial.gen(W(1)), heisenberg())


# -- commutator examples -----------------------------------------------------

def test_virasoro_bracket_example():
    a = virasoro(Fraction(5, 7))
    got = commutator(L(2), L(-2), a)
    assert got == ModePolynomial.gen(L(0), 4) + ModePolynomial.scalar(Fraction(5, 14))


def test_l_w_bracket_example():
    assert commutator(L(-1), W(1), C3) == ModePolynomial.gen(W(0), -3)


def test_heisenberg_bracket_example():
    assert commutator(J(2), J(-2), heisenberg()) == ModePolynomial.gen(Z, 2)


def test_w_w_bracket_at_three():
    # central c/360 * 5 * 8 * 3 = c/3; Lambda coefficient 6 b^2; linear 6 * (18+9+18-8)/30 = 37/5
    b2 = C3.b_sq
    expected = ModePolynomial.scalar(1) + lam0(6 * b2) + ModePolynomial.gen(L(0), Fraction(37, 5))
    assert commutator(W(3), W(-3), C3) == expected


def test_w_w_central_term_matches_norm():
    for c in (2, 3, 7):
        m = GradedModule.vacuum(w3(c)).build(3)
        assert m.vacuum_expectation(m.basis(3)[-1], m.basis(3)[-1]) == Fraction(c, 3)


def test_lambda_coefficients():
    assert lambda_modes(0) == wick_square_L(0) - ModePolynomial.gen(L(0), Fraction(9, 5))
    assert lambda_linear_coefficient(2) == -6
    assert lambda_linear_coefficient(-1) == Fraction(-3, 5)


def test_wick_square_on_lowest_weight_vector():
    h = Fraction(2, 3)
    m = GradedModule(virasoro(5), h).build(0)
    v = m.action.apply_gen(Gen("LL", 0), {(): Fraction(1)})
    assert v == {(): 2 * h + h * h}


def test_expand_wick_square_terms():
    p = expand_wick_square(0, 2)
    # k = 2 and k = -2 both produce L_{-2} L_2
    assert dict(p) == {(L(1), L(-1)): 1, (L(0), L(0)): 1, (L(-1), L(1)): 1, (L(-2), L(2)): 2}


# -- normal ordering examples -------------------------------------------------

def test_normal_order_examples():
    assert normal_order(ModePolynomial.word(L(1), L(-1)), virasoro(1)) == (
        ModePolynomial.word(L(-1), L(1)) + ModePolynomial.gen(L(0), 2))
    assert normal_order(ModePolynomial.word(J(1), J(-1)), heisenberg()) == (
        ModePolynomial.word(J(-1), J(1)) + ModePolynomial.gen(Z))


def test_normal_order_w1_wminus1():
    # linear part (1/30)(2)(2+1+2-8) = -1/5; Lambda_0 enters with 2 b^2
    b2 = C3.b_sq
    expected = ModePolynomial.word(W(-1), W(1)) + lam0(2 * b2) + ModePolynomial.gen(L(0), Fraction(-1, 5))
    assert normal_order(ModePolynomial.word(W(1), W(-1)), C3) == expected


def test_marker_needs_cutoff_when_moved():
    p = ModePolynomial.word(L(1), Gen("LL", 0))
    with pytest.raises(DomainError):
        normal_order(p, C3)
    assert normal_order(p, C3, cutoff=3)


def test_budget_guard():
    word = ModePolynomial.word(*[W(k) for k in (4, 3, 2, 1)], *[W(-k) for k in (1, 2, 3, 4)])
    with pytest.raises(RewriteBudgetExceeded):
        normal_order(word, C3, cutoff=10, budget=5)


def test_adjoint_word():
    assert adjoint_word((L(-2), W(1), Z)) == (Z, W(-1), L(2))


def test_symbolic_expectations():
    c, h = Fraction(5), Fraction(1, 3)
    a = virasoro(c)
    p = normal_order(ModePolynomial.word(L(2), L(-2)), a)
    assert lowest_weight_expectation(p, h=h, c=c) == 4 * h + c / 2
    p = normal_order(ModePolynomial.word(L(1), L(-1)), a)
    assert lowest_weight_expectation(p, h=h) == 2 * h


# -- properties ----------------------------------------------------------------

GEN_PAIRS = [(a, b) for a in range(-6, 7) for b in range(-6, 7)]


@pytest.mark.parametrize("algebra,families", [(virasoro(Fraction(7, 2)), "L"), (C3, "LW"), (heisenberg(), "J")])
def test_antisymmetry(algebra, families):
    for f1, f2 in itertools.product(families, repeat=2):
        for a, b in GEN_PAIRS:
            s = commutator(Gen(f1, a), Gen(f2, b), algebra) + commutator(Gen(f2, b), Gen(f1, a), algebra)
            assert not normal_order(s, algebra, cutoff=12), (f1, a, f2, b)


def _word_strategy(families, max_len, span):
    gen = st.builds(Gen, st.sampled_from(list(families)), st.integers(-span, span))
    return st.lists(gen, min_size=1, max_size=max_len)


@settings(max_examples=100, deadline=None)
@given(word=_word_strategy("L", 5, 5), seed=st.integers(0, 10 ** 6))
def test_confluence_virasoro(word, seed):
    a = virasoro(Fraction(3, 2))
    p = ModePolynomial.word(*word)
    left = normal_order(p, a, strategy="leftmost")
    assert left == normal_order(p, a, strategy="rightmost")
    assert left == normal_order(p, a, strategy="random", seed=seed)


@settings(max_examples=100, deadline=None)
@given(word=_word_strategy("J", 6, 6), seed=st.integers(0, 10 ** 6))
def test_confluence_heisenberg(word, seed):
    p = ModePolynomial.word(*word)
    a = heisenberg()
    assert normal_order(p, a, strategy="leftmost") == normal_order(p, a, strategy="random", seed=seed)


@settings(max_examples=100, deadline=None)
@given(lw=_word_strategy("L", 3, 4), wi=st.integers(-4, 4), pos=st.integers(0, 3), seed=st.integers(0, 10 ** 6))
def test_confluence_w3_single_w(lw, wi, pos, seed):
    # at most one W factor keeps every rewrite free of :L^2: markers
    word = list(lw)
    word.insert(min(pos, len(word)), W(wi))
    p = ModePolynomial.word(*word)
    assert normal_order(p, C3, strategy="leftmost") == normal_order(p, C3, strategy="random", seed=seed)


@settings(max_examples=60, deadline=None)
@given(word=_word_strategy("LW", 4, 4))
def test_idempotence(word):
    p = normal_order(ModePolynomial.word(*word), C3, cutoff=12)
    assert normal_order(p, C3, cutoff=12) == p


@settings(max_examples=60, deadline=None)
@given(word=_word_strategy("LW", 3, 3))
def test_normal_order_is_linear_equal_in_module(word):
    """Both sides act identically on every vector of the c=3 W3 Verma span at levels <= 3."""
    m = GradedModule(C3, Fraction(1, 2), Fraction(1, 3)).build(3, quotient=False)
    p = ModePolynomial.word(*word)
    q = normal_order(p, C3, cutoff=12)
    for n in range(4):
        for mono in m.level(n).basis:
            assert m.action.apply_poly_mono(p, mono) == m.action.apply_poly_mono(q, mono)


# -- Jacobi consistency through the module ------------------------------------

def _jacobi_failures(module, indices, top):
    a_ = module.alg
    act = module.action
    bad = 0
    for a, b, c in itertools.product(indices, repeat=3):
        ww = commutator(W(b), W(c), a_)
        r1 = commutator(W(a + b), W(c), a_)
        r2 = commutator(W(b), W(a + c), a_)
        for n in range(top + 1):
            for mono in module.level(n).basis:
                v = {mono: Fraction(1)}
                tot: dict = {}
                for d, s in ((act.apply_gen(L(a), act.apply_poly(ww, v)), 1),
                             (act.apply_poly(ww, act.apply_gen(L(a), v)), -1),
                             (act.apply_poly(r1, v), -(2 * a - b)),
                             (act.apply_poly(r2, v), -(2 * a - c))):
                    for k, x in d.items():
                        tot[k] = tot.get(k, 0) + s * x
                bad += any(tot.values())
    return bad


def test_jacobi_on_generic_verma_span():
    m = GradedModule(C3, Fraction(1, 2), Fraction(1, 3)).build(4, quotient=False)
    assert _jacobi_failures(m, range(-2, 3), 4) == 0


def test_jacobi_matrices_on_vacuum_quotient(w3_vacuum_c3):
    """[L_a,[W_b,W_c]] - [[L_a,W_b],W_c] - [W_b,[L_a,W_c]] = 0 as quotient matrices, levels <= 8."""
    m = w3_vacuum_c3
    a_ = m.alg
    for a, b, c in itertools.product(range(-4, 5), repeat=3):
        ww = commutator(W(b), W(c), a_)
        rhs_poly = commutator(W(a + b), W(c), a_).scale(2 * a - b) + commutator(W(b), W(a + c), a_).scale(2 * a - c)
        for n in range(9):
            mid_ww = n - (b + c)
            tgt = n - (a + b + c)
            mid_l = n - a
            if not (0 <= mid_ww <= 8 and 0 <= tgt <= 8 and 0 <= mid_l <= 8):
                continue
            if not ww:
                assert not rhs_poly or is_zero_matrix(m.mode_matrix(rhs_poly, n))
                continue
            lhs = qmatmul(m.mode_matrix(L(a), mid_ww), m.mode_matrix(ww, n)) - qmatmul(
                m.mode_matrix(ww, mid_l), m.mode_matrix(L(a), n))
            if rhs_poly:
                lhs = lhs - m.mode_matrix(rhs_poly, n)
            assert is_zero_matrix(lhs), (a, b, c, n)


def test_linear_coefficient_is_forced_by_jacobi(monkeypatch):
    """The reading 1/20 of the linear W-W coefficient breaks Jacobi and positivity; 1/30 does not."""
    monkeypatch.setattr(alg_mod, "W_LINEAR_COEFF", Fraction(1, 20))
    m = GradedModule(C3, Fraction(1, 2), Fraction(1, 3)).build(3, quotient=False)
    assert _jacobi_failures(m, range(-1, 2), 3) > 0
    from chiralbounds.exact import symmetric_pivots
    vac = GradedModule.vacuum(C3).build(5, quotient=False)
    assert not symmetric_pivots(vac.gram(5)).psd
