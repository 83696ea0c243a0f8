"""Verification suites behind the command line.

Each suite takes a :class:`RunConfig` and returns ``(report, files)`` where
``files`` maps extra file names (CSV tables) to their text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import reports
from .algebra import AlgebraKind, AlgebraSpec, STRESS_ENERGY, W_FIELD, Gen, heisenberg, virasoro, w3
from .bounds import (
    adjoint_norm_gap,
    linear_bound_check,
    recursion_verify,
    t2_bound_check,
    w_optimal_report,
    wick_zero_identity_defect,
)
from .circle import (
    CircleDiffeo,
    TestFunction,
    commutator_window_check,
    covariance_transform,
    exp_vector_field,
    local_bound_probe,
    ng_constant,
    schwarzian_cocycle,
    span_residual,
    t_min_spectrum_sequence,
    vanishing_bracket_check,
)
from .exact import format_rational, symmetric_pivots
from .lowest_weight import GradedModule, expected_dimension, kac_positivity_report
from .oscillator import (
    DeformationParams,
    deformed_bound_check,
    detect_central_charge,
    eigenvalue_csv,
    sugawara_L,
    sugawara_lemma_check,
    sum_Ln_form,
    virasoro_defect,
)

THEOREM_SUITES = ("gram", "kac", "t2bound", "oscillator", "wbounds", "circle")
ALL_SUITES = THEOREM_SUITES + ("probe", "build")
DEFAULT_DEFORMATIONS = "1:0;1:i/2;2:1"


@dataclass
class RunConfig:
    algebra: str = "w3"
    c: Fraction = Fraction(3)
    h: Fraction = Fraction(0)
    w: Fraction = Fraction(0)
    max_level: int = 8
    tol: float = 1e-9
    suites: list[str] = field(default_factory=lambda: list(THEOREM_SUITES))
    out: Path = Path("reports")
    steps: int = 2 ** 12
    grid: int = 2 ** 12
    workers: int = 1
    deformations: str = DEFAULT_DEFORMATIONS
    seed: int = 0

    def algebra_spec(self) -> AlgebraSpec:
        return {"virasoro": virasoro, "w3": w3}.get(self.algebra, lambda c: heisenberg())(self.c)

    def as_json(self) -> dict:
        return {
            "algebra": self.algebra,
            "c": format_rational(self.c),
            "h": format_rational(self.h),
            "w": format_rational(self.w),
            "max_level": self.max_level,
            "tol": self.tol,
            "suites": list(self.suites),
            "steps": self.steps,
            "grid": self.grid,
            "deformations": self.deformations,
            "seed": self.seed,
        }

    def deformation_list(self) -> list[DeformationParams]:
        out = []
        for item in self.deformations.split(";"):
            item = item.strip()
            if not item:
                continue
            kappa, _, eta = item.partition(":")
            out.append(DeformationParams.parse(kappa, eta or "0"))
        return out


Result = tuple[dict, dict[str, str]]


def _envelope(name: str, cfg: RunConfig, checks, reps, data) -> dict:
    return reports.envelope(name, cfg.as_json(), checks, [r.to_json() for r in reps], data)


def _is_vacuum(cfg: RunConfig) -> bool:
    return cfg.h == 0 and cfg.w == 0


def _module(cfg: RunConfig) -> GradedModule:
    alg = cfg.algebra_spec()
    if alg.kind is AlgebraKind.HEISENBERG:
        raise ValueError("algebra: this suite needs virasoro or w3")
    return GradedModule(alg, cfg.h, cfg.w if alg.kind is AlgebraKind.W3 else 0, reduced=_is_vacuum(cfg))


def _known_unitary(cfg: RunConfig) -> bool:
    if cfg.algebra == "virasoro":
        return cfg.c >= 1 and cfg.h >= 0
    if cfg.algebra == "w3":
        return cfg.c >= 2 and _is_vacuum(cfg)
    return False


# --------------------------------------------------------------------------

def suite_build(cfg: RunConfig) -> Result:
    mod = _module(cfg).build(cfg.max_level, quotient=False)
    doc = mod.to_json()
    ranks = {str(n): symmetric_pivots(mod.gram(n)).rank for n in range(cfg.max_level + 1)}
    checks = [reports.check("built", True, True, {"levels": cfg.max_level})]
    return _envelope("build", cfg, checks, [], {"module": doc, "ranks": ranks}), {}


def suite_gram(cfg: RunConfig) -> Result:
    mod = _module(cfg).build(cfg.max_level, quotient=False)
    rows = []
    sym_ok = dim_ok = psd_ok = True
    files = {}
    for n in range(cfg.max_level + 1):
        g = mod.gram(n)
        sym_ok &= all(g[i, j] == g[j, i] for i in range(g.shape[0]) for j in range(i))
        if not mod.reduced:
            dim_ok &= g.shape[0] == expected_dimension(mod.alg, n)
        piv = symmetric_pivots(g)
        psd_ok &= piv.psd
        row = {"level": n, "size": g.shape[0], "rank": piv.rank, "psd": piv.psd}
        if not piv.psd:
            row["witness"] = [format_rational(x) for x in piv.witness]
            row["witness_norm"] = format_rational(piv.witness_value)
        rows.append(row)
        files[f"gram_level_{n}.csv"] = mod.gram_csv(n)
    checks = [
        reports.check("gram_symmetric", sym_ok),
        reports.check("dimension_law", dim_ok),
        reports.check("positive_semidefinite", psd_ok, _known_unitary(cfg)),
    ]
    return _envelope("gram", cfg, checks, [], {"levels": rows, "reduced_vacuum_basis": mod.reduced}), files


def suite_kac(cfg: RunConfig) -> Result:
    levels = kac_positivity_report(cfg.c, cfg.h, cfg.max_level)
    backed = cfg.c > 1 and cfg.h > 0
    all_pos = all(lv.determinant_sign > 0 for lv in levels)
    checks = [reports.check("determinants_positive", all_pos, backed),
              reports.check("no_negative_determinant_in_unitary_region",
                            all(lv.determinant_sign >= 0 for lv in levels), cfg.c >= 1 and cfg.h >= 0)]
    return _envelope("kac", cfg, checks, [], {"levels": [lv.to_json() for lv in levels]}), {}


def suite_t2bound(cfg: RunConfig) -> Result:
    mod = _module(cfg)
    rep = t2_bound_check(mod, cfg.max_level, cfg.tol)
    ident = all(wick_zero_identity_defect(mod, n) for n in range(min(cfg.max_level, 6) + 1))
    backed = cfg.c >= 1 and cfg.h >= 0 and _known_unitary(cfg)
    checks = [
        reports.check("wick_square_identity", ident),
        reports.check("eleven_c_plus_one_bound", rep.passed, backed),
        reports.check("five_c_plus_one_bound", rep.diagnostics["five_c_plus_one_passes"], False),
    ]
    return _envelope("t2bound", cfg, checks, [rep], {}), {"t2bound_margins.csv": rep.margins_csv()}


def suite_oscillator(cfg: RunConfig) -> Result:
    top = min(cfg.max_level, 10)
    lemma = [sugawara_lemma_check(n) for n in range(top + 1)]
    termwise, split, _ = sum_Ln_form(min(cfg.max_level, 6))
    sum_ok = bool((termwise == split).all())
    vir_bad = virasoro_defect(sugawara_L, 1, min(cfg.max_level, 6), 3)
    checks = [
        reports.check("sugawara_lemma", all(r.ok for r in lemma),
                      detail={str(r.level): {"max_eigenvalue": r.max_eigenvalue, "bound": format_rational(r.bound)}
                              for r in lemma}),
        reports.check("sum_formula_identity", sum_ok),
        reports.check("sugawara_virasoro_c1", vir_bad == 0, detail={"failures": vir_bad}),
    ]
    deformed = []
    ev_rows = []
    for p in cfg.deformation_list():
        c = detect_central_charge(p)
        ref = detect_central_charge(DeformationParams(p.kappa, Fraction(0), p.kappa_imag, False,
                                                      p.roles_as_printed))
        levels = [deformed_bound_check(p, n, c) for n in range(min(cfg.max_level, 8) + 1)]
        ok = all(lv.ok(cfg.tol) for lv in levels)
        eta_free = c == ref
        deformed.append({"params": p.label(), "c": format_rational(c) if isinstance(c, Fraction) else str(c),
                         "h": format_rational(p.h), "max_ratio": max(lv.ratio for lv in levels),
                         "bound_ok": ok, "eta_independent": eta_free})
        checks.append(reports.check(f"deformed_bound[{p.label()}]", ok))
        checks.append(reports.check(f"central_charge_eta_independent[{p.label()}]", eta_free))
        ev_rows.extend((lv.level, lv.eigenvalues) for lv in levels)
    return (_envelope("oscillator", cfg, checks, [], {"deformed": deformed}),
            {"oscillator_eigenvalues.csv": eigenvalue_csv(ev_rows)})


def suite_wbounds(cfg: RunConfig) -> Result:
    backed = cfg.c >= 2
    mod = GradedModule.vacuum(w3(cfg.c)).build(cfg.max_level + 3)
    reps = [recursion_verify(mod, W_FIELD, k, 3, cfg.max_level, cfg.tol) for k in (1, 2, 3)]
    reps.append(w_optimal_report(mod, [0, 1, 2, 3], cfg.max_level, cfg.tol))
    reps.append(linear_bound_check(mod, 4, cfg.max_level - 1 if cfg.max_level > 0 else 0, cfg.tol))
    gaps = [adjoint_norm_gap(mod, Gen(f, k), n) for f in ("L", "W") for k in (1, 2, 3)
            for n in range(cfg.max_level)]
    checks = [reports.check(f"{r.inequality}[{r.parameters.get('k', '')}]", r.passed, backed) for r in reps]
    checks.append(reports.check("adjoint_norms", max(gaps, default=0.0) <= 1e-10, backed,
                                {"max_relative_gap": max(gaps, default=0.0)}))
    return _envelope("wbounds", cfg, checks, reps, {}), {}


def _circle_functions():
    one = TestFunction.constant(1)
    return {
        "1": one,
        "1+cos/2": one + TestFunction.cosine(1, Fraction(1, 2)),
        "2+cos": TestFunction.constant(2) + TestFunction.cosine(1),
    }


def suite_circle(cfg: RunConfig) -> Result:
    g = TestFunction.constant(2) + TestFunction.cosine(1)
    checks = []
    ng = ng_constant(g, cfg.grid)
    checks.append(reports.check("ng_constant", abs(ng - 3 ** -0.5) <= 1e-8, detail={"value": ng}))
    flow = exp_vector_field(g, cfg.steps, tol=math.inf)
    checks.append(reports.check("flow_residual", flow.residual <= 1e-6, detail={"residual": flow.residual}))
    checks.append(reports.check("flow_periodicity", flow.periodicity <= 1e-8, detail={"defect": flow.periodicity}))
    mob = CircleDiffeo.mobius(1.3 + 0.2j, 0.4 - 0.3j, cfg.grid)
    wiggle = exp_vector_field(TestFunction.constant(3) + TestFunction.cosine(2) + TestFunction.cosine(3, Fraction(1, 2)),
                              cfg.steps, tol=math.inf).diffeo
    f = TestFunction.constant(1) + TestFunction.cosine(2, Fraction(1, 3))
    lhs = covariance_transform(wiggle.compose(mob), f, 3, as_function=False)
    rhs = covariance_transform(wiggle, covariance_transform(mob, f, 3), 3, as_function=False)
    comp = float(np.max(np.abs(lhs - rhs)))
    checks.append(reports.check("covariance_composition", comp <= 1e-6, detail={"defect": comp}))
    span = max(span_residual(covariance_transform(mob, TestFunction.exponential(k), 3), 2) for k in range(-2, 3))
    checks.append(reports.check("mobius_span_invariance", span <= 1e-8, detail={"residual": span}))
    schw = max(abs(schwarzian_cocycle(d, TestFunction.constant(1) + TestFunction.cosine(1), cfg.c))
               for d in (mob, CircleDiffeo.rotation(0.7, cfg.grid)))
    checks.append(reports.check("schwarzian_mobius_zero", schw <= 1e-6, detail={"max": schw}))
    data = {"schwarzian_cocycle_generic": schwarzian_cocycle(wiggle, TestFunction.constant(1), cfg.c)}
    if cfg.c >= 2:
        cutoff = min(cfg.max_level, 10)
        mod = GradedModule.vacuum(w3(cfg.c)).build(cutoff)
        for name, gg in _circle_functions().items():
            rep = vanishing_bracket_check(mod, gg, W_FIELD, cutoff)
            checks.append(reports.check(f"vanishing_bracket[{name}]", rep.bracket_max <= 1e-9, detail=rep.to_json()))
        rep = commutator_window_check(mod, TestFunction.exponential(1), TestFunction.exponential(-1), W_FIELD, cutoff)
        checks.append(reports.check("smeared_bracket_identity", rep.identity_defect <= 1e-9, detail=rep.to_json()))
    return _envelope("circle", cfg, checks, [], data), {}


def suite_probe(cfg: RunConfig) -> Result:
    cutoff = min(cfg.max_level, 10)
    mod = GradedModule.vacuum(w3(max(cfg.c, Fraction(2)))).build(cutoff)
    cuts = [n for n in (4, 6, 8, 10) if n <= cutoff] or [cutoff]
    one = TestFunction.constant(1)
    seqs = {
        "1+cos": t_min_spectrum_sequence(mod, one + TestFunction.cosine(1), cuts).to_json(),
        "cos": t_min_spectrum_sequence(mod, TestFunction.cosine(1), cuts).to_json(),
    }
    rows = local_bound_probe(mod, TestFunction.constant(2) + TestFunction.cosine(1), cutoff, 50, cfg.seed)
    ratios = [r.ratio for r in rows if not r.skipped]
    data = {"min_spectrum": seqs,
            "local_bound_ratios": {"count": len(ratios), "skipped": sum(r.skipped for r in rows),
                                   "max": max(ratios, default=None), "min": min(ratios, default=None)}}
    checks = [reports.check("exploratory", True, False)]
    return _envelope("probe", cfg, checks, [], data), {}


SUITE_FUNCS = {
    "build": suite_build,
    "gram": suite_gram,
    "kac": suite_kac,
    "t2bound": suite_t2bound,
    "oscillator": suite_oscillator,
    "wbounds": suite_wbounds,
    "circle": suite_circle,
    "probe": suite_probe,
}


def run_named(name: str, cfg: RunConfig) -> Result:
    return SUITE_FUNCS[name](cfg)
