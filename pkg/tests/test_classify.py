import dataclasses
import itertools
import math

import numpy as np
import pytest
from scipy.integrate import quad

from heatsing.errors import DomainError, VerdictContradiction
from heatsing.kernel import Side
from heatsing.classify import (ClassifyOptions, VerdictKind, classify,
                               criterion_integrand, criterion_integrand_l_form,
                               dyadic_sums)
from heatsing.profiles import FamilySpec, family_profile, profile_from_text

OPTS = ClassifyOptions()


def test_integrand_substitution_example():
    # rho = |log t|, N = 2, t = e^{-e}: integrand is exactly e^e / e
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 2))
    t = math.exp(-math.e)
    assert criterion_integrand(prof, 2, t) == pytest.approx(math.exp(math.e) / math.e, rel=1e-12)


def test_integrand_nonnegative_and_guarded():
    prof = family_profile(FamilySpec("ilog", 2, 0.5, 1))
    for s in np.linspace(prof.s_min + 0.05, prof.s_min + 60.0, 40):
        assert criterion_integrand(prof, 1, math.exp(-s)) >= 0.0


def test_l_form_matches_rho_form_up_to_4_half_n():
    for dim in (1, 2, 3):
        prof = family_profile(FamilySpec("ilog", 2, 0.0, dim))
        for s in np.linspace(prof.s_min + 0.1, prof.s_min + 50.0, 32):
            t = math.exp(-s)
            lhs = criterion_integrand_l_form(prof, dim, t)
            rhs = 4.0 ** (0.5 * dim) * criterion_integrand(prof, dim, t)
            assert lhs == pytest.approx(rhs, rel=1e-10)


def test_l_form_constant_rho_example():
    # l(t) = 2 t^{1/2} (rho = e): integrand is 2^N e^{-1} / t
    prof = profile_from_text("expr:exp(1)", dim=1)
    for dim in (1, 2, 3):
        t = 3e-3
        assert criterion_integrand_l_form(prof, dim, t) == pytest.approx(
            2.0 ** dim * math.exp(-1.0) / t, rel=1e-12)


def test_shell_change_of_variables_against_t_quadrature():
    # the s-space shell equals the raw t-space integral of the integrand
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 2))
    trace = dyadic_sums(prof, 2, k_max=16)
    delta = math.exp(-trace.s0)
    val, err = quad(lambda t: criterion_integrand(prof, 2, t), delta / 2.0, delta,
                    epsabs=1e-13, epsrel=1e-12)
    assert trace.sums[0] == pytest.approx(val, rel=1e-9)


def test_shell_additivity():
    prof = family_profile(FamilySpec("ilog", 2, 0.25, 1))
    trace = dyadic_sums(prof, 1, k_max=64)
    from heatsing.quadrature import integrate
    total = integrate(
        lambda s: np.exp(0.5 * np.log(np.abs(prof.log_rho(s))) - prof.log_rho(s)),
        trace.s0, trace.s0 + 64 * trace.shell_width, panels=128)
    assert float(np.nansum(trace.sums)) == pytest.approx(total, rel=1e-9)


def test_shell_model_for_log_family():
    # S_k ~ (log s_k)^{N/2} / s_k * log 2 with s_k = log(1/delta) + k log 2
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 1))
    trace = dyadic_sums(prof, 1, k_max=512)
    ln2 = math.log(2.0)
    for k in range(32, 512, 48):
        s_k = trace.s0 + k * ln2
        model = math.sqrt(math.log(s_k)) / s_k * ln2
        assert 0.5 <= trace.sums[k] / model <= 2.0


def test_fast_decay_shells_vanish_geometrically():
    prof = profile_from_text("halfspace:r=10", dim=1)
    trace = dyadic_sums(prof, 1, k_max=32)
    s = trace.sums[np.isfinite(trace.sums)]
    assert s[0] >= 0.0
    assert float(np.nansum(s[5:])) < 1e-20


def test_classifier_ground_truth_grid():
    for k, N in itertools.product((1, 2, 3), (1, 2, 3)):
        prof = family_profile(FamilySpec("ilog", k, 0.0, N))
        assert classify(prof, N, OPTS).kind is VerdictKind.DIVERGES
        for eps in (0.25, 1.0):
            prof_c = family_profile(FamilySpec("ilog", k, eps, N))
            assert classify(prof_c, N, OPTS).kind is VerdictKind.CONVERGES


def test_bracket_family_k4():
    for N in (1, 2, 3):
        assert classify(family_profile(FamilySpec("kp", 4, 0.0, N)), N).kind \
            is VerdictKind.DIVERGES
        assert classify(family_profile(FamilySpec("kp", 4, 0.5, N)), N).kind \
            is VerdictKind.CONVERGES


def test_negative_eps_is_divergent():
    prof = family_profile(FamilySpec("ilog", 1, -0.5, 1))
    assert classify(prof, 1).kind is VerdictKind.DIVERGES


def test_l_form_and_rho_form_verdicts_identical():
    cases = [family_profile(FamilySpec("ilog", 1, 0.0, 2)),
             family_profile(FamilySpec("ilog", 2, 1.0, 2)),
             profile_from_text("expr:abs(log(t))", 2),
             profile_from_text("expr:abs(log(t))^3", 2)]
    for prof in cases:
        a = classify(prof, 2, dataclasses.replace(OPTS, form="rho"))
        b = classify(prof, 2, dataclasses.replace(OPTS, form="l"))
        assert a.kind is b.kind


def test_plus_minus_duality_of_verdicts():
    for k, eps in ((1, 0.0), (1, 1.0), (2, 0.0), (2, 1.0)):
        for N in (1, 2):
            plus = family_profile(FamilySpec("ilog", k, eps, N), Side.PLUS)
            minus = family_profile(FamilySpec("ilog", k, eps, N), Side.MINUS)
            assert classify(plus, N).kind is classify(minus, N).kind


def test_expression_profiles_numeric_rules():
    # clear-cut expression profiles decide numerically, without a symbolic tag
    v = classify(profile_from_text("expr:abs(log(t))", 1), 1)
    assert v.symbolic_divergent is None
    assert v.kind is VerdictKind.DIVERGES
    v2 = classify(profile_from_text("expr:abs(log(t))^3", 1), 1)
    assert v2.kind is VerdictKind.CONVERGES
    v3 = classify(profile_from_text("expr:exp(1/(4*t))", 1), 1)   # l = 1 envelope
    assert v3.kind is VerdictKind.CONVERGES
    v4 = classify(profile_from_text("expr:2", 1), 1)
    assert v4.kind is VerdictKind.DIVERGES


def test_marginal_expression_is_honestly_inconclusive():
    # the depth-2 boundary family without its symbolic tag: numeric rules
    # must not guess
    text = "abs(log(t)) * logk(2,t)^2"
    v = classify(profile_from_text(f"expr:{text}", 2), 2)
    assert v.kind is VerdictKind.INCONCLUSIVE
    assert "near_miss" in v.stats


def test_inconclusive_exposes_near_miss_margins():
    v = classify(profile_from_text("expr:abs(log(t)) * logk(2,t)^2", 2), 2)
    miss = v.stats["near_miss"]
    assert miss["tail_vs_tau_c"] > 0       # too much tail mass to call convergent
    assert miss["b_vs_converge"] > 0       # decay exponent short of the bar


def test_monotone_comparison_shellwise():
    # rho_1 = |log t|^3 >= rho_2 = |log t|^2 near 0: shells are dominated and
    # tail sums ordered the same way
    p1 = family_profile(FamilySpec("ilog", 1, 2.0, 1))
    p2 = family_profile(FamilySpec("ilog", 1, 1.0, 1))
    s0 = max(p1.s_min, p2.s_min) + 0.5
    t1 = dyadic_sums(p1, 1, k_max=128, delta=math.exp(-s0))
    t2 = dyadic_sums(p2, 1, k_max=128, delta=math.exp(-s0))
    assert np.all(t1.sums <= t2.sums + 1e-30)
    assert np.nansum(t1.sums[64:]) <= np.nansum(t2.sums[64:])


def test_determinism():
    prof = family_profile(FamilySpec("ilog", 2, 0.0, 2))
    a = classify(prof, 2)
    b = classify(prof, 2)
    assert a.kind is b.kind
    assert np.array_equal(a.partial_sums, b.partial_sums)
    assert a.stats == b.stats


def test_contradiction_is_a_hard_error():
    # a profile wearing the wrong symbolic tag must be caught, not papered over
    lying = dataclasses.replace(profile_from_text("expr:abs(log(t))", 1),
                                symbolic_divergent=False)
    with pytest.raises(VerdictContradiction):
        classify(lying, 1)


def test_k_max_validation():
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 1))
    with pytest.raises(DomainError):
        dyadic_sums(prof, 1, k_max=8)


def test_expression_window_exhaustion_gives_valid_prefix():
    # expression profiles underflow around s ~ 700: shells past that are
    # invalid and classification runs on the prefix
    prof = profile_from_text("expr:abs(log(t))", 1)
    trace = dyadic_sums(prof, 1, k_max=2048)
    assert 64 < trace.valid < 2048
    assert np.all(np.isfinite(trace.sums[:trace.valid]))
    assert np.all(np.isnan(trace.sums[trace.valid:]))
    v = classify(prof, 1, dataclasses.replace(OPTS, k_max=2048))
    assert v.kind is VerdictKind.DIVERGES


def test_deep_shells_representable_for_builtins():
    # built-in families evaluate shells at depths far past float underflow of t
    prof = family_profile(FamilySpec("ilog", 2, 0.0, 1))
    trace = dyadic_sums(prof, 1, k_max=2048)
    assert trace.valid == 2048
    assert trace.t_left(2000, Side.PLUS) == 0.0   # t underflows, s does not
