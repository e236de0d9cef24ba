import math

import numpy as np
import pytest

from heatsing.errors import DomainError, WindowError
from heatsing.kernel import Side
from heatsing.profiles import (FamilySpec, Profile, envelope_l, family_profile,
                               family_rho, halfspace_profile, iter_log,
                               level_set_profile, profile_from_text,
                               validate_profile)


def test_iter_log_identities():
    assert iter_log(2, math.exp(-math.e)) == pytest.approx(1.0, rel=1e-14)
    assert iter_log(3, math.exp(-math.exp(math.e))) == pytest.approx(1.0, rel=1e-12)
    assert iter_log(1, math.exp(-5.0)) == pytest.approx(5.0, rel=1e-14)


def test_iter_log_decreasing_toward_zero():
    ts = np.exp(-np.linspace(3.0, 40.0, 30))   # decreasing t inside (0, e^{-e})
    vals = [iter_log(2, float(t)) for t in ts]
    assert all(b > a for a, b in zip(vals, vals[1:]))  # increasing as t decreases


def test_iter_log_window_error_carries_level():
    with pytest.raises(WindowError) as err:
        iter_log(3, math.exp(-1.0))   # |log t| = 1, log -> 0, next level dies
    assert err.value.level == 2


def test_family_rho_k2_exponent():
    spec = FamilySpec("ilog", 2, 0.0, 2)    # N = 2 -> exponent N/2 + 1 = 2
    t = 1e-4
    expected = abs(math.log(t)) * iter_log(2, t) ** 2
    assert family_rho(spec, t) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_family_profile_agrees_with_product_form(k, eps):
    # two independent evaluation paths: s-space sum of logs vs t-space product
    spec = FamilySpec("ilog", k, eps, 2)
    prof = family_profile(spec)
    s = np.linspace(prof.s_min + 0.1, prof.s_min + 40.0, 32)
    for si in s:
        t = math.exp(-si)
        direct = family_rho(spec, t)
        via_profile = math.exp(float(prof.log_rho(np.asarray(si))))
        assert via_profile == pytest.approx(direct, rel=1e-12)


def test_family_windows_are_sane():
    assert family_profile(FamilySpec("ilog", 3, 0.0, 1)).s_min > math.e
    assert family_profile(FamilySpec("kp", 4, 0.0, 1)).s_min > math.exp(math.e)
    assert family_profile(FamilySpec("ilog", 1, 0.0, 1)).s_min > 1.0


def test_minus_side_family_substitutes_abs_t():
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 1), side=Side.MINUS)
    t = -math.exp(8.0)
    assert prof.rho(t) == pytest.approx(8.0, rel=1e-14)
    assert prof.delta < 0


def test_envelope_definition_and_examples():
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 1))
    for t in (1e-3, 1e-6, 1e-9):
        l = envelope_l(prof, t)
        assert l > 0
        assert l * l / (4.0 * t) == pytest.approx(prof.log_rho_at_t(t), rel=1e-13)

    # rho = e^{1/(4t)} gives l = 1 identically
    prof_e = profile_from_text("expr:exp(1/(4*t))", dim=1)
    for t in (0.01, 0.003):
        assert envelope_l(prof_e, t) == pytest.approx(1.0, rel=1e-12)

    # minus side: rho = |log|t||, t = -e^e gives l = 2 e^{e/2}
    prof_m = family_profile(FamilySpec("ilog", 1, 0.0, 1), side=Side.MINUS)
    t = -math.exp(math.e)
    assert envelope_l(prof_m, t) == pytest.approx(2.0 * math.sqrt(math.exp(math.e)), rel=1e-12)


def test_envelope_rejects_rho_below_one():
    # a profile that is valid at its window edge but dips below rho = 1 deeper in
    dipping = Profile(side=Side.PLUS, label="dip", s_min=1.0,
                      log_rho=lambda s: 10.0 - np.asarray(s, dtype=float))
    assert envelope_l(dipping, math.exp(-2.0)) > 0
    with pytest.raises(DomainError):
        envelope_l(dipping, math.exp(-20.0))
    # and a never-admissible constant fails at construction time
    with pytest.raises(DomainError):
        profile_from_text("expr:0.5", dim=1)


def test_derivative_closed_forms_match_fd():
    for spec in (FamilySpec("ilog", 2, 0.5, 3), FamilySpec("kp", 4, 0.25, 2)):
        prof = family_profile(spec)
        s = np.linspace(prof.s_min + 0.5, prof.s_min + 30.0, 16)
        closed = prof.dlog_rho(s)
        step = 1e-6 * np.maximum(1.0, s)
        fd = (prof.log_rho(s + step) - prof.log_rho(s - step)) / (2.0 * step)
        assert np.allclose(closed, fd, rtol=1e-6)


def test_t_rho_prime_over_rho_sign():
    prof = family_profile(FamilySpec("ilog", 1, 0.0, 1))
    t = 1e-4
    # rho = |log t| yields t rho'/rho = -1/|log t|
    assert prof.t_rho_prime_over_rho(t) == pytest.approx(-1.0 / abs(math.log(t)), rel=1e-9)


def test_validate_profile_builtin_families_pass():
    for k, eps in ((1, 0.0), (2, 0.0), (2, 1.0), (3, 0.0)):
        prof = family_profile(FamilySpec("ilog", k, eps, 2))
        report = validate_profile(prof)
        named = {f.name: f for f in report.findings}
        assert named["rho-increases-unboundedly"].passed
        assert named["t-log-rho-to-zero"].passed


def test_validate_profile_minus_side():
    prof = family_profile(FamilySpec("ilog", 2, 0.0, 1), side=Side.MINUS)
    report = validate_profile(prof)
    named = {f.name: f for f in report.findings}
    assert named["rho-increases-unboundedly"].passed
    assert named["log-rho-over-t-to-zero"].passed


def test_validate_profile_rejects_bad_profiles():
    # t log rho = 1 identically for rho = e^{1/t}
    report = validate_profile(profile_from_text("expr:exp(1/t)", dim=1))
    named = {f.name: f for f in report.findings}
    assert not named["t-log-rho-to-zero"].passed
    # constant rho never increases to infinity
    report2 = validate_profile(profile_from_text("expr:2", dim=1))
    named2 = {f.name: f for f in report2.findings}
    assert not named2["rho-increases-unboundedly"].passed


def test_level_set_profile_constants():
    prof = level_set_profile(1.0, 2)
    assert prof.meta["log_c_prime"] == pytest.approx(-math.log(4.0 * math.pi), rel=1e-14)
    # l(c/e)^2 = 2 N c / e
    c, dim = 1.0, 2
    t = c / math.e
    assert envelope_l(prof, t) ** 2 == pytest.approx(2.0 * dim * c / math.e, rel=1e-12)
    with pytest.raises((DomainError, WindowError)):
        envelope_l(prof, 1.5)    # t >= c: domain empty


def test_halfspace_profile_constant_envelope():
    prof = halfspace_profile(1e3)
    for t in (1e-1, 1e-4, 1e-8):
        assert envelope_l(prof, t) == pytest.approx(1e3, rel=1e-12)


def test_profile_from_text_designators():
    assert profile_from_text("ilog:k=2,eps=0.5", 2).meta["family"].k == 2
    assert profile_from_text("kp:k=4,eps=0", 1).meta["family"].kind == "kp"
    assert "c" in profile_from_text("level-set:c=0.5", 1).meta
    assert profile_from_text("halfspace:r=100", 1).meta["radius"] == 100
    assert profile_from_text("expr:abs(log(t))", 1).symbolic_divergent is None
    with pytest.raises(DomainError):
        profile_from_text("nope:k=1", 1)


def test_window_error_outside_profile_window():
    prof = family_profile(FamilySpec("ilog", 3, 0.0, 1))
    with pytest.raises(WindowError):
        prof.rho(0.9 * prof.delta + 0.1)   # above delta
