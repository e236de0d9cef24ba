import math

import numpy as np
import pytest

from heatsing.errors import DomainError
from heatsing.kernel import (KernelConstants, PoleConfig, Side, appell_point,
                             appell_transform_value, heat_residual_fd,
                             log_appell_multiplier, log_h, log_h_tilde,
                             log_heat_kernel, point, unit_ball_volume)

RNG = np.random.default_rng(np.random.Philox(key=20240811))


def test_unit_ball_volumes_match_table():
    assert unit_ball_volume(1) == pytest.approx(2.0, rel=1e-14)
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-14)
    kc = KernelConstants.for_dim(2)
    assert kc.log_norm == pytest.approx(-math.log(4.0 * math.pi), rel=1e-14)


def test_log_kernel_unit_value():
    # (4 pi t) = 1 at t = 1/(4 pi), so F = 1 at the origin
    assert log_heat_kernel([0.0], 1.0 / (4.0 * math.pi), 1) == pytest.approx(0.0, abs=1e-14)


def test_log_kernel_even_in_x():
    for _ in range(50):
        x = RNG.normal(size=3)
        t = float(RNG.uniform(0.01, 5.0))
        assert log_heat_kernel(x, t, 3) == log_heat_kernel(-x, t, 3)


def test_log_kernel_rejects_nonpositive_time():
    with pytest.raises(DomainError):
        log_heat_kernel([1.0], 0.0, 1)
    with pytest.raises(DomainError):
        log_heat_kernel([1.0], -1.0, 1)


def test_log_kernel_no_spurious_overflow():
    # exponent magnitudes up to ~1e305 stay finite floats; only a true
    # out-of-float-range limit may saturate
    for t in (1e-300, 1e-10, 1.0, 1e10, 1e300):
        for xmag in (0.0, 1.0, 1e3):
            assert math.isfinite(log_heat_kernel([xmag], t, 1))
    for t in (1e-290, 1e-5, 1.0, 1e300):
        assert math.isfinite(log_heat_kernel([1e6], t, 1))


def test_kernel_mass_quadrature_oracle():
    # tensor Gauss-Legendre oracle: integral of F over R^2 at t = 0.3 is 1
    t = 0.3
    nodes, weights = np.polynomial.legendre.leggauss(80)
    half = 8.0
    x = nodes * half
    w = weights * half
    xx, yy = np.meshgrid(x, x)
    vals = np.exp([[log_heat_kernel([a, b], t, 2) for a in x] for b in x])
    mass = float(np.einsum("i,j,ij->", w, w, vals))
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_log_h_examples():
    cfg = PoleConfig(1, (0.0,), Side.PLUS)
    z = point([2.0], 1.0)
    assert log_h(z, cfg) == pytest.approx(-0.5 * math.log(4.0 * math.pi) - 1.0, rel=1e-14)
    cfg3 = PoleConfig(3, (0.5, -0.25, 1.0), Side.PLUS)
    zc = point([0.5, -0.25, 1.0], 0.7)
    assert log_h(zc, cfg3) == pytest.approx(-1.5 * math.log(4.0 * math.pi * 0.7), rel=1e-14)
    with pytest.raises(DomainError):
        log_h(point([0.0], -1.0), cfg)


def test_log_h_level_set_identity():
    # h = c' exactly on |x - gamma|^2 = -2 N t log(t / c)
    for dim in (1, 2, 3):
        c = 0.8
        cfg = PoleConfig(dim, (0.0,) * dim, Side.PLUS)
        log_c_prime = -0.5 * dim * math.log(4.0 * math.pi * c)
        for t in (0.05, 0.2, 0.5):
            r = math.sqrt(-2.0 * dim * t * math.log(t / c))
            x = np.zeros(dim)
            x[0] = r
            assert log_h(point(x, t), cfg) == pytest.approx(log_c_prime, abs=1e-12)


def test_log_h_tilde_examples():
    cfg0 = PoleConfig(2, (0.0, 0.0), Side.MINUS)
    for _ in range(10):
        z = point(RNG.normal(size=2), float(-RNG.uniform(0.1, 5.0)))
        assert log_h_tilde(z, cfg0) == 0.0
    cfg = PoleConfig(2, (0.5, -1.5), Side.MINUS)
    t = -2.0
    assert log_h_tilde(point([0.0, 0.0], t), cfg) == pytest.approx((0.25 + 2.25) * t)
    g = np.array([0.5, -1.5])
    assert log_h_tilde(point(-2.0 * t * g, t), cfg) == pytest.approx(-(0.25 + 2.25) * t)


def test_appell_point_examples():
    z = appell_point(point([2.0], 1.0), "forward")
    assert z.x_array[0] == pytest.approx(1.0)
    assert z.t == pytest.approx(-0.25)
    # forward maps {t = 1/(4s)} to {t = -s}
    for s in (0.1, 1.0, 7.0):
        assert appell_point(point([0.3], 1.0 / (4.0 * s)), "forward").t == pytest.approx(-s, rel=1e-12)


def test_appell_point_round_trip():
    worst = 0.0
    for _ in range(100):
        x = RNG.uniform(-3.0, 3.0, size=2)
        t = float(RNG.uniform(0.01, 10.0))
        z = point(x, t)
        back = appell_point(appell_point(z, "forward"), "inverse")
        worst = max(worst, float(np.max(np.abs(back.x_array - z.x_array))), abs(back.t - t))
        zm = point(x, -t)
        back2 = appell_point(appell_point(zm, "inverse"), "forward")
        worst = max(worst, float(np.max(np.abs(back2.x_array - zm.x_array))), abs(back2.t + t))
    assert worst < 1e-12


def test_appell_point_rejects_t_zero():
    with pytest.raises(DomainError):
        appell_point(point([1.0], 0.0), "forward")


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_appell_transform_of_h_is_h_tilde(dim):
    gamma = tuple(RNG.uniform(-1.0, 1.0, size=dim).tolist())
    plus = PoleConfig(dim, gamma, Side.PLUS)
    minus = PoleConfig(dim, gamma, Side.MINUS)
    worst = 0.0
    for _ in range(100):
        x = RNG.uniform(-2.0, 2.0, size=dim)
        t = float(RNG.uniform(0.05, 3.0))
        zp = point(x, t)
        zm = appell_point(zp, "forward")
        lhs = log_appell_multiplier(zm, dim, "forward") + log_h(zp, plus)
        rhs = log_h_tilde(zm, minus)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
        # and the inverse direction: (A^{-1} h~) = h
        lhs_inv = log_appell_multiplier(zp, dim, "inverse") + log_h_tilde(zm, minus)
        rhs_inv = log_h(zp, plus)
        worst = max(worst, abs(lhs_inv - rhs_inv) / max(1.0, abs(rhs_inv)))
    assert worst < 1e-10


def test_appell_transform_linearity():
    z = point([0.4, -0.2], -0.6)
    u = 1.37
    a = appell_transform_value(3.0 * u, z, 2, "forward")
    b = appell_transform_value(u, z, 2, "forward")
    assert a == pytest.approx(3.0 * b, rel=1e-14)


def _fd_order(field, z, steps):
    residuals = [abs(heat_residual_fd(field, z, dx, dt)) for dx, dt in steps]
    return math.log2(residuals[0] / residuals[1])


def test_fd_residual_vanishes_on_parabolic_fields():
    def F1(x, t):
        return math.exp(log_heat_kernel(x, t, 1))

    z = point([0.7], 0.9)
    r_coarse = abs(heat_residual_fd(F1, z, 2e-2, 2e-2))
    r_fine = abs(heat_residual_fd(F1, z, 1e-2, 1e-2))
    assert r_fine < 1e-4
    # measured convergence order under halving of both steps
    assert math.log2(r_coarse / r_fine) > 1.8

    gamma = np.array([0.3, -0.4])
    def htilde(x, t):
        return math.exp(float(np.dot(x, gamma)) + float(np.dot(gamma, gamma)) * t)

    zm = point([0.5, 0.1], -0.8)
    r_coarse = abs(heat_residual_fd(htilde, zm, 2e-2, 2e-2))
    r_fine = abs(heat_residual_fd(htilde, zm, 1e-2, 1e-2))
    assert math.log2(r_coarse / r_fine) > 1.8


def test_fd_residual_matches_barrier_closed_form():
    # v = u h with u = 1 - rho^{-1}(t) e^{r^2/(4t)}:
    # Hv = rho'/rho^2 (4 pi t)^{-N/2} + (N/2)(4 pi t)^{-N/2}/(t rho),
    # independent of x.  rho = |log t| here, so rho' = -1/t.
    def v_field(x, t):
        rho = -math.log(t)
        r2 = float(np.dot(x, x))
        u = 1.0 - math.exp(r2 / (4.0 * t)) / rho
        return u * math.exp(log_heat_kernel(x, t, x.size))

    for dim, x in ((1, [0.02]), (2, [0.02, -0.015])):
        z = point(x, 0.01)
        rho = -math.log(z.t)
        rho_prime = -1.0 / z.t
        closed = ((rho_prime / rho ** 2) * (4.0 * math.pi * z.t) ** (-0.5 * dim)
                  + 0.5 * dim / (z.t * rho) * (4.0 * math.pi * z.t) ** (-0.5 * dim))
        fd = heat_residual_fd(v_field, z, 2e-4, 1e-6)
        assert fd == pytest.approx(closed, rel=5e-3)


def test_appell_operator_identity_on_nonparabolic_field():
    # H[Au](z) = (pi^{N/2}/4) (-t)^{-N/2-2} e^{-|x|^2/(4t)} (Hu)(A^{-1} z)
    dim = 1

    def u_field(y, s):
        return math.sin(y[0]) * math.exp(-0.3 * s) + 0.2 * y[0] ** 2 * s

    def au_field(y, s):
        z = point(y, s)
        mapped = appell_point(z, "inverse")
        return math.exp(log_appell_multiplier(z, dim, "forward")) * u_field(
            mapped.x_array, mapped.t)

    z = point([0.4], -0.7)
    mapped = appell_point(z, "inverse")
    lhs = heat_residual_fd(au_field, z, 1e-3, 1e-4)
    inner = heat_residual_fd(u_field, mapped, 1e-3, 1e-4)
    factor = (math.pi ** (0.5 * dim) / 4.0) * (-z.t) ** (-0.5 * dim - 2.0) * math.exp(
        -float(np.dot(z.x_array, z.x_array)) / (4.0 * z.t))
    assert inner != pytest.approx(0.0, abs=1e-6)   # the field really is non-parabolic
    assert lhs == pytest.approx(factor * inner, rel=1e-4)
