"""Heat kernel, the two poles h and h-tilde, and the Appell transform machinery.

Everything that can span hundreds of orders of magnitude is evaluated and
returned as a logarithm; exponentiation happens only at the caller's request.
The pole (gamma, 0) and the ideal point at infinity are never represented by
numeric coordinates: operations reject t = 0 instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError


class Side(Enum):
    """Which half of time the problem lives on."""

    PLUS = "plus"    # t > 0, pole at (gamma, 0)
    MINUS = "minus"  # t < 0, pole at infinity


@dataclass(frozen=True)
class PoleConfig:
    """Dimension, pole location and time side of a singularity problem."""

    dim: int
    gamma: tuple[float, ...]
    side: Side = Side.PLUS

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dim}")
        if len(self.gamma) != self.dim:
            raise DomainError(
                f"gamma has {len(self.gamma)} components, expected {self.dim}")
        if not all(math.isfinite(g) for g in self.gamma):
            raise DomainError("gamma must be finite componentwise")

    @property
    def gamma_array(self) -> np.ndarray:
        return np.asarray(self.gamma, dtype=float)


@dataclass(frozen=True)
class SpaceTimePoint:
    """A point z = (x, t) in space-time."""

    x: tuple[float, ...]
    t: float

    @property
    def x_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


def point(x, t) -> SpaceTimePoint:
    """Convenience constructor accepting scalars, sequences or arrays."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return SpaceTimePoint(tuple(x.tolist()), float(t))


@dataclass(frozen=True)
class KernelConstants:
    """Dimension-dependent constants of the fundamental solution."""

    dim: int
    omega_n: float   # volume of the unit ball in R^N
    log_norm: float  # -(N/2) log(4 pi)

    @classmethod
    def for_dim(cls, dim: int) -> "KernelConstants":
        return cls(dim=dim,
                   omega_n=unit_ball_volume(dim),
                   log_norm=-0.5 * dim * math.log(4.0 * math.pi))


def unit_ball_volume(dim: int) -> float:
    """omega_N = pi^{N/2} / Gamma(N/2 + 1)."""
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    return math.pi ** (0.5 * dim) / math.gamma(0.5 * dim + 1.0)


def log_heat_kernel(x, t: float, dim: int) -> float:
    """log F(x, t) = -(N/2) log(4 pi t) - |x|^2 / (4 t) for t > 0.

    Safe for |x|^2 / t up to well beyond 1e6: the result is just a very
    negative float, never an overflow.
    """
    if t <= 0.0:
        raise DomainError(f"heat kernel requires t > 0, got t={t}")
    x = np.asarray(x, dtype=float)
    r2 = float(np.dot(x.ravel(), x.ravel()))
    return -0.5 * dim * math.log(4.0 * math.pi * t) - r2 / (4.0 * t)


def log_h(z: SpaceTimePoint, cfg: PoleConfig) -> float:
    """log h(x, t) with h = F(x - gamma, t), the pole sitting at (gamma, 0)."""
    if cfg.side is not Side.PLUS:
        raise DomainError("log_h is defined on the t > 0 side only")
    if z.t <= 0.0:
        raise DomainError(f"log_h requires t > 0, got t={z.t}")
    return log_heat_kernel(z.x_array - cfg.gamma_array, z.t, cfg.dim)


def log_h_tilde(z: SpaceTimePoint, cfg: PoleConfig) -> float:
    """log of h~(x, t) = exp(<x, gamma> + |gamma|^2 t), the pole at infinity."""
    if cfg.side is not Side.MINUS:
        raise DomainError("log_h_tilde is defined on the t < 0 side only")
    g = cfg.gamma_array
    return float(np.dot(z.x_array, g) + np.dot(g, g) * z.t)


def appell_point(z: SpaceTimePoint, direction: str) -> SpaceTimePoint:
    """The point homeomorphism between the two half-spaces of time.

    forward:  t > 0 -> (x/(2t), -1/(4t)) with t < 0 on the image side;
    inverse:  t < 0 -> (-x/(2t), -1/(4t)) back onto t > 0.
    """
    t = z.t
    if direction == "forward":
        if t <= 0.0:
            raise DomainError(f"forward map requires t > 0, got t={t}")
        xs = z.x_array / (2.0 * t)
    elif direction == "inverse":
        if t >= 0.0:
            raise DomainError(f"inverse map requires t < 0, got t={t}")
        xs = -z.x_array / (2.0 * t)
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return SpaceTimePoint(tuple(xs.tolist()), -1.0 / (4.0 * t))


def log_appell_multiplier(z: SpaceTimePoint, dim: int, direction: str) -> float:
    """log of the prefactor of the function transform.

    forward  (acts on functions of the t > 0 side, evaluated at z with t < 0):
        (-pi/t)^{N/2} exp(-|x|^2/(4t))
    inverse  (acts on functions of the t < 0 side, evaluated at z with t > 0):
        F(z)
    """
    t = z.t
    x = z.x_array
    r2 = float(np.dot(x, x))
    if direction == "forward":
        if t >= 0.0:
            raise DomainError(f"forward transform evaluates at t < 0, got t={t}")
        return 0.5 * dim * math.log(-math.pi / t) - r2 / (4.0 * t)
    if direction == "inverse":
        if t <= 0.0:
            raise DomainError(f"inverse transform evaluates at t > 0, got t={t}")
        return log_heat_kernel(x, t, dim)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def appell_transform_value(u_value_at_mapped_point: float, z: SpaceTimePoint,
                           dim: int, direction: str) -> float:
    """Value of the transformed function at z, given u at the mapped point."""
    return math.exp(log_appell_multiplier(z, dim, direction)) * u_value_at_mapped_point


def heat_residual_fd(field, z: SpaceTimePoint, dx: float, dt: float) -> float:
    """Second-order finite-difference estimate of (d/dt - Laplacian) field at z.

    ``field(x_array, t)`` must be smooth across the stencil.  Centered first
    difference in time, centered second differences in each space direction.
    """
    x = z.x_array
    t = z.t
    n = x.size
    ut = (field(x, t + dt) - field(x, t - dt)) / (2.0 * dt)
    lap = 0.0
    f0 = field(x, t)
    for i in range(n):
        e = np.zeros(n)
        e[i] = dx
        lap += (field(x + e, t) - 2.0 * f0 + field(x - e, t)) / dx ** 2
    return ut - lap
