"""Gauss-Legendre panel quadrature in log-substituted variables.

All singular-endpoint integrals in this package are computed after the
substitution s = log(1/t) (or s = log|t| on the negative side), which turns
hundreds of decades of t into a modest range of s.  Panels of fixed
Gauss-Legendre order are laid across the s-interval; the adaptive variant
doubles the panel count until two successive results agree.
"""
from __future__ import annotations

import numpy as np

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


def panel_nodes(a: float, b: float, panels: int):
    """Nodes and weights tiling [a, b] with Gauss-Legendre panels."""
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])          # (panels,)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    weights = half[:, None] * _GL_W[None, :]
    return nodes.ravel(), weights.ravel()


def integrate(f, a: float, b: float, panels: int = 8) -> float:
    """Integral of a vectorized integrand over [a, b] with a fixed panel count."""
    if b <= a:
        return 0.0
    x, w = panel_nodes(a, b, panels)
    return float(np.dot(f(x), w))


def integrate_adaptive(f, a: float, b: float, rtol: float = 1e-8,
                       start_panels: int = 8, max_panels: int = 4096):
    """Panel-doubling quadrature.

    Returns ``(value, converged)``.  ``converged`` is False when the budget cap
    was reached before two successive refinements agreed to ``rtol``.
    """
    if b <= a:
        return 0.0, True
    prev = integrate(f, a, b, start_panels)
    panels = start_panels * 2
    while panels <= max_panels:
        cur = integrate(f, a, b, panels)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur, True
        prev = cur
        panels *= 2
    return prev, False
