"""Boundary-envelope profiles rho(t) and the iterated-logarithm families.

A profile is stored as a function of s rather than t, where

    s = log(1/t)   on the t > 0 side,
    s = log|t|     on the t < 0 side,

so that the singular end (t -> 0+ or t -> -infinity) is s -> +infinity in both
cases.  ``log_rho(s)`` is the fundamental evaluator: it stays representable
for shells hundreds of octaves deep where t itself would underflow.

The built-in families:

  * ``ilog`` family, depth k with parameter eps:
        k=1:   |log t|^{1+eps}
        k=2:   |log t| * (log_2 t)^{N/2+1+eps}
        k>=3:  |log t| * (log_2 t)^{N/2+1} * log_3 t ... (log_k t)^{1+eps}
    eps = 0 reproduces the divergent list, eps > 0 the convergent one.
  * ``kp`` bracket family, depth k >= 4:
        log rho = log_2 t + (N/2+1) log_3 t + log_4 t + ... + (log_k t)^{1+eps}
  * ``level-set`` domain bounded by a level set of h (closed-form oracle),
  * ``halfspace`` surrogate with a constant envelope radius.

On the minus side t is replaced by |t| throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, WindowError
from .kernel import Side

# s-window safety margin on top of the positivity boundary
_WINDOW_MARGIN = 1.1


def _nested_logs(s, depth: int):
    """[m_1, ..., m_depth] with m_1 = log s, m_{j+1} = log m_j, vectorized.

    Raises WindowError (with the failing level) if any intermediate is
    nonpositive somewhere.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise WindowError("iterated log needs |log t| > 0", level=1)
    out = []
    cur = s
    for j in range(1, depth + 1):
        if np.any(cur <= 0.0):
            raise WindowError(
                f"iterated log level {j} undefined: level-{j - 1} value <= 0",
                level=j)
        cur = np.log(cur)
        out.append(cur)
    return out


def iter_log(k: int, t) -> float:
    """k-th iterated logarithm of the |log t| chain.

    Level 1 is |log t| itself; level 2 is log|log t|; each further level takes
    one more log.  ``t`` may also be |t| of a negative time.
    """
    if k < 1:
        raise DomainError(f"iterated log level must be >= 1, got {k}")
    t = float(t)
    if t <= 0.0:
        raise DomainError(f"iterated log needs t > 0, got {t}")
    s = abs(math.log(t))
    if k == 1:
        return s
    return float(_nested_logs(s, k - 1)[-1])


@dataclass(frozen=True)
class FamilySpec:
    """Parameters of a built-in iterated-logarithm family."""

    kind: str          # "ilog" or "kp"
    k: int
    eps: float
    dim: int

    def __post_init__(self):
        if self.kind not in ("ilog", "kp"):
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.kind == "ilog" and self.k < 1:
            raise DomainError(f"ilog family depth must be >= 1, got {self.k}")
        if self.kind == "kp" and self.k < 4:
            raise DomainError(f"kp bracket family needs k >= 4, got {self.k}")
        if self.dim < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dim}")

    @property
    def divergent(self) -> bool:
        """Exact series verdict: the criterion integral diverges iff eps <= 0."""
        return self.eps <= 0.0

    def exponents(self) -> list[float]:
        """Exponents [a_1..a_k] of the ilog product form."""
        if self.kind != "ilog":
            raise DomainError("exponents() applies to the ilog family only")
        n2 = 0.5 * self.dim
        if self.k == 1:
            return [1.0 + self.eps]
        if self.k == 2:
            return [1.0, n2 + 1.0 + self.eps]
        return [1.0, n2 + 1.0] + [1.0] * (self.k - 3) + [1.0 + self.eps]


def family_rho(spec: FamilySpec, t) -> float:
    """Direct product-form evaluation of the family at time t (or |t|).

    This is deliberately an independent code path from the s-space evaluator
    used by Profile: tests compare the two.
    """
    t = abs(float(t))
    if spec.kind == "ilog":
        val = 1.0
        for j, a in enumerate(spec.exponents(), start=1):
            val *= iter_log(j, t) ** a
        return val
    # kp bracket family: rho = exp(bracket)
    n2 = 0.5 * spec.dim
    bracket = iter_log(2, t) + (n2 + 1.0) * iter_log(3, t)
    for j in range(4, spec.k):
        bracket += iter_log(j, t)
    bracket += iter_log(spec.k, t) ** (1.0 + spec.eps)
    return math.exp(bracket)


@dataclass(frozen=True)
class Profile:
    """A boundary envelope rho(t), stored in the s = log(1/|t|^{+-1}) variable."""

    side: Side
    label: str
    s_min: float
    log_rho: Callable               # g(s), vectorized over numpy arrays
    dlog_rho: Optional[Callable] = None   # g'(s); None -> central FD
    symbolic_divergent: Optional[bool] = None
    meta: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        """Validity endpoint of the time window."""
        if self.side is Side.PLUS:
            return math.exp(-self.s_min)
        return -math.exp(self.s_min)

    def s_of_t(self, t: float) -> float:
        if self.side is Side.PLUS:
            if t <= 0.0:
                raise DomainError(f"plus-side profile needs t > 0, got {t}")
            s = -math.log(t)
        else:
            if t >= 0.0:
                raise DomainError(f"minus-side profile needs t < 0, got {t}")
            s = math.log(-t)
        if s < self.s_min:
            raise WindowError(
                f"t={t} outside profile window (s={s:.4g} < s_min={self.s_min:.4g})")
        return s

    def log_rho_at_t(self, t: float) -> float:
        return float(self.log_rho(self.s_of_t(t)))

    def rho(self, t: float) -> float:
        return math.exp(self.log_rho_at_t(t))

    def dlog_rho_s(self, s):
        """g'(s), closed form when available, otherwise central differences."""
        if self.dlog_rho is not None:
            return self.dlog_rho(s)
        s = np.asarray(s, dtype=float)
        step = 1e-5 * np.maximum(1.0, np.abs(s))
        return (self.log_rho(s + step) - self.log_rho(s - step)) / (2.0 * step)

    def t_rho_prime_over_rho(self, t: float) -> float:
        """t rho'(t) / rho(t); equals -g'(s) on the plus side, +g'(s) on minus."""
        s = self.s_of_t(t)
        g1 = float(self.dlog_rho_s(s))
        return -g1 if self.side is Side.PLUS else g1


def envelope_l(profile: Profile, t: float) -> float:
    """Envelope radius l(t) = 2 (|t| log rho(t))^{1/2}.

    The domain is |x - gamma|^2 < 4 t log rho(t) on the plus side and
    |x + 2 t gamma|^2 < -4 t log rho(t) on the minus side; both reduce to this
    radius.
    """
    g = profile.log_rho_at_t(t)
    if g <= 0.0:
        raise DomainError(
            f"envelope undefined at t={t}: rho(t) <= 1 (log rho = {g:.4g})")
    return 2.0 * math.sqrt(abs(t) * g)


def _positivity_boundary(depth: int) -> float:
    """Smallest s with the depth-th nested log of s positive: the e-tower."""
    s = 1.0
    for _ in range(depth - 1):
        s = math.exp(s)
    return s


def _solve_s_min(log_rho, s_lo: float) -> float:
    """Window start: g(s) > 0 with a 10% safety margin, found by bisection."""
    lo = s_lo * (1.0 + 1e-9) + 1e-12
    hi = max(2.0 * lo, lo + 1.0)
    for _ in range(200):
        try:
            if float(log_rho(np.asarray(hi))) > 0.0:
                break
        except (WindowError, DomainError, FloatingPointError):
            pass
        hi *= 2.0
    else:
        raise DomainError("could not locate a window where rho > 1")

    def g_ok(s):
        try:
            return float(log_rho(np.asarray(s))) > 0.0
        except (WindowError, DomainError, FloatingPointError):
            return False

    if g_ok(lo):
        return lo * _WINDOW_MARGIN
    a, b = lo, hi
    for _ in range(200):
        midp = 0.5 * (a + b)
        if g_ok(midp):
            b = midp
        else:
            a = midp
    return b * _WINDOW_MARGIN


def _chain_products(ms):
    """[1, m1, m1*m2, ...] used by the derivative of nested logs."""
    out = [np.ones_like(ms[0])]
    for m in ms[:-1]:
        out.append(out[-1] * m)
    return out


def family_profile(spec: FamilySpec, side: Side = Side.PLUS) -> Profile:
    """Profile for a built-in family, with closed-form g(s) and g'(s)."""
    if spec.kind == "ilog":
        a = np.asarray(spec.exponents())
        depth = spec.k

        def g(s, a=a, depth=depth):
            ms = _nested_logs(s, depth)
            return sum(ai * mi for ai, mi in zip(a, ms))

        def gp(s, a=a, depth=depth):
            s = np.asarray(s, dtype=float)
            ms = _nested_logs(s, depth)
            chains = _chain_products(ms)
            # d m_j / ds = 1 / (s * m_1 ... m_{j-1})
            return sum(ai / (s * ch) for ai, ch in zip(a, chains))

        s_pos = _positivity_boundary(depth)
    else:
        k, eps, n2 = spec.k, spec.eps, 0.5 * spec.dim

        def g(s, k=k, eps=eps, n2=n2):
            ms = _nested_logs(s, k - 1)
            val = ms[0] + (n2 + 1.0) * ms[1]
            for j in range(2, k - 2):
                val = val + ms[j]
            return val + ms[k - 2] ** (1.0 + eps)

        def gp(s, k=k, eps=eps, n2=n2):
            s = np.asarray(s, dtype=float)
            ms = _nested_logs(s, k - 1)
            chains = _chain_products(ms)
            d = [1.0 / (s * ch) for ch in chains]
            val = d[0] + (n2 + 1.0) * d[1]
            for j in range(2, k - 2):
                val = val + d[j]
            return val + (1.0 + eps) * ms[k - 2] ** eps * d[k - 2]

        s_pos = _positivity_boundary(k - 1)

    s_min = _solve_s_min(g, s_pos)
    label = f"{spec.kind}:k={spec.k},eps={spec.eps:g}"
    return Profile(side=side, label=label, s_min=s_min, log_rho=g, dlog_rho=gp,
                   symbolic_divergent=spec.divergent,
                   meta={"family": spec})


def level_set_profile(c: float, dim: int) -> Profile:
    """Domain bounded by the level set h = c' with c' = (4 pi c)^{-N/2}.

    The envelope is l(t)^2 = 2 N t log(c/t) on 0 < t < c, which corresponds to
    log rho(s) = (N/2)(log c + s).  The closed-form h-measure of the pole,
    (h - c')/h, is attached in ``meta`` as the oracle.
    """
    if c <= 0.0:
        raise DomainError(f"level-set constant must be positive, got {c}")
    lnc = math.log(c)
    n2 = 0.5 * dim

    def g(s, lnc=lnc, n2=n2):
        return n2 * (lnc + np.asarray(s, dtype=float))

    def gp(s, n2=n2):
        return n2 * np.ones_like(np.asarray(s, dtype=float))

    s_min = _solve_s_min(g, -lnc if -lnc > 0 else 1e-9)
    log_c_prime = -n2 * math.log(4.0 * math.pi * c)
    return Profile(side=Side.PLUS, label=f"level-set:c={c:g}", s_min=s_min,
                   log_rho=g, dlog_rho=gp, symbolic_divergent=False,
                   meta={"c": c, "dim": dim, "log_c_prime": log_c_prime})


def halfspace_profile(radius: float = 1e3) -> Profile:
    """Constant envelope l = radius, approximating the full half-space.

    rho(t) = exp(radius^2 / (4 t)) fails the admissibility conditions, which
    is expected: this is a diagnostic surrogate for the domain with
    h-measure of the pole identically 1.
    """
    if radius <= 0.0:
        raise DomainError(f"halfspace radius must be positive, got {radius}")
    r2q = 0.25 * radius * radius

    def g(s, r2q=r2q):
        return r2q * np.exp(np.asarray(s, dtype=float))

    def gp(s, r2q=r2q):
        return r2q * np.exp(np.asarray(s, dtype=float))

    return Profile(side=Side.PLUS, label=f"halfspace:r={radius:g}", s_min=1e-9,
                   log_rho=g, dlog_rho=gp, symbolic_divergent=False,
                   meta={"radius": radius})


@dataclass(frozen=True)
class Finding:
    name: str
    passed: bool
    severity: str       # "info" or "warn"
    detail: str
    witness_s: tuple = ()
    witness_values: tuple = ()


@dataclass(frozen=True)
class ValidationReport:
    label: str
    findings: tuple

    @property
    def all_passed(self) -> bool:
        return all(f.passed for f in self.findings)


def validate_profile(profile: Profile, sample_count: int = 64) -> ValidationReport:
    """Advisory admissibility checks on a geometric grid toward the singular end.

    Checks that rho increases without bound and that t log rho(t) -> 0
    (plus side) or log rho(t) / t -> 0 (minus side).  Findings never block
    downstream use.
    """
    def eval_ok(si):
        try:
            with np.errstate(all="ignore"):
                return bool(np.isfinite(float(profile.log_rho(np.asarray(si)))))
        except (WindowError, DomainError):
            return False

    base = profile.s_min + 1e-6
    span = 2.0 * math.log(2.0) * sample_count          # ~2 octaves per sample
    while span > 0.5 and not eval_ok(base + span):
        span *= 0.5                                    # shrink to evaluable range
    s = base + np.linspace(0.0, span, sample_count)
    try:
        with np.errstate(all="ignore"):
            g = np.asarray(profile.log_rho(s), dtype=float)
    except (WindowError, DomainError) as exc:
        return ValidationReport(profile.label, (Finding(
            "evaluable", False, "warn", f"profile not evaluable on window: {exc}"),))

    findings = []
    finite = np.isfinite(g)
    if not finite.all():
        cut = max(int(np.argmin(finite)), 2)
        findings.append(Finding(
            "evaluable", False, "warn",
            f"log rho overflows beyond s={s[cut - 1]:.4g}; findings use the finite prefix"))
        s, g = s[:cut], g[:cut]
    diffs = np.diff(g)
    increasing = bool(np.all(diffs >= -1e-12))
    unbounded = bool(g[-1] > g[0] + 1.0)
    findings.append(Finding(
        "rho-increases-unboundedly", increasing and unbounded,
        "info" if (increasing and unbounded) else "warn",
        f"log rho rises from {g[0]:.4g} to {g[-1]:.4g} over the witness grid"
        + ("" if increasing else "; not monotone"),
        tuple(s[:4]) + tuple(s[-4:]), tuple(g[:4]) + tuple(g[-4:])))

    if profile.side is Side.PLUS:
        decay = np.exp(-s) * g          # t log rho(t)
        name = "t-log-rho-to-zero"
    else:
        decay = g * np.exp(-s)          # |t|^{-1} log rho(t)
        name = "log-rho-over-t-to-zero"
    trend_down = bool(np.all(np.diff(decay) <= 1e-12)) or decay[-1] < 0.5 * decay[0]
    goes_small = bool(decay[-1] < max(1e-3, 1e-3 * decay[0])) or decay[-1] < 1e-6
    findings.append(Finding(
        name, trend_down and goes_small,
        "info" if (trend_down and goes_small) else "warn",
        f"witness values fall from {decay[0]:.4g} to {decay[-1]:.4g}",
        tuple(s[:4]) + tuple(s[-4:]), tuple(decay[:4]) + tuple(decay[-4:])))

    # optional envelope-shape checks of the general-l theorem hypotheses
    with np.errstate(all="ignore"):
        gp = np.asarray(profile.dlog_rho_s(s), dtype=float)
    l_up = bool(np.all(g - gp > -1e-12))      # d(l^2)/dt = 4(g - g') > 0
    tl_down = increasing                      # t^{-1/2} l decreasing in t <=> g up in s
    findings.append(Finding(
        "envelope-monotonicity", l_up and tl_down, "info",
        "l increasing and t^{-1/2} l decreasing on the witness grid"
        if (l_up and tl_down) else
        "general-l monotonicity hypotheses not confirmed on the witness grid",
        (), ()))
    return ValidationReport(profile.label, tuple(findings))


def profile_from_text(text: str, dim: int, side: Side = Side.PLUS) -> Profile:
    """Parse a CLI profile designator.

    Accepted forms: ``ilog:k=<K>,eps=<E>``, ``kp:k=<K>,eps=<E>``,
    ``level-set:c=<C>``, ``halfspace[:r=<R>]``, ``expr:<expression in t>``.
    """
    from . import dsl  # local import: dsl depends on this module's Profile

    if text.startswith("expr:"):
        return dsl.expression_profile(text[len("expr:"):], side=side)
    name, _, args = text.partition(":")
    kv = {}
    if args:
        for part in args.split(","):
            key, _, val = part.partition("=")
            if not val:
                raise DomainError(f"malformed profile argument {part!r} in {text!r}")
            kv[key.strip()] = val.strip()
    if name == "ilog":
        spec = FamilySpec("ilog", int(kv.get("k", 1)), float(kv.get("eps", 0.0)), dim)
        return family_profile(spec, side)
    if name == "kp":
        spec = FamilySpec("kp", int(kv.get("k", 4)), float(kv.get("eps", 0.0)), dim)
        return family_profile(spec, side)
    if name == "level-set":
        if side is not Side.PLUS:
            raise DomainError("level-set domains are plus-side only")
        return level_set_profile(float(kv.get("c", 1.0)), dim)
    if name == "halfspace":
        if side is not Side.PLUS:
            raise DomainError("the halfspace surrogate is plus-side only")
        return halfspace_profile(float(kv.get("r", 1e3)))
    raise DomainError(f"unknown profile designator {text!r}")
