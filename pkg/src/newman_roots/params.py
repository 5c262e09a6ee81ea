"""Scalar parameters of the construction and the target-point layout."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Mapping

from contextlib import contextmanager

import mpmath
from mpmath import libmp

from .coeff_model import CoefficientModel, format_rational
from .errors import Infeasible, ProductTooSmall

DEFAULT_ETA = Fraction(1, 8)
DEFAULT_C_PREC = Fraction(3)
DEFAULT_C_DEG = Fraction(6)
PRECISION_FLOOR = 64
# decimal digits for the interval evaluation of the Jensen quantities
_IV_DPS = 60

DEGREE_RULES = ("practical", "sufficient")


@contextmanager
def _iv_precision(dps: int):
    iv = mpmath.iv
    saved = iv.prec
    iv.dps = dps
    try:
        yield iv
    finally:
        iv.prec = saved


def _iv_upper(x) -> Fraction:
    p, q = libmp.to_rational(x._mpi_[1])
    return Fraction(int(p), int(q))


def _iv_lower(x) -> Fraction:
    p, q = libmp.to_rational(x._mpi_[0])
    return Fraction(int(p), int(q))


def jensen_constant(A: Fraction) -> Fraction:
    """Rational upper bound on (9 pi / sqrt 2) * log(4 max(1, A))."""
    with _iv_precision(_IV_DPS) as iv:
        m = max(Fraction(1), Fraction(A))
        val = 9 * iv.pi / iv.sqrt(2) * iv.log(4 * iv.mpf(m.numerator) / m.denominator)
        return _iv_upper(val)


def _iv_frac(x: Fraction):
    return mpmath.iv.mpf(x.numerator) / x.denominator


def jensen_beta(jensen_C: Fraction, alpha: Fraction, L: int) -> Fraction:
    """Rational upper bound on C(A)/alpha + L log(1/(1 - 2 alpha))."""
    with _iv_precision(_IV_DPS):
        val = _iv_frac(jensen_C) / _iv_frac(alpha) - L * mpmath.iv.log(1 - 2 * _iv_frac(alpha))
        return _iv_upper(val)


def q_threshold_lower(alpha: Fraction, s: int, beta: Fraction) -> Fraction:
    """Rational lower bound on alpha e^{-2 beta} / (2 (s - 1))."""
    with _iv_precision(_IV_DPS):
        val = _iv_frac(alpha) * mpmath.iv.exp(-2 * _iv_frac(beta)) / (2 * (s - 1))
        return _iv_lower(val)


def tail_bound_upper(A: Fraction, alpha: Fraction, L: int, n: int) -> Fraction:
    """Rational upper bound on A e^{-n alpha} / (alpha (L + n))."""
    with _iv_precision(_IV_DPS):
        val = _iv_frac(A) * mpmath.iv.exp(-n * _iv_frac(alpha)) / (_iv_frac(alpha) * (L + n))
        return _iv_upper(val)


def degree_margin(n: int, alpha: Fraction, L: int, s: int, A: Fraction, beta: Fraction) -> mpmath.mpf:
    """LHS - RHS of the sufficient degree inequality; positive means n is large enough."""
    with mpmath.workprec(256):
        a = mpmath.mpf(alpha.numerator) / alpha.denominator
        lhs = n * a + mpmath.log(a * (L + n) / (mpmath.mpf(A.numerator) / A.denominator)) + mpmath.log(a / (2 * (s - 1)))
        return lhs - 2 * mpmath.mpf(beta.numerator) / beta.denominator


def select_degree(alpha: Fraction, L: int, s: int, A: Fraction, beta: Fraction) -> int:
    """Smallest n >= 1 satisfying the sufficient degree inequality (the LHS is increasing in n)."""
    hi = 1
    while degree_margin(hi, alpha, L, s, A, beta) <= 0:
        hi *= 2
    lo = hi // 2  # predicate fails at lo (or lo == 0)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if degree_margin(mid, alpha, L, s, A, beta) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def practical_degree(r: int, alpha: Fraction, c_deg: Fraction) -> int:
    """n = ceil(c_deg * r / alpha); n * alpha grows linearly in r, so n = O(r^2) at fixed eta."""
    return math.ceil(Fraction(c_deg) * r / alpha)


def pow_upper(x: Fraction, m: int) -> Fraction:
    """Rational upper bound on x**m (outward-rounded interval power)."""
    with _iv_precision(_IV_DPS):
        return _iv_upper(_iv_frac(Fraction(x)) ** m)


def contour_aliasing_bound(s: int, eta: Fraction, ell: int, mu: Fraction, N: int) -> Fraction:
    """Upper bound on |nu-aliasing| = mu * sum_{t>=1} |c_{k+tN}| for every k >= 0.

    Shifting the contour to radius u = 1 - eta/(2s) gives |c_m| <= K u^(m - ell) with
    K = 3^s (1-eta)^-2 (2 + 2/ell).
    """
    u = 1 - eta / (2 * s)
    K = Fraction(3**s) / (1 - eta) ** 2 * (2 + Fraction(2, ell))
    uN = pow_upper(u, N)
    if uN >= 1:
        return Fraction(10**9)
    return mu * K * pow_upper(u, N - ell) / (1 - uN)


def tail_sum_bound(s: int, eta: Fraction, ell: int, mu: Fraction, n: int) -> Fraction:
    """Upper bound on sum_{i>n} |nu_i| from the same contour-shift estimate."""
    u = 1 - eta / (2 * s)
    K = Fraction(3**s) / (1 - eta) ** 2 * (2 + Fraction(2, ell))
    return mu * K * pow_upper(u, n + 1 - ell) / (1 - u)


@dataclass(frozen=True)
class BuildParameters:
    r: int
    s: int
    alpha: Fraction
    eta: Fraction
    mu: Fraction
    L: int
    n: int
    delta: Fraction
    Lambda: Fraction
    Psi: Fraction
    ell: int
    beta: Fraction
    precision_bits: int
    fft_size: int
    jensen_C: Fraction
    A: Fraction
    M: int
    a: Fraction
    n_sufficient: int
    degree_rule: str = "practical"
    strict: bool = False
    c_prec: Fraction = DEFAULT_C_PREC
    c_deg: Fraction = DEFAULT_C_DEG

    def to_json(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = format_rational(v) if isinstance(v, Fraction) else v
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> BuildParameters:
        kwargs = {}
        for name, f in cls.__dataclass_fields__.items():
            if name not in data:
                continue
            v = data[name]
            kwargs[name] = Fraction(v) if f.type == "Fraction" else v
        return cls(**kwargs)


@dataclass(frozen=True)
class TargetPoints:
    points: tuple[Fraction, ...]
    product_lower_bound: Fraction

    @property
    def denominator(self) -> int:
        return math.lcm(*(x.denominator for x in self.points)) if self.points else 1


def minimal_L(M: int, a: Fraction, A: Fraction, s: int, eta: Fraction) -> int:
    Psi = 3 * M * A + 1
    return math.ceil(max(6 * M * Psi / a, Fraction(9 * M), 2 * s / eta))


def _power_of_two_above(x: int) -> int:
    N = 1
    while N <= x:
        N *= 2
    return N


def select_fft_size(s: int, eta: Fraction, ell: int, mu: Fraction, n: int, B: int) -> int:
    """Smallest power of two N > n+1 whose aliasing bound is below 2^(-B-4)."""
    N = _power_of_two_above(n + 1)
    target = Fraction(1, 1 << (B + 4))
    while contour_aliasing_bound(s, eta, ell, mu, N) >= target:
        N *= 2
    return N


def check_parameters(p: BuildParameters) -> BuildParameters:
    """Raise Infeasible unless every invariant of the parameter set holds exactly."""
    M, A, a = p.M, p.A, p.a
    problems = []
    if p.r < 0 or p.s < 2:
        problems.append("need r >= 0 and s >= 2")
    if not (0 < p.eta < Fraction(1, 3)):
        problems.append("eta must lie in (0, 1/3)")
    if p.Psi != 3 * M * A + 1 or p.Lambda != 3 * p.Psi:
        problems.append("Psi/Lambda mismatch")
    if p.delta > min(Fraction(1, 9 * M), a / (6 * M * (3 * M * A + 1))) or p.delta <= 0:
        problems.append("delta too large")
    if p.mu != 1 - p.eta / p.s or p.alpha != p.eta / (2 * p.s):
        problems.append("mu/alpha mismatch")
    if p.L < minimal_L(M, a, A, p.s, p.eta):
        problems.append(f"L must be >= {minimal_L(M, a, A, p.s, p.eta)}")
    if p.ell <= 2 / p.delta:
        problems.append("ell must exceed 2/delta")
    if p.fft_size <= p.n + 1 or p.fft_size & (p.fft_size - 1):
        problems.append("FFT size must be a power of two > n+1")
    if p.n < 1:
        problems.append("n must be positive")
    if 1 - Fraction(p.L + 1, p.L) * p.mu < p.eta / (2 * p.s):
        problems.append("(L+1)/L * mu margin too small")
    if p.precision_bits < 16:
        problems.append("precision too small")
    if p.degree_rule not in DEGREE_RULES:
        problems.append(f"degree rule must be one of {DEGREE_RULES}")
    # safety conditions for the one-dimensional dynamics
    if p.mu * p.Lambda - p.Psi < p.Psi:
        problems.append("mu*Lambda - Psi < Psi")
    if (Fraction(1, p.L) + p.delta) * p.Lambda + A > p.Psi / M:
        problems.append("(1/L + delta) Lambda + A > Psi/M")
    if problems:
        raise Infeasible("; ".join(problems))
    return p


def select_parameters(model: CoefficientModel, r: int, overrides: Mapping | None = None) -> BuildParameters:
    """All scalars of the construction for (model, r); overrides may set
    eta, ell, s, L, n, precision_bits, fft_size, c_prec, c_deg, degree_rule, strict."""
    o = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = set(o) - {"eta", "ell", "s", "L", "n", "precision_bits", "fft_size", "c_prec", "c_deg", "degree_rule", "strict"}
    if unknown:
        raise Infeasible(f"unknown overrides {sorted(unknown)}")
    if r < 1:
        raise Infeasible("r must be >= 1")
    M, a, A = model.balance_M, model.balance_a, model.bound_A
    eta = Fraction(o.get("eta", DEFAULT_ETA))
    s = int(o.get("s", 2 * r))
    if s < 2:
        raise Infeasible("s must be >= 2")
    if not (0 < eta < Fraction(1, 3)):
        raise Infeasible("eta must lie in (0, 1/3)")
    Psi = 3 * M * A + 1
    Lambda = 3 * Psi
    delta = min(Fraction(1, 9 * M), a / (6 * M * Psi))
    alpha = eta / (2 * s)
    mu = 1 - eta / s
    L = int(o.get("L", minimal_L(M, a, A, s, eta)))
    ell = int(o.get("ell", math.floor(2 / delta) + 1))
    c_prec = Fraction(o.get("c_prec", DEFAULT_C_PREC))
    c_deg = Fraction(o.get("c_deg", DEFAULT_C_DEG))
    B = int(o.get("precision_bits", math.ceil(c_prec * r) + PRECISION_FLOOR))
    jC = jensen_constant(A)
    beta = jensen_beta(jC, alpha, L)
    n_suff = select_degree(alpha, L, s, A, beta)
    rule = o.get("degree_rule", "practical")
    strict = bool(o.get("strict", False))
    if strict:
        rule = "sufficient"
    if "n" in o:
        n = int(o["n"])
    elif rule == "sufficient":
        n = n_suff
    else:
        n = practical_degree(r, alpha, c_deg)
    N = int(o["fft_size"]) if "fft_size" in o else select_fft_size(s, eta, ell, mu, n, B)
    params = BuildParameters(
        r=r, s=s, alpha=alpha, eta=eta, mu=mu, L=L, n=n, delta=delta, Lambda=Lambda, Psi=Psi,
        ell=ell, beta=beta, precision_bits=B, fft_size=N, jensen_C=jC, A=A, M=M, a=a,
        n_sufficient=n_suff, degree_rule=rule, strict=strict, c_prec=c_prec, c_deg=c_deg,
    )
    return check_parameters(params)


def with_degree(params: BuildParameters, n: int) -> BuildParameters:
    """Same parameters at a new degree; the FFT size is re-derived."""
    N = select_fft_size(params.s, params.eta, params.ell, params.mu, n, params.precision_bits)
    return check_parameters(replace(params, n=n, fft_size=N))


def target_points(params: BuildParameters) -> TargetPoints:
    """s equally spaced points tiling I(alpha) = [1 - 2 alpha, 1 - alpha]."""
    s, alpha = params.s, params.alpha
    if s < 2:
        raise ProductTooSmall("need at least two target points")
    pts = tuple(1 - 2 * alpha + j * alpha / (s - 1) for j in range(s))
    prod = math.prod(pts, start=Fraction(1))
    if prod < 1 - params.eta:
        raise ProductTooSmall(f"product of targets {float(prod)} < 1 - eta")
    return TargetPoints(pts, prod)
