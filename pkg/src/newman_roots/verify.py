"""Polynomial assembly, the smallness check on Q_n, and exact root certification.

P_n(x) = 1 + sum_k eps_k x^k and Q_n(x) = 1/L + sum_k eps_k x^k / (L + k).
Signs of P_n are computed exactly: at x = p/q the value q^n P_n(p/q) is a single
integer. A bracket [a, b] with sign P_n(a) * sign P_n(b) = -1 contains a root by
the intermediate value theorem, so the certificate needs no trust in any
upstream floating or fixed-point arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath

from .coeff_model import CoefficientModel
from .errors import MembershipViolation, NotEnoughRoots, SmallnessFailed
from .numeric import round_div
from .params import BuildParameters, TargetPoints, q_threshold_lower, tail_bound_upper

DEFAULT_MAX_DEPTH = 64
DEFAULT_EVAL_BUDGET = 1024
# guard bits added to the working precision of the Q_n evaluation
Q_GUARD_BITS = 32


@dataclass(frozen=True)
class QMargin:
    """|Q_n(x_j)| <= value + radius; passes iff value + radius < threshold."""

    j: int
    value: Fraction  # |computed Q_n(x_j)|
    radius: Fraction
    threshold: Fraction
    tail_bound: Fraction

    @property
    def margin(self) -> Fraction:
        return self.threshold - (self.value + self.radius)

    @property
    def passed(self) -> bool:
        return self.margin > 0


@dataclass(frozen=True)
class PolynomialCertificate:
    coefficients: tuple[Fraction, ...]  # 1, eps_1, ..., eps_n
    targets: TargetPoints | None = None
    q_values: tuple[QMargin, ...] = ()
    q_threshold: Fraction | None = None
    brackets: tuple[tuple[Fraction, Fraction], ...] = ()
    root_count: int = 0
    interval: tuple[Fraction, Fraction] | None = None
    evaluations: int = 0

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def assemble_polynomial(model: CoefficientModel, eps: Sequence) -> PolynomialCertificate:
    coeffs = [Fraction(1)]
    for k, e in enumerate(eps, start=1):
        e = Fraction(e)
        if e not in model.coefficient_set(k):
            raise MembershipViolation(k, e)
        coeffs.append(e)
    return PolynomialCertificate(coefficients=tuple(coeffs))


# ---------------------------------------------------------------- Q_n smallness


def q_working_precision(threshold: Fraction, n: int, B: int) -> int:
    """Bits so that the evaluation radius (n+2) 2^-B' is far below the threshold."""
    if threshold <= 0:
        return B + Q_GUARD_BITS
    need = threshold.denominator.bit_length() - threshold.numerator.bit_length() + 2
    return max(B, need + (n + 2).bit_length() + Q_GUARD_BITS)


def evaluate_q(coefficients: Sequence[Fraction], L: int, x: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """(value, radius) with |Q_n(x) - value| <= radius, by fixed-point Horner at `bits` bits.

    Each step rounds the product by x and the coefficient eps_k/(L+k) once, and the
    accumulated error is damped by |x| <= 1, so the radius is (n+2) 2^-bits.
    """
    p, q = x.numerator, x.denominator
    n = len(coefficients) - 1
    acc = 0
    for k in range(n, -1, -1):
        c = coefficients[k]
        term = round_div(c.numerator << bits, c.denominator * (L + k))
        acc = round_div(acc * p, q) + term
    return Fraction(acc, 1 << bits), Fraction(n + 2, 1 << bits)


def q_polynomial_coefficients(cert: PolynomialCertificate, L: int) -> list[Fraction]:
    """Q_n coefficients eps_k / (L + k) with eps_0 = 1."""
    return [c / (L + k) for k, c in enumerate(cert.coefficients)]


def check_q_smallness(
    cert: PolynomialCertificate, params: BuildParameters, targets: TargetPoints, *, enforce: bool | None = None
) -> PolynomialCertificate:
    """Evaluate |Q_n(x_j)| with certified radii against the threshold alpha e^{-2 beta}/(2(s-1)).

    enforce defaults to params.strict; when set, the first failing target raises
    SmallnessFailed. The analytic tail bound A e^{-n alpha}/(alpha (L+n)) is reported too.
    """
    threshold = q_threshold_lower(params.alpha, params.s, params.beta)
    tail = tail_bound_upper(params.A, params.alpha, params.L, cert.degree)
    bits = q_working_precision(threshold, cert.degree, params.precision_bits)
    margins = []
    for j, x in enumerate(targets.points, start=1):
        v, rad = evaluate_q(cert.coefficients, params.L, x, bits)
        margins.append(QMargin(j, abs(v), rad, threshold, tail))
    if enforce is None:
        enforce = params.strict
    if enforce:
        for m in margins:
            if not m.passed:
                raise SmallnessFailed(m.j, m.value + m.radius, threshold)
    return replace(cert, targets=targets, q_values=tuple(margins), q_threshold=threshold)


# ---------------------------------------------------------------- exact signs


def integer_coefficients(coefficients: Sequence[Fraction]) -> list[int]:
    """Coefficients scaled by the positive lcm of their denominators (signs unchanged)."""
    den = math.lcm(*(Fraction(c).denominator for c in coefficients))
    return [int(Fraction(c) * den) for c in coefficients]


def homogeneous_value(ints: Sequence[int], p: int, q: int) -> int:
    """sum_k c_k p^k q^(n-k) by binary splitting (q > 0); equals q^n P(p/q)."""
    n = len(ints) - 1
    if n < 0:
        return 0
    ppow: dict[int, int] = {}
    qpow: dict[int, int] = {}

    def pw(cache, base, e):
        v = cache.get(e)
        if v is None:
            v = cache[e] = base**e
        return v

    def rec(lo: int, hi: int) -> int:
        # sum_{k=lo}^{hi-1} c_k p^(k-lo) q^(hi-1-k)
        if hi - lo <= 16:
            acc = 0
            for k in range(hi - 1, lo - 1, -1):
                acc = acc * p + ints[k] * pw(qpow, q, hi - 1 - k)
            return acc
        mid = (lo + hi) // 2
        return rec(lo, mid) * pw(qpow, q, hi - mid) + rec(mid, hi) * pw(ppow, p, mid - lo)

    return rec(0, n + 1)


def homogeneous_value_horner(ints: Sequence[int], p: int, q: int) -> int:
    """Independent evaluation of the same integer by plain sequential Horner."""
    acc = 0
    qp = 1
    for c in reversed(ints):
        acc = acc * p + c * qp
        qp *= q
    return acc


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def sign_at(ints: Sequence[int], x: Fraction) -> int:
    return _sign(homogeneous_value(ints, x.numerator, x.denominator))


def sign_profile(cert: PolynomialCertificate, grid: Sequence[Fraction]) -> list[int]:
    ints = integer_coefficients(cert.coefficients)
    return [sign_at(ints, Fraction(x)) for x in grid]


def _count(signs: Sequence[int]) -> tuple[int, int]:
    strict = sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0)
    zeros = sum(1 for v in signs if v == 0)
    return strict, zeros


def sign_changes_detail(cert: PolynomialCertificate, grid: Sequence[Fraction]) -> tuple[int, int]:
    """(strict sign changes between adjacent grid points, exact zeros on the grid)."""
    grid = [Fraction(x) for x in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    return _count(sign_profile(cert, grid))


def count_sign_changes(cert: PolynomialCertificate, grid: Sequence[Fraction]) -> int:
    """Distinct roots certified by the grid: strict adjacent sign changes plus exact zeros.

    A zero splits the sequence, so no change is counted across it.
    """
    strict, zeros = sign_changes_detail(cert, grid)
    return strict + zeros


# ---------------------------------------------------------------- certification


def base_grid(targets: TargetPoints) -> list[Fraction]:
    """The targets and the midpoints between neighbours (2s - 1 points)."""
    pts = list(targets.points)
    grid = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        grid += [(a + b) / 2, b]
    return grid


def certify(
    cert: PolynomialCertificate,
    params: BuildParameters,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    eval_budget: int = DEFAULT_EVAL_BUDGET,
    raise_on_failure: bool = True,
) -> PolynomialCertificate:
    """Collect >= r disjoint sign-change brackets in I(alpha).

    The base grid is scanned first; intervals whose endpoints share a sign are then
    bisected breadth-first (left to right within a level) until r brackets are found,
    the depth reaches max_depth, or eval_budget evaluations have been spent.
    """
    targets = cert.targets
    if targets is None:
        raise ValueError("certificate has no targets; run check_q_smallness first")
    ints = integer_coefficients(cert.coefficients)
    grid = base_grid(targets)
    signs = {x: sign_at(ints, x) for x in grid}
    evals = len(grid)
    r = params.r

    def collect() -> list[tuple[Fraction, Fraction]]:
        pts = sorted(signs)
        out = []
        for a, b in zip(pts, pts[1:]):
            if signs[a] * signs[b] < 0:
                out.append((a, b))
        out += [(x, x) for x in pts if signs[x] == 0]
        return sorted(out)

    brackets = collect()
    pending = [(a, b) for a, b in zip(grid, grid[1:]) if signs[a] * signs[b] > 0]
    depth = 0
    while len(brackets) < r and pending and depth < max_depth and evals < eval_budget:
        depth += 1
        nxt = []
        for a, b in pending:
            if evals >= eval_budget:
                break
            m = (a + b) / 2
            signs[m] = sign_at(ints, m)
            evals += 1
            if signs[m] * signs[a] > 0:
                nxt += [(a, m), (m, b)]
        pending = nxt
        brackets = collect()
    lo, hi = targets.points[0], targets.points[-1]
    out = replace(cert, brackets=tuple(brackets), root_count=len(brackets), interval=(lo, hi), evaluations=evals)
    if raise_on_failure and len(brackets) < r:
        err = NotEnoughRoots(len(brackets), r)
        err.certificate = out
        raise err
    return out


def recheck_brackets(cert: PolynomialCertificate) -> bool:
    """Re-derive every bracket sign with the sequential Horner evaluator."""
    ints = integer_coefficients(cert.coefficients)
    for a, b in cert.brackets:
        sa = _sign(homogeneous_value_horner(ints, a.numerator, a.denominator))
        if a == b:
            if sa != 0:
                return False
            continue
        sb = _sign(homogeneous_value_horner(ints, b.numerator, b.denominator))
        if sa * sb >= 0:
            return False
    return True


def brackets_disjoint(brackets: Sequence[tuple[Fraction, Fraction]]) -> bool:
    """Closed brackets sharing only an endpoint with an open sign change still isolate distinct roots
    as long as no two brackets overlap in their interiors and no zero bracket is an endpoint."""
    bs = sorted(brackets)
    for (a1, b1), (a2, b2) in zip(bs, bs[1:]):
        if a2 < b1:
            return False
        if a2 == b1 and (a1 == b1 or a2 == b2):
            return False
    return True


def format_mag(x: Fraction, digits: int = 15) -> str:
    """Short decimal rendering of a possibly tiny rational (deterministic)."""
    if x == 0:
        return "0"
    with mpmath.workprec(64 + 4 * digits):
        v = mpmath.mpf(x.numerator) / x.denominator
        return mpmath.nstr(v, digits, min_fixed=-4, max_fixed=6)
