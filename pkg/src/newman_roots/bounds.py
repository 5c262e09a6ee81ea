"""The classical upper bound r <= v(A) * ceil(sqrt n) via a damping polynomial.

q_0(t) = (1 + 2 sum_{k=1}^{l} T_k(t)) / (2l + 1) is the normalised Dirichlet kernel
written in t = cos y, q_1(t) = q_0(1 - 2t/n) with l = ceil(sqrt n), and
q = q_1^v. Then q(0) = 1, q has only real roots, and sum_{k=1}^n |q(k)| < 1/A,
which bounds the number of roots of any admissible P_n in (0, 1] by deg q = v l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import libmp

from .errors import SumCheckFailed
from .verify import homogeneous_value

# exact rational power sums up to this n; beyond it an upward-rounded fixed-point sum is used
EXACT_SUM_LIMIT = 4096
SUM_BITS = 96
MAX_V = 64


@dataclass(frozen=True)
class DampingPolynomial:
    n: int
    A: Fraction
    ell: int
    v: int
    q0_coeffs: tuple[Fraction, ...]
    q1_coeffs: tuple[Fraction, ...]
    sum_check: Fraction  # >= sum_{k=1}^n |q_1(k)|^v
    exact_sum: bool
    real_roots: bool

    @property
    def m(self) -> int:
        return self.v * self.ell

    def to_json(self) -> dict:
        return {"n": self.n, "A": str(self.A), "v": self.v, "m": self.m, "sum_check": str(self.sum_check)}


def chebyshev_coefficients(k: int) -> list[int]:
    """Integer coefficients (ascending) of T_k."""
    prev, cur = [1], [0, 1]
    if k == 0:
        return prev
    for _ in range(k - 1):
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return cur


def dirichlet_numerator(ell: int) -> list[int]:
    """Integer coefficients of (2 ell + 1) q_0(t) = 1 + 2 sum_{k<=ell} T_k(t)."""
    out = [0] * (ell + 1)
    out[0] = 1
    for k in range(1, ell + 1):
        for i, c in enumerate(chebyshev_coefficients(k)):
            out[i] += 2 * c
    return out


def compose_affine(coeffs: list[Fraction], a: Fraction, b: Fraction) -> list[Fraction]:
    """Coefficients of p(a + b t) by Horner over polynomials."""
    res: list[Fraction] = [Fraction(0)]
    for c in reversed(coeffs):
        nxt = [Fraction(0)] * (len(res) + 1)
        for i, r in enumerate(res):
            nxt[i] += a * r
            nxt[i + 1] += b * r
        nxt[0] += c
        res = nxt
    while len(res) > 1 and res[-1] == 0:
        res.pop()
    return res


def minimal_v(A: Fraction) -> int:
    """Smallest v >= 4 with 2^(1-v) < 1/A."""
    v = 4
    while Fraction(2) ** (1 - v) >= 1 / Fraction(A):
        v += 1
    return v


def q1_values(n: int, ell: int) -> tuple[list[int], int]:
    """(I_1..I_n, D) with q_1(k) = I_k / D exactly, D = (2 ell + 1) n^ell."""
    c = dirichlet_numerator(ell)
    D = (2 * ell + 1) * n**ell
    return [homogeneous_value(c, n - 2 * k, n) for k in range(1, n + 1)], D


def power_sum(values: list[int], D: int, v: int, exact: bool) -> Fraction:
    """sum |I_k / D|^v, exactly or rounded upward to SUM_BITS fractional bits."""
    Dv = D**v
    if exact:
        return Fraction(sum(abs(x) ** v for x in values), Dv)
    total = 0
    for x in values:
        total += -((-(abs(x) ** v) << SUM_BITS) // Dv)
    return Fraction(total, 1 << SUM_BITS)


def real_root_check(ell: int) -> bool:
    """ell sign alternations of q_0 at rational points near cos((2j+1) pi/(2 ell + 1)), j = 0..ell.

    q_0(cos y) = sin((ell + 1/2) y) / ((2 ell + 1) sin(y/2)) takes the sign (-1)^j there,
    and ell sign changes of a degree-ell polynomial on [-1, 1] place all its roots in [-1, 1].
    """
    c = dirichlet_numerator(ell)
    pts = []
    with mpmath.workprec(80):
        for j in range(ell + 1):
            t = mpmath.cos((2 * j + 1) * mpmath.pi / (2 * ell + 1))
            pts.append(Fraction(*libmp.to_rational(t._mpf_)).limit_denominator(1 << 60) if j < ell else Fraction(-1))
    signs = []
    for t in pts:
        val = homogeneous_value(c, t.numerator, t.denominator)
        signs.append((val > 0) - (val < 0))
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0)
    return changes == ell and all(signs)


def build_damping(n: int, A) -> DampingPolynomial:
    if n < 1:
        raise ValueError("n must be >= 1")
    A = Fraction(A)
    if A <= 0:
        raise ValueError("A must be positive")
    ell = math.isqrt(n - 1) + 1  # ceil(sqrt(n))
    num = dirichlet_numerator(ell)
    q0 = [Fraction(c, 2 * ell + 1) for c in num]
    q1 = compose_affine(q0, Fraction(1), Fraction(-2, n))
    values, D = q1_values(n, ell)
    exact = n <= EXACT_SUM_LIMIT
    v = minimal_v(A)
    while True:
        total = power_sum(values, D, v, exact)
        if total < 1 / A:
            break
        if v >= MAX_V:
            raise SumCheckFailed(f"sum |q_1(k)|^v >= 1/A even at v = {v}")
        v += 1
    return DampingPolynomial(
        n=n, A=A, ell=ell, v=v, q0_coeffs=tuple(q0), q1_coeffs=tuple(q1),
        sum_check=total, exact_sum=exact, real_roots=real_root_check(ell),
    )


def decay_check(n: int) -> bool:
    """|q_1(k)| <= 1/(2 sqrt k) for k = 1..n, exactly: 4 k I_k^2 <= D^2."""
    ell = math.isqrt(n - 1) + 1
    values, D = q1_values(n, ell)
    D2 = D * D
    return all(4 * k * x * x <= D2 for k, x in enumerate(values, start=1))


def upper_bound(n: int, A) -> int:
    """m = v(A) ceil(sqrt n): no admissible P_n has more roots in (0, 1]."""
    return build_damping(n, A).m
