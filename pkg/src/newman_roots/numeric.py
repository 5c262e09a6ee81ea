"""Binary fixed-point real/complex arithmetic on Python integers, plus a radix-2 FFT.

A value is stored as an integer mantissa ``m`` meaning ``m * 2**-B``. All
rounding is round-half-to-even. The bulk kernels (FFT, Blaschke sampling, the
trap update) work on numpy object arrays of mantissas, which keeps every
operation exact-integer and therefore bit-deterministic on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import LengthNotPowerOfTwo

# guard bits used inside transcendental kernels before the final rounding
GUARD_BITS = 24
# constant in the forward FFT error bound c * N * log2(N) * 2^-B * max(|v|, 1)
FFT_ERROR_CONSTANT = 2


# ---------------------------------------------------------------- rounding


def round_div(num: int, den: int) -> int:
    """Nearest integer to num/den (den > 0), ties to even."""
    q, rem = divmod(num, den)
    twice = rem << 1
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


def rshift_round(x: int, k: int) -> int:
    """Nearest integer to x / 2**k, ties to even."""
    if k <= 0:
        return x << -k
    q = x >> k
    rem = x - (q << k)
    half = 1 << (k - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


_divmod = np.frompyfunc(divmod, 2, 2)


def round_div_array(num: np.ndarray, den) -> np.ndarray:
    """Elementwise round_div; den may be a positive int or an array of them."""
    q, rem = _divmod(num, den)
    twice = rem + rem
    q = q + (twice > den)
    ties = twice == den
    if ties.any():
        # q was not bumped at a tie; bump the odd ones
        q[ties] += q[ties] & 1
    return q


def rshift_round_array(x: np.ndarray, k: int) -> np.ndarray:
    q = x >> k
    rem = x & ((1 << k) - 1)
    half = 1 << (k - 1)
    q = q + (rem > half)
    ties = rem == half
    if ties.any():
        q[ties] += q[ties] & 1
    return q


def ceil_mantissa(x: Fraction, bits: int) -> int:
    """Smallest m with m * 2**-bits >= x."""
    return -((-x.numerator << bits) // x.denominator)


def floor_mantissa(x: Fraction, bits: int) -> int:
    return (x.numerator << bits) // x.denominator


# ---------------------------------------------------------------- scalars


@dataclass(frozen=True, order=True)
class Fixed:
    """Real number ``mantissa * 2**-frac_bits``."""

    mantissa: int
    frac_bits: int

    @classmethod
    def from_fraction(cls, x: Fraction, B: int) -> Fixed:
        return fixed_from_rational(x.numerator, x.denominator, B)

    @classmethod
    def zero(cls, B: int) -> Fixed:
        return cls(0, B)

    @classmethod
    def one(cls, B: int) -> Fixed:
        return cls(1 << B, B)

    def _check(self, other: Fixed) -> None:
        if other.frac_bits != self.frac_bits:
            raise ValueError("mixed precisions")

    def __add__(self, other: Fixed) -> Fixed:
        self._check(other)
        return Fixed(self.mantissa + other.mantissa, self.frac_bits)

    def __sub__(self, other: Fixed) -> Fixed:
        self._check(other)
        return Fixed(self.mantissa - other.mantissa, self.frac_bits)

    def __neg__(self) -> Fixed:
        return Fixed(-self.mantissa, self.frac_bits)

    def __abs__(self) -> Fixed:
        return Fixed(abs(self.mantissa), self.frac_bits)

    def __mul__(self, other) -> Fixed:
        if isinstance(other, int):
            return Fixed(self.mantissa * other, self.frac_bits)
        if isinstance(other, Fraction):
            return Fixed(round_div(self.mantissa * other.numerator, other.denominator), self.frac_bits)
        self._check(other)
        return Fixed(rshift_round(self.mantissa * other.mantissa, self.frac_bits), self.frac_bits)

    __rmul__ = __mul__

    def div_int(self, d: int) -> Fixed:
        if d < 0:
            return Fixed(round_div(-self.mantissa, -d), self.frac_bits)
        return Fixed(round_div(self.mantissa, d), self.frac_bits)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.frac_bits)

    def __float__(self) -> float:
        return self.mantissa / 2.0**self.frac_bits if self.frac_bits < 1000 else float(self.to_fraction())

    def ulp(self) -> Fraction:
        return Fraction(1, 1 << self.frac_bits)

    def to_decimal(self) -> str:
        """Exact decimal expansion (terminates since the denominator is a power of two)."""
        m, B = self.mantissa, self.frac_bits
        sign = "-" if m < 0 else ""
        m = abs(m)
        ip, fp = divmod(m, 1 << B)
        if fp == 0:
            return f"{sign}{ip}"
        digits = str(fp * 5**B).rjust(B, "0").rstrip("0")
        return f"{sign}{ip}.{digits}"


def fixed_from_rational(p: int, q: int, B: int) -> Fixed:
    """Nearest B-bit fixed-point value to p/q, ties to even."""
    if q == 0:
        raise ZeroDivisionError("q must be nonzero")
    if q < 0:
        p, q = -p, -q
    return Fixed(round_div(p << B, q), B)


@dataclass(frozen=True)
class ComplexFixed:
    re: Fixed
    im: Fixed

    @classmethod
    def from_mantissas(cls, re: int, im: int, B: int) -> ComplexFixed:
        return cls(Fixed(re, B), Fixed(im, B))

    @property
    def frac_bits(self) -> int:
        return self.re.frac_bits

    def __add__(self, other: ComplexFixed) -> ComplexFixed:
        return ComplexFixed(self.re + other.re, self.im + other.im)

    def __sub__(self, other: ComplexFixed) -> ComplexFixed:
        return ComplexFixed(self.re - other.re, self.im - other.im)

    def __neg__(self) -> ComplexFixed:
        return ComplexFixed(-self.re, -self.im)

    def __mul__(self, other) -> ComplexFixed:
        if isinstance(other, (int, Fraction, Fixed)):
            return ComplexFixed(self.re * other, self.im * other)
        B = self.frac_bits
        a, b = self.re.mantissa, self.im.mantissa
        c, d = other.re.mantissa, other.im.mantissa
        return ComplexFixed.from_mantissas(rshift_round(a * c - b * d, B), rshift_round(a * d + b * c, B), B)

    def conj(self) -> ComplexFixed:
        return ComplexFixed(self.re, -self.im)

    def reciprocal(self) -> ComplexFixed:
        """1/z with one rounding per component."""
        B = self.frac_bits
        a, b = self.re.mantissa, self.im.mantissa
        n2 = a * a + b * b
        if n2 == 0:
            raise ZeroDivisionError("reciprocal of zero")
        return ComplexFixed.from_mantissas(round_div(a << (2 * B), n2), round_div(-b << (2 * B), n2), B)

    def abs_squared(self) -> Fraction:
        return self.re.to_fraction() ** 2 + self.im.to_fraction() ** 2

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))


# ---------------------------------------------------------------- pi, exp(i theta)


def _arctan_inv(x: int, bits: int) -> int:
    """arctan(1/x) * 2**bits, truncated series; error below a few units."""
    one = 1 << bits
    term = one // x
    total = term
    x2 = x * x
    k = 1
    while term:
        term //= x2
        total += (-1) ** k * (term // (2 * k + 1))
        k += 1
    return total


@lru_cache(maxsize=32)
def pi_mantissa(bits: int) -> int:
    """pi * 2**bits rounded to nearest (Machin's formula with guard bits)."""
    w = bits + 16
    pi_w = 16 * _arctan_inv(5, w) - 4 * _arctan_inv(239, w)
    return rshift_round(pi_w, 16)


def _cos_sin_small(num: int, den: int, W: int) -> tuple[int, int]:
    """(cos, sin)(2*pi*num/den) * 2**W for 0 <= num/den <= 1/8 by Taylor series.

    Alternating series with decreasing terms: the truncation tail is below the
    first omitted term, which is < 2**-W when the loop stops.
    """
    theta = round_div(2 * pi_mantissa(W + 8) * num, den << 8)
    t2 = rshift_round(theta * theta, W)
    one = 1 << W
    # cos
    term, total, k = one, one, 0
    while term:
        term = -round_div(term * t2, ((2 * k + 1) * (2 * k + 2)) << W)
        total += term
        k += 1
    cos_m = total
    term, total, k = theta, theta, 0
    while term:
        term = -round_div(term * t2, ((2 * k + 2) * (2 * k + 3)) << W)
        total += term
        k += 1
    return cos_m, total


def _root_mantissas(j: int, N: int, B: int) -> tuple[int, int]:
    j %= N
    f = Fraction(j, N)
    quarter = math.floor(4 * f)
    rem = f - Fraction(quarter, 4)
    swap = rem > Fraction(1, 8)
    if swap:
        rem = Fraction(1, 4) - rem
    W = B + GUARD_BITS
    if rem == 0:
        c, s = 1 << W, 0
    else:
        c, s = _cos_sin_small(rem.numerator, rem.denominator, W)
    if swap:
        c, s = s, c
    for _ in range(quarter):  # multiply by i
        c, s = -s, c
    return rshift_round(c, GUARD_BITS), rshift_round(s, GUARD_BITS)


def root_of_unity(j: int, N: int, B: int) -> ComplexFixed:
    """e^{2 pi i j / N} to within 2^-B per component."""
    if N <= 0:
        raise ValueError("N must be positive")
    c, s = _root_mantissas(j, N, B)
    return ComplexFixed.from_mantissas(c, s, B)


@lru_cache(maxsize=8)
def _roots_table_cached(N: int, B: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    re = [0] * N
    im = [0] * N
    if N % 8:
        for j in range(N):
            re[j], im[j] = _root_mantissas(j, N, B)
        return tuple(re), tuple(im)
    eighth = N // 8
    W = B + GUARD_BITS
    base = [(1 << W, 0)] + [_cos_sin_small(j, N, W) for j in range(1, eighth + 1)]
    base = [(rshift_round(c, GUARD_BITS), rshift_round(s, GUARD_BITS)) for c, s in base]
    q = N // 4
    for j in range(q):
        c, s = base[j] if j <= eighth else base[q - j][::-1]
        re[j], im[j] = c, s
        re[j + q], im[j + q] = -s, c
        re[j + 2 * q], im[j + 2 * q] = -c, -s
        re[j + 3 * q], im[j + 3 * q] = s, -c
    return tuple(re), tuple(im)


def roots_of_unity_table(N: int, B: int) -> tuple[np.ndarray, np.ndarray]:
    """Mantissa arrays (re, im) of e^{2 pi i j/N}, j = 0..N-1 (same values as root_of_unity)."""
    re, im = _roots_table_cached(N, B)
    return np.array(re, dtype=object), np.array(im, dtype=object)


# ---------------------------------------------------------------- FFT


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _bit_reverse(N: int) -> np.ndarray:
    bits = N.bit_length() - 1
    idx = np.arange(N)
    rev = np.zeros(N, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_mantissas(re: np.ndarray, im: np.ndarray, B: int, inverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Iterative radix-2 DIT FFT on mantissa arrays.

    forward: X_k = sum_j v_j e^{-2 pi i jk/N}; inverse uses e^{+...} and divides by N.
    Butterflies are evaluated stage by stage in a fixed order, one rounding per
    component per twiddle product; additions are exact.
    """
    N = len(re)
    if not _is_power_of_two(N):
        raise LengthNotPowerOfTwo(f"length {N} is not a power of two")
    perm = _bit_reverse(N)
    xr = np.array(re, dtype=object)[perm]
    xi = np.array(im, dtype=object)[perm]
    wr_all, wi_all = roots_of_unity_table(N, B)
    if not inverse:
        wi_all = -wi_all
    size = 2
    while size <= N:
        half = size // 2
        stride = N // size
        wr = wr_all[: N // 2 : stride][:half]
        wi = wi_all[: N // 2 : stride][:half]
        xr = xr.reshape(-1, size)
        xi = xi.reshape(-1, size)
        er, ei = xr[:, :half], xi[:, :half]
        orr, oi = xr[:, half:], xi[:, half:]
        tr = rshift_round_array(orr * wr - oi * wi, B)
        ti = rshift_round_array(orr * wi + oi * wr, B)
        xr = np.concatenate([er + tr, er - tr], axis=1).reshape(-1)
        xi = np.concatenate([ei + ti, ei - ti], axis=1).reshape(-1)
        size *= 2
    if inverse and N > 1:
        k = N.bit_length() - 1
        xr = rshift_round_array(xr, k)
        xi = rshift_round_array(xi, k)
    return xr, xi


def fft(v: Sequence[ComplexFixed], direction: str = "forward") -> list[ComplexFixed]:
    """Radix-2 FFT of a sequence of ComplexFixed values (direction 'forward' or 'inverse')."""
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    N = len(v)
    if not _is_power_of_two(N):
        raise LengthNotPowerOfTwo(f"length {N} is not a power of two")
    B = v[0].frac_bits
    re = np.array([z.re.mantissa for z in v], dtype=object)
    im = np.array([z.im.mantissa for z in v], dtype=object)
    xr, xi = fft_mantissas(re, im, B, inverse=direction == "inverse")
    return [ComplexFixed.from_mantissas(int(a), int(b), B) for a, b in zip(xr, xi)]


def dft_direct(v: Sequence[ComplexFixed], direction: str = "forward") -> list[ComplexFixed]:
    """O(N^2) DFT at the same precision: exact accumulation, one rounding per output."""
    N = len(v)
    B = v[0].frac_bits
    wr, wi = _roots_table_cached(N, B)
    sign = -1 if direction == "forward" else 1
    out = []
    for k in range(N):
        acc_r = acc_i = 0
        for j, z in enumerate(v):
            idx = (j * k) % N
            c, s = wr[idx], sign * wi[idx]
            a, b = z.re.mantissa, z.im.mantissa
            acc_r += a * c - b * s
            acc_i += a * s + b * c
        shift = B + (N.bit_length() - 1 if direction == "inverse" else 0)
        out.append(ComplexFixed.from_mantissas(rshift_round(acc_r, shift), rshift_round(acc_i, shift), B))
    return out


def max_modulus(v: Sequence[ComplexFixed]) -> Fraction:
    """Upper bound |re| + |im| on the modulus of the largest entry."""
    if not v:
        return Fraction(0)
    B = v[0].frac_bits
    return Fraction(max(abs(z.re.mantissa) + abs(z.im.mantissa) for z in v), 1 << B)


def fft_error_bound(N: int, B: int, vmax: Fraction, direction: str = "forward") -> Fraction:
    """Componentwise error bound c * N * log2(N) * 2^-B * max(vmax, 1) (inverse: divided by N, plus one ulp).

    Derivation: a stage whose inputs have modulus <= 2^(s-1) V adds at most
    (2^(s-1) V + 1) 2^-B per entry (twiddle error plus product rounding), and
    later butterflies at most double it per stage; summing over stages gives
    2^-B N (V log2 N / 2 + 1) <= 2 N log2 N 2^-B max(V, 1).
    """
    if N <= 1:
        return Fraction(0)
    logn = N.bit_length() - 1
    bound = Fraction(FFT_ERROR_CONSTANT * N * logn, 1 << B) * max(vmax, Fraction(1))
    if direction == "inverse":
        bound = bound / N + Fraction(1, 1 << B)
    return bound
