"""Newman decomposition x^-1 - 1 = sum_k nu_k mu^k x^k, simultaneously at all targets.

The coefficients are c_k = (1/2 pi i) \\oint B(z) G_ell(z) z^k dz over the unit
circle, discretised at the N-th roots of unity and extracted with one inverse
FFT. Every coefficient carries a certified error budget (sample rounding, FFT
rounding, aliasing of c_{k+N}, c_{k+2N}, ...), and U_k bounds the suffix sums.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AliasingTooLarge, DeltaExceeded, PoleHit, ResidualTooLarge
from .numeric import (
    ComplexFixed,
    Fixed,
    ceil_mantissa,
    fft_error_bound,
    fft_mantissas,
    rshift_round,
    rshift_round_array,
    round_div,
    round_div_array,
    roots_of_unity_table,
)
from .params import (
    BuildParameters,
    TargetPoints,
    contour_aliasing_bound,
    pow_upper,
    tail_sum_bound,
)


@dataclass(frozen=True)
class NewmanDecomposition:
    nu: tuple[int, ...]  # mantissas of nu_0..nu_n
    U: tuple[int, ...]  # mantissas of U_0..U_{n+1}, rounded up
    mu: Fraction
    precision_bits: int
    fft_size: int
    contour_radius: Fraction
    sum_bound: Fixed
    aliasing_bound: Fixed
    coeff_error: Fixed
    tail_bound: Fixed
    imag_residual: Fixed
    imag_budget: Fixed
    delta: Fraction

    @property
    def n(self) -> int:
        return len(self.nu) - 1

    @property
    def support(self) -> int:
        """Largest k with nu_k != 0."""
        for k in range(len(self.nu) - 1, -1, -1):
            if self.nu[k]:
                return k
        return -1

    @property
    def within_delta(self) -> bool:
        return self.sum_bound.to_fraction() < self.delta

    def nu_fixed(self) -> list[Fixed]:
        return [Fixed(m, self.precision_bits) for m in self.nu]

    def U_fixed(self) -> list[Fixed]:
        return [Fixed(m, self.precision_bits) for m in self.U]

    def summary(self) -> dict:
        return {
            "sum_bound": float(self.sum_bound),
            "within_delta": self.within_delta,
            "aliasing_bound": float(self.aliasing_bound),
            "coeff_error": float(self.coeff_error),
            "tail_bound": float(self.tail_bound),
            "imag_residual": float(self.imag_residual),
            "support": self.support,
        }


def _points(targets) -> tuple[Fraction, ...]:
    return tuple(targets.points) if isinstance(targets, TargetPoints) else tuple(Fraction(x) for x in targets)


def _pole_distance_sq(t: Fraction, zr, zi, B: int):
    """(q 2^B)^2 |t - z|^2 as an integer (or array), with t = p/q."""
    p, q = t.numerator, t.denominator
    c = p * (1 << B) - q * zr
    d = -q * zi
    return c * c + d * d


def _blaschke_factor(t: Fraction, zr, zi, B: int, rdiv):
    """Mantissas of (1 - t z) / (t (t - z)), one rounding per component.

    With t = p/q and z = (zr + i zi) 2^-B the factor equals q (a + ib) / (p (c + id)),
    a = q 2^B - p zr, b = -p zi, c = p 2^B - q zr, d = -q zi.
    """
    p, q = t.numerator, t.denominator
    one = 1 << B
    a = q * one - p * zr
    b = -p * zi
    c = p * one - q * zr
    d = -q * zi
    den = p * (c * c + d * d)
    re = rdiv((q * (a * c + b * d)) << B, den)
    im = rdiv((q * (b * c - a * d)) << B, den)
    return re, im


def _pole_limit(t: Fraction) -> int:
    # |t - z| < 2^(-B+8)  <=>  c^2 + d^2 < (q 2^8)^2
    return (t.denominator << 8) ** 2


def blaschke_eval(targets, mu: Fraction, z: ComplexFixed) -> ComplexFixed:
    """B(z) = prod_j (1 - mu x_j z) / (mu x_j (mu x_j - z)), factors multiplied left to right."""
    B = z.frac_bits
    zr, zi = z.re.mantissa, z.im.mantissa
    acc_r, acc_i = 1 << B, 0
    for x in _points(targets):
        t = Fraction(mu) * x
        if _pole_distance_sq(t, zr, zi, B) < _pole_limit(t):
            raise PoleHit(f"z is within 2^-{B - 8} of the pole {t}")
        fr, fi = _blaschke_factor(t, zr, zi, B, round_div)
        acc_r, acc_i = rshift_round(acc_r * fr - acc_i * fi, B), rshift_round(acc_r * fi + acc_i * fr, B)
    return ComplexFixed.from_mantissas(acc_r, acc_i, B)


def g_ell_eval(ell: int, z: ComplexFixed) -> ComplexFixed:
    """G_ell(z) = 1 - ((ell+1)/ell) z^-1 + z^(-ell-1) / ell, with z^(-ell-1) by binary exponentiation."""
    B = z.frac_bits
    zinv = z.reciprocal()
    power = ComplexFixed.from_mantissas(1 << B, 0, B)
    base, e = zinv, ell + 1
    while e:
        if e & 1:
            power = power * base
        e >>= 1
        if e:
            base = base * base
    re = round_div(ell * (1 << B) - (ell + 1) * zinv.re.mantissa + power.re.mantissa, ell)
    im = round_div(-(ell + 1) * zinv.im.mantissa + power.im.mantissa, ell)
    return ComplexFixed.from_mantissas(re, im, B)


def _samples(params: BuildParameters, points: Sequence[Fraction]) -> tuple[np.ndarray, np.ndarray]:
    """F_j = B(w^j) G_ell(w^j), w = e^{2 pi i/N}; only j <= N/2 is evaluated, the rest by conjugate symmetry."""
    B, N, ell = params.precision_bits, params.fft_size, params.ell
    one = 1 << B
    wr, wi = roots_of_unity_table(N, B)
    half = N // 2
    zr, zi = wr[: half + 1], wi[: half + 1]
    br = np.full(half + 1, one, dtype=object)
    bi = np.zeros(half + 1, dtype=object)
    for x in points:
        t = params.mu * x
        if any(v < _pole_limit(t) for v in _pole_distance_sq(t, zr, zi, B)):
            raise PoleHit(f"sample within 2^-{B - 8} of the pole {t}")
        fr, fi = _blaschke_factor(t, zr, zi, B, round_div_array)
        br, bi = rshift_round_array(br * fr - bi * fi, B), rshift_round_array(br * fi + bi * fr, B)
    j = np.arange(half + 1)
    inv = (-j) % N
    top = (-(ell + 1) * j) % N
    gr = round_div_array(ell * one - (ell + 1) * wr[inv] + wr[top], ell)
    gi = round_div_array(-(ell + 1) * wi[inv] + wi[top], ell)
    fr = rshift_round_array(br * gr - bi * gi, B)
    fi = rshift_round_array(br * gi + bi * gr, B)
    Fr = np.empty(N, dtype=object)
    Fi = np.empty(N, dtype=object)
    Fr[: half + 1] = fr
    Fi[: half + 1] = fi
    if half > 1:
        Fr[half + 1 :] = fr[1:half][::-1]
        Fi[half + 1 :] = -fi[1:half][::-1]
    return Fr, Fi


def _coefficients_direct(Fr, Fi, n: int, B: int) -> tuple[list[int], list[int]]:
    """c_k = (1/N) sum_j F_j w^{j(k+1)} by direct summation, exact accumulation, one rounding."""
    N = len(Fr)
    wr, wi = roots_of_unity_table(N, B)
    j = np.arange(N)
    shift = B + N.bit_length() - 1
    cr, ci = [], []
    for k in range(n + 1):
        idx = (j * (k + 1)) % N
        c, s = wr[idx], wi[idx]
        cr.append(rshift_round(int(np.sum(Fr * c - Fi * s)), shift))
        ci.append(rshift_round(int(np.sum(Fr * s + Fi * c)), shift))
    return cr, ci


def error_budget(params: BuildParameters, points: Sequence[Fraction]) -> dict[str, Fraction]:
    """Analytic bounds for the computed samples and coefficients (see module docstring)."""
    B, N = params.precision_bits, params.fft_size
    ulp = Fraction(1, 1 << B)
    ts = [params.mu * x for x in points]
    bmax = math.prod((1 / t for t in ts), start=Fraction(1))
    # z error <= 2^-B; |f'(z)| <= 2 / (t (1 - t)) on the circle, |f| = 1/t; plus s product roundings
    e_b = ulp * bmax * (sum(2 / (1 - t) + 1 for t in ts) + len(ts)) * Fraction(101, 100)
    e_g = 4 * ulp
    gmax = 2 + Fraction(2, params.ell)
    e_f = bmax * e_g + gmax * e_b + ulp + e_b * e_g
    vmax = 2 * (bmax * gmax + e_f)
    e_c = e_f + fft_error_bound(N, B, vmax, "inverse")
    alias = contour_aliasing_bound(params.s, params.eta, params.ell, params.mu, N)
    raw = params.mu * e_c + alias + ulp
    return {"sample": e_f, "c": e_c, "alias": alias, "nu": raw}


def compute_decomposition(
    params: BuildParameters,
    targets,
    *,
    enforce_delta: bool | None = None,
    direct: bool = False,
) -> NewmanDecomposition:
    """nu_0..nu_n with certified suffix bounds U_0..U_{n+1}.

    enforce_delta defaults to params.strict; when set, a sum bound >= delta raises
    DeltaExceeded. direct=True replaces the FFT by O(nN) direct summation.
    """
    points = _points(targets)
    B, N, n, mu = params.precision_bits, params.fft_size, params.n, params.mu
    one = 1 << B
    budget = error_budget(params, points)
    if budget["alias"] >= Fraction(1, 1 << (B + 4)):
        raise AliasingTooLarge(N)
    Fr, Fi = _samples(params, points)
    if direct:
        cr, ci = _coefficients_direct(Fr, Fi, n, B)
    else:
        Xr, Xi = fft_mantissas(Fr, Fi, B, inverse=True)
        idx = [(k + 1) % N for k in range(n + 1)]
        cr = [int(Xr[i]) for i in idx]
        ci = [int(Xi[i]) for i in idx]
    mn, md = mu.numerator, mu.denominator
    nu = [round_div(-mn * c, md) for c in cr]
    nu[0] -= one
    # coefficients indistinguishable from zero are flushed; the budget doubles to cover it
    flush = ceil_mantissa(budget["nu"], B)
    nu = [0 if k and abs(m) <= flush else m for k, m in enumerate(nu)]
    coeff_err = 2 * budget["nu"]
    tail = tail_sum_bound(params.s, params.eta, params.ell, mu, n)
    ce = ceil_mantissa(coeff_err, B)
    U = [0] * (n + 2)
    U[n + 1] = ceil_mantissa(tail, B)
    for k in range(n, -1, -1):
        U[k] = U[k + 1] + abs(nu[k]) + ce
    dec = NewmanDecomposition(
        nu=tuple(nu),
        U=tuple(U),
        mu=mu,
        precision_bits=B,
        fft_size=N,
        contour_radius=1 - params.eta / (2 * params.s),
        sum_bound=Fixed(U[0], B),
        aliasing_bound=Fixed(ceil_mantissa(budget["alias"], B), B),
        coeff_error=Fixed(ce, B),
        tail_bound=Fixed(U[n + 1], B),
        imag_residual=Fixed(max(abs(c) for c in ci), B),
        imag_budget=Fixed(ceil_mantissa(budget["c"], B), B),
        delta=params.delta,
    )
    if enforce_delta is None:
        enforce_delta = params.strict
    if enforce_delta and not dec.within_delta:
        raise DeltaExceeded(dec.sum_bound.to_fraction(), params.delta)
    return dec


def _series_at(nu: Sequence[int], B: int, t: Fraction) -> Fraction:
    """sum_k nu_k 2^-B t^k exactly (homogenised integer Horner)."""
    p, q = t.numerator, t.denominator
    acc = 0
    qpow = 1
    for m in reversed(nu):
        acc = acc * p + m * qpow
        qpow *= q
    return Fraction(acc, (qpow // q) << B) if nu else Fraction(0)


def decomposition_residuals(dec: NewmanDecomposition, targets) -> list[Fraction]:
    """|x^-1 - 1 - sum_{k<=n} nu_k mu^k x^k| for each target, exactly."""
    return [abs(1 / x - 1 - _series_at(dec.nu, dec.precision_bits, dec.mu * x)) for x in _points(targets)]


def residual_threshold(dec: NewmanDecomposition) -> Fraction:
    """U_{n+1} mu^{n+1} + N 2^(-B+6): truncated tail plus rounding budget."""
    B = dec.precision_bits
    return dec.tail_bound.to_fraction() * pow_upper(dec.mu, dec.n + 1) + Fraction(dec.fft_size, 1 << max(B - 6, 0))


def verify_decomposition(dec: NewmanDecomposition, targets) -> Fraction:
    """Maximum residual over the targets; raises ResidualTooLarge above residual_threshold."""
    res = decomposition_residuals(dec, targets)
    worst = max(res, default=Fraction(0))
    thr = residual_threshold(dec)
    if worst > thr:
        raise ResidualTooLarge(f"residual {float(worst):.3g} exceeds {float(thr):.3g}")
    return worst


def write_decomposition_csv(dec: NewmanDecomposition, path: str | Path) -> None:
    """Rows k, nu_k, U_k in exact decimal; the last row carries only the tail bound U_{n+1}."""
    nu = dec.nu_fixed()
    U = dec.U_fixed()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "nu_k", "U_k"])
        for k in range(dec.n + 1):
            w.writerow([k, nu[k].to_decimal(), U[k].to_decimal()])
        w.writerow([dec.n + 1, "", U[dec.n + 1].to_decimal()])
