import cmath
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newman_roots.errors import LengthNotPowerOfTwo
from newman_roots.numeric import (
    ComplexFixed,
    Fixed,
    dft_direct,
    fft,
    fft_error_bound,
    fixed_from_rational,
    max_modulus,
    pi_mantissa,
    rshift_round,
    rshift_round_array,
    round_div,
    round_div_array,
    root_of_unity,
    roots_of_unity_table,
)


def test_round_div_ties_to_even():
    assert round_div(5, 2) == 2
    assert round_div(7, 2) == 4
    assert round_div(-5, 2) == -2
    assert round_div(-7, 2) == -4
    assert round_div(1, 3) == 0
    assert round_div(2, 3) == 1


@given(st.integers(-10**40, 10**40), st.integers(1, 10**20))
def test_round_div_is_nearest(num, den):
    q = round_div(num, den)
    assert abs(Fraction(num, den) - q) <= Fraction(1, 2)


@given(st.integers(-10**40, 10**40), st.integers(0, 80))
def test_rshift_round_matches_round_div(x, k):
    assert rshift_round(x, k) == round_div(x, 1 << k)


@settings(max_examples=30)
@given(st.lists(st.integers(-10**30, 10**30), min_size=1, max_size=50), st.integers(1, 10**12))
def test_array_rounding_matches_scalar(xs, den):
    arr = np.array(xs, dtype=object)
    assert list(round_div_array(arr, den)) == [round_div(x, den) for x in xs]
    assert list(rshift_round_array(arr, 7)) == [rshift_round(x, 7) for x in xs]


def test_array_rounding_exact_ties():
    arr = np.array([1, 3, 5, -1, -3, -5], dtype=object)
    assert list(round_div_array(arr, 2)) == [0, 2, 2, 0, -2, -2]
    assert list(rshift_round_array(arr, 1)) == [0, 2, 2, 0, -2, -2]


def test_fixed_from_rational():
    assert fixed_from_rational(1, 3, 4).mantissa == 5  # 16/3 = 5.33
    assert fixed_from_rational(1, 2, 0).mantissa == 0  # tie to even
    assert Fixed.from_fraction(Fraction(-3, 4), 8).to_fraction() == Fraction(-3, 4)
    with pytest.raises(ZeroDivisionError):
        fixed_from_rational(1, 0, 8)


def test_fixed_arithmetic():
    B = 20
    a = Fixed.from_fraction(Fraction(3, 2), B)
    b = Fixed.from_fraction(Fraction(1, 4), B)
    assert (a + b).to_fraction() == Fraction(7, 4)
    assert (a - b).to_fraction() == Fraction(5, 4)
    assert (a * b).to_fraction() == Fraction(3, 8)
    assert (a * 3).to_fraction() == Fraction(9, 2)
    assert (-a).to_fraction() == Fraction(-3, 2)
    assert abs(-a) == a
    assert a.div_int(3).to_fraction() == Fraction(1, 2)
    with pytest.raises(ValueError):
        a + Fixed(1, B + 1)


def test_to_decimal_is_exact():
    x = Fixed(-5, 3)
    assert x.to_decimal() == "-0.625"
    assert Fixed(8, 3).to_decimal() == "1"
    assert Fraction(Fixed(12345, 20).to_decimal()) == Fraction(12345, 1 << 20)


def test_complex_mul_and_reciprocal():
    B = 60
    z = ComplexFixed(Fixed.from_fraction(Fraction(3, 5), B), Fixed.from_fraction(Fraction(-4, 5), B))
    w = z * z.reciprocal()
    assert abs(complex(w) - 1) < 2**-55
    assert abs(complex(z.conj()) - complex(0.6, 0.8)) < 1e-15


def test_pi_mantissa():
    assert abs(Fraction(pi_mantissa(200), 1 << 200) - Fraction("3.14159265358979323846264338327950288419716939937510")) < Fraction(1, 10**49)


@pytest.mark.parametrize("N", [1, 2, 8, 12, 64, 1024])
def test_roots_of_unity_against_cmath(N):
    B = 52
    wr, wi = roots_of_unity_table(N, B)
    for j in range(N):
        z = cmath.exp(2j * cmath.pi * j / N)
        assert abs(wr[j] / 2**B - z.real) < 1e-15
        assert abs(wi[j] / 2**B - z.imag) < 1e-15
        single = root_of_unity(j, N, B)
        assert (single.re.mantissa, single.im.mantissa) == (wr[j], wi[j])


def _random_vector(N, B, seed):
    rng = random.Random(seed)
    return [ComplexFixed.from_mantissas(rng.randint(-(1 << B), 1 << B), rng.randint(-(1 << B), 1 << B), B) for _ in range(N)]


@pytest.mark.parametrize("N", [16, 64])
def test_fft_matches_direct_dft_within_bound(N):
    B = 80
    v = _random_vector(N, B, N)
    bound = fft_error_bound(N, B, max_modulus(v), "forward")
    for a, b in zip(fft(v), dft_direct(v)):
        assert abs(a.re.to_fraction() - b.re.to_fraction()) <= bound
        assert abs(a.im.to_fraction() - b.im.to_fraction()) <= bound


@pytest.mark.parametrize("N", [16, 64])
def test_fft_round_trip(N):
    B = 80
    v = _random_vector(N, B, 7 * N)
    X = fft(v)
    back = fft(X, "inverse")
    bound = fft_error_bound(N, B, max_modulus(X), "inverse") + fft_error_bound(N, B, max_modulus(v), "forward") / N
    for a, b in zip(back, v):
        assert abs(a.re.to_fraction() - b.re.to_fraction()) <= bound
        assert abs(a.im.to_fraction() - b.im.to_fraction()) <= bound


def test_fft_against_numpy_float():
    N, B = 64, 60
    v = _random_vector(N, B, 3)
    ref = np.fft.fft(np.array([complex(z) for z in v]))
    got = np.array([complex(z) for z in fft(v)])
    assert np.max(np.abs(ref - got)) < 1e-12


def test_fft_is_deterministic():
    v = _random_vector(64, 90, 11)
    a = [(z.re.mantissa, z.im.mantissa) for z in fft(v)]
    b = [(z.re.mantissa, z.im.mantissa) for z in fft(list(v))]
    assert a == b


def test_fft_rejects_non_power_of_two():
    with pytest.raises(LengthNotPowerOfTwo):
        fft(_random_vector(12, 20, 0))
    with pytest.raises(ValueError):
        fft(_random_vector(4, 20, 0), "sideways")
