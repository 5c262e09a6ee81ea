from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newman_roots import trap
from newman_roots.coeff_model import builtin_model
from newman_roots.errors import MembershipViolation, NotEnoughRoots, SmallnessFailed
from newman_roots.newman import compute_decomposition
from newman_roots.params import select_parameters, target_points
from newman_roots.verify import (
    PolynomialCertificate,
    assemble_polynomial,
    base_grid,
    brackets_disjoint,
    certify,
    check_q_smallness,
    count_sign_changes,
    evaluate_q,
    homogeneous_value,
    homogeneous_value_horner,
    integer_coefficients,
    recheck_brackets,
    sign_changes_detail,
)


def poly(*coeffs):
    return PolynomialCertificate(tuple(Fraction(c) for c in coeffs))


@pytest.fixture(scope="module")
def lw_run():
    model = builtin_model("littlewood")
    params = select_parameters(model, 2)
    tp = target_points(params)
    dec = compute_decomposition(params, tp)
    res = trap.run(params, dec, model)
    cert = check_q_smallness(assemble_polynomial(model, res.eps), params, tp)
    return model, params, tp, cert


def test_assemble_examples():
    lw, nw = builtin_model("littlewood"), builtin_model("newman")
    assert assemble_polynomial(lw, [-1, 1]).coefficients == (1, -1, 1)
    assert assemble_polynomial(nw, [-1, 1]).coefficients == (1, -1, 1)
    with pytest.raises(MembershipViolation) as exc:
        assemble_polynomial(lw, [2])
    assert exc.value.k == 1
    with pytest.raises(MembershipViolation):
        assemble_polynomial(nw, [1, 1])  # E_1 = {-1, 0}


def test_sign_change_examples():
    assert count_sign_changes(poly(1), [Fraction(0), Fraction(1, 2), Fraction(1)]) == 0
    assert count_sign_changes(poly(1, -1, -1), [0, 1]) == 1
    # (1 - x)(1 - x^2): no strict change, one exact zero at 1
    p = poly(1, -1, -1, 1)
    assert sign_changes_detail(p, [0, Fraction(1, 2), 1]) == (0, 1)
    assert count_sign_changes(p, [0, Fraction(1, 2), 1]) == 1
    with pytest.raises(ValueError):
        count_sign_changes(p, [1, 0])


@settings(max_examples=60)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=40), st.integers(-50, 50), st.integers(1, 60))
def test_homogeneous_evaluation_is_exact(coeffs, p, q):
    x = Fraction(p, q)
    exact = sum(Fraction(c) * x**k for k, c in enumerate(coeffs))
    n = len(coeffs) - 1
    assert homogeneous_value(coeffs, p, q) == exact * q**n
    assert homogeneous_value_horner(coeffs, p, q) == exact * q**n


def test_integer_coefficients_keep_signs():
    ints = integer_coefficients([Fraction(1), Fraction(-1, 2), Fraction(2, 3)])
    assert ints == [6, -3, 4]


def test_q_evaluation_radius():
    coeffs = [Fraction(1), Fraction(-1), Fraction(1), Fraction(-1)]
    L, x, bits = 10, Fraction(9, 10), 40
    v, rad = evaluate_q(coeffs, L, x, bits)
    exact = sum(c * x**k / (L + k) for k, c in enumerate(coeffs))
    assert abs(v - exact) <= rad == Fraction(5, 1 << 40)


def test_degree_zero_q_is_one_over_L(lw_run):
    _, params, tp, _ = lw_run
    cert = check_q_smallness(poly(1), params, tp)
    for m in cert.q_values:
        assert abs(m.value - Fraction(1, params.L)) <= m.radius
        assert not m.passed
    with pytest.raises(SmallnessFailed):
        check_q_smallness(poly(1), params, tp, enforce=True)


def test_q_threshold_is_a_lower_bound(lw_run):
    _, params, _, cert = lw_run
    with mpmath.workprec(64 + 4 * int(params.beta)):
        exact = mpmath.mpf(params.alpha.numerator) / params.alpha.denominator * mpmath.exp(
            -2 * mpmath.mpf(params.beta.numerator) / params.beta.denominator) / (2 * (params.s - 1))
        t = cert.q_threshold
        assert mpmath.mpf(t.numerator) / t.denominator <= exact


def test_q_values_below_analytic_tail(lw_run):
    _, _, _, cert = lw_run
    for m in cert.q_values:
        assert m.value - m.radius <= m.tail_bound


def test_certify_littlewood(lw_run):
    _, params, tp, cert = lw_run
    out = certify(cert, params)
    assert out.root_count >= params.r == 2
    assert out.root_count == len(out.brackets)
    lo, hi = tp.points[0], tp.points[-1]
    assert all(lo <= a <= b <= hi for a, b in out.brackets)
    assert brackets_disjoint(out.brackets)
    assert recheck_brackets(out)


def test_certify_on_base_grid_needs_no_refinement():
    # P alternates sign on a 3-point grid of I(alpha) for s = 2
    params = select_parameters(builtin_model("littlewood"), 1)
    tp = target_points(params)
    grid = base_grid(tp)
    assert len(grid) == 3
    mid = grid[1]
    # (x - a)(x - b) with a, b between grid points: + - + on the grid
    a, b = (grid[0] + mid) / 2, (mid + grid[2]) / 2
    coeffs = [a * b, -(a + b), Fraction(1)]
    coeffs = [c / coeffs[0] for c in coeffs]
    cert = PolynomialCertificate(tuple(coeffs), targets=tp)
    out = certify(cert, params)
    assert out.root_count == 2 and out.evaluations == 3


def test_certify_refines_by_bisection():
    params = select_parameters(builtin_model("littlewood"), 1)
    tp = target_points(params)
    lo = tp.points[0]
    step = (tp.points[1] - lo) / 2
    # two roots inside the first base interval
    a, b = lo + step / 4, lo + step / 2 + step / 8
    coeffs = [a * b, -(a + b), Fraction(1)]
    coeffs = [c / coeffs[0] for c in coeffs]
    out = certify(PolynomialCertificate(tuple(coeffs), targets=tp), params)
    assert out.root_count == 2 and out.evaluations > 3
    assert recheck_brackets(out)


def test_not_enough_roots():
    params = select_parameters(builtin_model("littlewood"), 2)
    tp = target_points(params)
    with pytest.raises(NotEnoughRoots) as exc:
        certify(PolynomialCertificate((Fraction(1),), targets=tp), params)
    assert exc.value.found == 0 and exc.value.r == 2
    out = certify(PolynomialCertificate((Fraction(1),), targets=tp), params, raise_on_failure=False)
    assert out.root_count == 0


def test_recheck_detects_bad_bracket():
    p = PolynomialCertificate((Fraction(1), Fraction(-1), Fraction(-1)), brackets=((Fraction(0), Fraction(1, 2)),), root_count=1)
    assert not recheck_brackets(p)


def test_brackets_disjoint():
    h = Fraction(1, 2)
    assert brackets_disjoint([(0, h), (h, 1)])
    assert not brackets_disjoint([(0, h), (Fraction(1, 4), 1)])
    assert not brackets_disjoint([(h, h), (h, 1)])
