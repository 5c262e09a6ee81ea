"""Acceptance criteria, each run at its stated tolerance.

Every test appends one PASS/FAIL line through ``acceptance_report``; the lines
are repeated in the pytest terminal summary. The end-to-end runs are built once
per module and shared by the criteria that inspect them.
"""

import json
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from newman_roots import trap
from newman_roots.bounds import build_damping, decay_check
from newman_roots.certificate import write_certificate
from newman_roots.cli import RunConfig, construct, main
from newman_roots.coeff_model import builtin_model
from newman_roots.newman import compute_decomposition, decomposition_residuals, residual_threshold
from newman_roots.numeric import ComplexFixed, dft_direct, fft, fft_error_bound, max_modulus, round_div_array
from newman_roots.params import select_parameters, target_points
from newman_roots.verify import brackets_disjoint, homogeneous_value_horner, integer_coefficients

pytestmark = pytest.mark.slow

FAMILIES = ("littlewood", "newman")
ROOTS = (2, 4, 6, 8)
TIME_LIMIT = 600.0
SLOPE_RANGE = (3.5, 5.5)


class Run:
    def __init__(self, family, r, result, seconds, path):
        self.family, self.r, self.result, self.seconds, self.path = family, r, result, seconds, path
        self.exit_code = 0 if result.certificate.root_count >= r else 5

    @property
    def label(self):
        return f"{self.family}/r={self.r}"


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    done = {}
    for family in FAMILIES:
        for r in ROOTS:
            start = time.perf_counter()
            result = construct(RunConfig(family=family, r=r))
            seconds = time.perf_counter() - start
            path = out / f"{family}_{r}.json"
            write_certificate(result.body, path)
            done[family, r] = Run(family, r, result, seconds, path)
    return done


def _exact_sign(ints, x):
    v = homogeneous_value_horner(ints, x.numerator, x.denominator)
    return (v > 0) - (v < 0)


def test_criterion_1_end_to_end(runs, acceptance_report):
    problems = []
    ratios = []
    for run in runs.values():
        p, cert = run.result.params, run.result.certificate
        lo, hi = cert.interval
        ints = integer_coefficients(cert.coefficients)
        if run.exit_code != 0 or cert.root_count < run.r:
            problems.append(f"{run.label} found {cert.root_count}")
        if not brackets_disjoint(cert.brackets):
            problems.append(f"{run.label} overlapping brackets")
        for a, b in cert.brackets:
            if not lo <= a <= b <= hi:
                problems.append(f"{run.label} bracket outside I(alpha)")
            sa, sb = _exact_sign(ints, a), _exact_sign(ints, b)
            if not ((a == b and sa == 0) or sa * sb < 0):
                problems.append(f"{run.label} bracket without sign change")
        if run.seconds > TIME_LIMIT:
            problems.append(f"{run.label} took {run.seconds:.0f}s")
        ratios.append(Fraction(p.n, run.r**2))
    c_obs = max(ratios)
    problems += [f"n > C_obs r^2 for {run.label}" for run in runs.values() if run.result.params.n > c_obs * run.r**2]
    times = ", ".join(f"{run.label} {run.seconds:.1f}s" for run in runs.values())
    ok = acceptance_report(
        "criterion 1 (end-to-end construction)",
        not problems,
        f"C_obs = {c_obs} (n/r^2 over all runs: {sorted(set(map(str, ratios)))}); {times}" + ("; " + "; ".join(problems) if problems else ""),
    )
    assert ok, problems


def test_criterion_2_decomposition(runs, acceptance_report):
    residual_ok, sums = True, []
    for run in runs.values():
        dec = run.result.decomposition
        tp = target_points(run.result.params)
        worst = max(decomposition_residuals(dec, tp))
        residual_ok &= worst <= residual_threshold(dec)
        sums.append((run.label, float(dec.sum_bound), float(run.result.params.delta)))
    sum_ok = all(s < d for _, s, d in sums)

    # s = 1 toy instance: FFT path against direct summation
    base = select_parameters(builtin_model("littlewood"), 1)
    toy = replace(base, s=1, alpha=Fraction(1, 16), mu=Fraction(7, 8), ell=32, n=48, fft_size=1024, precision_bits=64)
    pts = [Fraction(97, 100)]
    a = compute_decomposition(toy, pts)
    b = compute_decomposition(toy, pts, direct=True)
    toy_gap = max(abs(x - y) for x, y in zip(a.nu, b.nu))
    toy_ok = toy_gap <= 1 << 6

    worst_sum = max(sums, key=lambda t: t[1] / t[2])
    ok = acceptance_report(
        "criterion 2 (decomposition identity)",
        residual_ok and sum_ok and toy_ok,
        f"residual <= tail budget: {residual_ok}; sum|nu| < delta: {sum_ok} "
        f"(worst {worst_sum[0]}: {worst_sum[1]:.4g} vs delta {worst_sum[2]:.4g}); "
        f"toy FFT vs direct: {toy_gap} ulp <= 64: {toy_ok}",
    )
    assert ok


def test_criterion_3_trap_invariants(runs, acceptance_report):
    psi_bad = lam_bad = ret_bad = 0
    steps = 0
    for run in runs.values():
        p, res = run.result.params, run.result.trap
        B = res.precision_bits
        cap = p.mu * p.Lambda
        psi_bad += sum(1 for m in res.psi if Fraction(abs(m), 1 << B) > cap)
        lam_bad += res.lambda_violations
        ret_bad += trap.return_violations(res.psi, p.Psi, builtin_model(run.family).balance_M, B)
        steps += len(res.psi)
    ok = acceptance_report(
        "criterion 3 (trap invariants)",
        psi_bad == lam_bad == ret_bad == 0,
        f"{steps} steps checked; |psi| > mu Lambda: {psi_bad}; lambda bound violations: {lam_bad}; "
        f"window-return violations: {ret_bad}",
    )
    assert ok


def test_criterion_4_smallness(runs, acceptance_report):
    threshold_fail = tail_fail = 0
    worst_ratio = None
    count = 0
    for run in runs.values():
        p, cert = run.result.params, run.result.certificate
        with mpmath.workdps(50):
            tail = mpmath.mpf(p.A.numerator) / p.A.denominator * mpmath.exp(-p.n * mpmath.mpf(p.alpha.numerator) / p.alpha.denominator)
            tail /= mpmath.mpf(p.alpha.numerator) / p.alpha.denominator * (p.L + p.n)
            for q in cert.q_values:
                count += 1
                if not q.value + q.radius < q.threshold:
                    threshold_fail += 1
                measured = mpmath.mpf(q.value.numerator) / q.value.denominator - mpmath.mpf(q.radius.numerator) / q.radius.denominator
                if not measured < tail:
                    tail_fail += 1
                ratio = (q.value + q.radius) / q.threshold
                if worst_ratio is None or ratio > worst_ratio[1]:
                    worst_ratio = (run.label, ratio)
    log_gap = math.log10(worst_ratio[1].numerator) - math.log10(worst_ratio[1].denominator)
    ok = acceptance_report(
        "criterion 4 (smallness chain)",
        threshold_fail == 0 and tail_fail == 0,
        f"{count} target points; |Q|+radius < alpha e^(-2 beta)/(2(s-1)) fails at {threshold_fail} "
        f"(worst {worst_ratio[0]}: above threshold by 10^{log_gap:.0f}); "
        f"measured |Q| - slack exceeds the analytic tail bound at {tail_fail}",
    )
    assert ok


def test_criterion_5_upper_bound(runs, acceptance_report):
    over = [run.label for run in runs.values()
            if run.result.certificate.root_count > build_damping(run.result.params.n, run.result.params.A).m]
    vs = {}
    for n in (16, 64, 256):
        d = build_damping(n, 1)
        vs[n] = (d.v, d.exact_sum and d.sum_check < 1)
    v_ok = all(v == 4 and exact for v, exact in vs.values())
    decay_ok = all(decay_check(n) for n in range(1, 257))
    ok = acceptance_report(
        "criterion 5 (upper-bound consistency)",
        not over and v_ok and decay_ok,
        f"root_count <= v ceil(sqrt n) for all runs: {not over}; v(1) = 4 with exact sum < 1 at n=16,64,256: {v_ok}; "
        f"|q_1(k)| <= 1/(2 sqrt k) for n <= 256: {decay_ok}",
    )
    assert ok


def _vector(N, B, seed):
    rng = random.Random(seed)
    return [ComplexFixed.from_mantissas(rng.randint(-(1 << B), 1 << B), rng.randint(-(1 << B), 1 << B), B) for _ in range(N)]


def _mantissas(vec):
    return [(z.re.mantissa, z.im.mantissa) for z in vec]


def test_criterion_6_numeric_kernel(acceptance_report):
    B = 96
    dft_ok = trip_ok = True
    for N in (16, 64):
        for seed in range(3):
            v = _vector(N, B, 1000 * N + seed)
            X = fft(v)
            bound = fft_error_bound(N, B, max_modulus(v), "forward")
            for a, b in zip(X, dft_direct(v)):
                dft_ok &= abs(a.re.to_fraction() - b.re.to_fraction()) <= bound
                dft_ok &= abs(a.im.to_fraction() - b.im.to_fraction()) <= bound
            back = fft(X, "inverse")
            tb = fft_error_bound(N, B, max_modulus(X), "inverse") + bound / N
            for a, b in zip(back, v):
                trip_ok &= abs(a.re.to_fraction() - b.re.to_fraction()) <= tb
                trip_ok &= abs(a.im.to_fraction() - b.im.to_fraction()) <= tb

    inputs = [_vector(N, B, 7 + N) for N in (16, 64, 256)]

    def kernels(v):
        arr = np.array([z.re.mantissa for z in v], dtype=object)
        return _mantissas(fft(v)), _mantissas(fft(v, "inverse")), list(round_div_array(arr, 12345))

    serial = [kernels(v) for v in inputs]
    repeat = [kernels(v) for v in inputs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(pool.map(kernels, inputs))
    identical = serial == repeat == threaded
    ok = acceptance_report(
        "criterion 6 (numeric kernel)",
        dft_ok and trip_ok and identical,
        f"FFT vs direct DFT within bound (N=16,64): {dft_ok}; forward/inverse within bound: {trip_ok}; "
        f"bit-identical across runs and 1 vs 4 threads: {identical}",
    )
    assert ok


def test_criterion_7_determinism_and_round_trip(runs, tmp_path, acceptance_report):
    same = True
    for family in FAMILIES:
        paths = [tmp_path / f"{family}_{i}.json" for i in range(2)]
        for path in paths:
            same &= main(["construct", "--family", family, "--roots", "2", "--out", str(path)]) == 0
        same &= paths[0].read_bytes() == paths[1].read_bytes() == runs[family, 2].path.read_bytes()

    accepted = all(main(["verify", str(run.path)]) == 0 for run in runs.values())

    raw = runs["littlewood", 2].path.read_bytes()
    rng = random.Random(20261016)
    positions = rng.sample(range(len(raw) * 8), 300)
    # always include the first coefficient sign, a bracket digit and the digest key
    text = raw.decode()
    for needle in ('"-1"', '"brackets"', '"digest"'):
        at = text.find(needle, text.find('"coefficients"') if needle == '"-1"' else 0)
        positions.append(8 * (at + 1 + (len(needle) - 2 if needle == '"brackets"' else 0)))
    first_bracket = text.find("/", text.find('"brackets"'))
    positions.append(8 * (first_bracket - 1))
    tampered = tmp_path / "tampered.json"
    missed = []
    for bit in positions:
        flipped = bytearray(raw)
        flipped[bit // 8] ^= 1 << (bit % 8)
        tampered.write_bytes(bytes(flipped))
        if main(["verify", str(tampered)]) == 0:
            missed.append(bit)
    ok = acceptance_report(
        "criterion 7 (determinism and round-trip)",
        same and accepted and not missed,
        f"byte-identical certificates (CLI twice and API, both families): {same}; "
        f"verify accepts all {len(runs)} certificates: {accepted}; "
        f"single-bit flips rejected: {len(positions) - len(missed)}/{len(positions)}",
    )
    assert ok


def test_runtime_scaling_note(runs, acceptance_report):
    slopes = {}
    xs = [math.log(r) for r in (2, 4, 8)]
    for family in FAMILIES:
        ys = [math.log(runs[family, r].seconds) for r in (2, 4, 8)]
        slopes[family] = float(np.polyfit(xs, ys, 1)[0])
    lo, hi = SLOPE_RANGE
    ok = acceptance_report(
        "note (runtime scaling)",
        all(lo <= s <= hi for s in slopes.values()),
        "log-log slope of runtime vs r over r=2,4,8: "
        + ", ".join(f"{f} {s:.2f}" for f, s in slopes.items())
        + f" (target [{lo}, {hi}])",
    )
    assert ok
