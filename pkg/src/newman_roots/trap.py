"""Controlled dynamics of psi and the lambda ledger in fixed point.

The state after m steps is (psi_m, lambda_{m,1..}) with

    psi_{m+1}       = rho_m (psi_m + nu_0 psi_m + mu lambda_{m,1}) + eps_{m+1}
    lambda_{m+1,k}  = rho_m (mu lambda_{m,k+1} + psi_m nu_k),      rho_m = (L+m+1)/(L+m),

where eps_{m+1} is the smallest element of E_{m+1} when the predictor
rho_m (psi_m + nu_0 psi_m + mu lambda_{m,1}) is >= 0 and the largest otherwise.
Every assignment is one exact integer numerator followed by a single
round-half-to-even division, so a run is bit-reproducible.

Only lambda_{m,k} with k <= n - m can still influence psi_n, and lambda_{m,k} = 0
for k beyond the support of nu, so the update touches min(n - m - 1, support)
entries per step.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .coeff_model import CoefficientModel
from .errors import TrapEscape
from .newman import NewmanDecomposition
from .numeric import Fixed, floor_mantissa, round_div
from .params import BuildParameters

TRACE_WINDOW_FACTOR = 4


@dataclass
class TrapState:
    step: int
    psi: Fixed
    lam: np.ndarray  # object array of mantissas, lam[k] = lambda_k for k = 1..n (lam[0] and lam[n+1] stay 0)
    eps_history: list[Fraction]
    psi_bound: Fixed  # mu * Lambda rounded down, so |psi| <= psi_bound is exact
    escape_flag: bool = False
    lambda_violations: int = 0
    max_drift: int = 0  # largest |p_m - psi_m| seen, as a mantissa

    @property
    def precision_bits(self) -> int:
        return self.psi.frac_bits

    def lambda_fixed(self, k: int) -> Fixed:
        return Fixed(int(self.lam[k]), self.precision_bits)


@dataclass
class TrapResult:
    eps: list[Fraction]
    psi: list[int]  # mantissas of psi_0..psi_n
    precision_bits: int
    psi_bound: Fixed
    trace: list[tuple]
    lambda_violations: int
    return_violations: int
    max_drift: Fixed
    drift_bound: Fraction
    max_lambda1: Fixed = field(default_factory=lambda: Fixed(0, 0))

    @property
    def max_psi(self) -> Fixed:
        return Fixed(max(abs(p) for p in self.psi), self.precision_bits)

    def summary(self) -> dict:
        return {
            "max_psi": float(self.max_psi),
            "psi_bound": float(self.psi_bound),
            "lambda_violations": self.lambda_violations,
            "return_violations": self.return_violations,
            "max_drift": float(self.max_drift),
            "drift_bound": float(self.drift_bound),
        }


def init_state(params: BuildParameters) -> TrapState:
    B = params.precision_bits
    return TrapState(
        step=0,
        psi=Fixed.one(B),
        lam=np.zeros(params.n + 2, dtype=object),
        eps_history=[],
        psi_bound=Fixed(floor_mantissa(params.mu * params.Lambda, B), B),
    )


def lambda_bounds(dec: NewmanDecomposition, params: BuildParameters) -> np.ndarray:
    """Mantissas floor((delta + Lambda U_k) 2^B), k = 0..n+1."""
    B = dec.precision_bits
    return np.array(
        [floor_mantissa(params.delta + params.Lambda * Fraction(u, 1 << B), B) for u in dec.U],
        dtype=object,
    )


def drift_bound(dec: NewmanDecomposition, params: BuildParameters) -> Fraction:
    """|Delta_m| <= mu Lambda / L + ((L+1)/L) (|nu_0| mu Lambda + mu (delta + Lambda U_1)) + slack.

    Follows from the triangle inequality on the predictor given the trap bounds;
    when sum |nu_k| < delta it reduces to roughly (1/L + delta) Lambda.
    """
    B = dec.precision_bits
    L, mu, Lam = params.L, params.mu, params.Lambda
    nu0 = Fraction(abs(dec.nu[0]), 1 << B)
    U1 = Fraction(dec.U[1], 1 << B) if len(dec.U) > 1 else Fraction(0)
    rho = Fraction(L + 1, L)
    return mu * Lam / L + rho * (nu0 * mu * Lam + mu * (params.delta + Lam * U1)) + Fraction(4, 1 << B)


def _predictor_numerator(state: TrapState, dec: NewmanDecomposition, params: BuildParameters) -> tuple[int, int]:
    """(X, D) with p = X / D exactly, p = rho_m (psi + nu_0 psi + mu lambda_1) in units of 2^-B."""
    B, m, L = state.precision_bits, state.step, params.L
    mn, md = params.mu.numerator, params.mu.denominator
    psi = state.psi.mantissa
    X = md * psi * (1 << B) + md * psi * dec.nu[0] + mn * int(state.lam[1]) * (1 << B)
    return (L + m + 1) * X, (L + m) * md * (1 << B)


def choose_control(state: TrapState, model: CoefficientModel, dec: NewmanDecomposition, params: BuildParameters) -> Fraction:
    """min E_{m+1} when the rounded predictor is >= 0, max E_{m+1} otherwise."""
    X, D = _predictor_numerator(state, dec, params)
    p = round_div(X, D)
    k = state.step + 1
    return model.min_at(k) if p >= 0 else model.max_at(k)


class _Kernel:
    """Precomputed arrays for the vectorised lambda update."""

    def __init__(self, dec: NewmanDecomposition, params: BuildParameters):
        self.B = dec.precision_bits
        self.n = params.n
        self.L = params.L
        self.mn, self.md = params.mu.numerator, params.mu.denominator
        self.nu = np.array(dec.nu, dtype=object)
        self.nu0 = dec.nu[0]
        self.support = max(dec.support, 0)
        self.bounds = lambda_bounds(dec, params)
        self.mask = (1 << (self.B + 1)) - 1

    def step(self, state: TrapState, eps: Fraction) -> None:
        B, L, m = self.B, self.L, state.step
        md, mn = self.md, self.mn
        one = 1 << B
        psi = state.psi.mantissa
        lam = state.lam
        # psi: one rounding of rho (psi + nu_0 psi + mu lambda_1) + eps
        X = (L + m + 1) * (md * psi * one + md * psi * self.nu0 + mn * int(lam[1]) * one)
        D = (L + m) * md * one
        p = round_div(X, D)
        state.max_drift = max(state.max_drift, abs(p - psi))
        en, ed = eps.numerator, eps.denominator
        new_psi = round_div(X * ed + en * D * one, D * ed)
        # lambda_k, k = 1..K: one rounding of rho (mu lambda_{k+1} + psi nu_k)
        K = min(self.n - m - 1, self.support)
        if K > 0:
            d = (L + m) * md
            # t = 2 * numerator + denominator; floor(t / 2D) is the half-up quotient
            c1 = 2 * (L + m + 1) * mn * one
            c2 = 2 * (L + m + 1) * md * psi
            t = lam[2 : K + 2] * c1 + self.nu[1 : K + 1] * c2 + d * one
            q = (t >> (B + 1)) // d
            low = (t & self.mask) == 0
            if low.any():
                idx = np.nonzero(low)[0]
                for i in idx:
                    ti = int(t[i])
                    if (ti >> (B + 1)) % d == 0 and int(q[i]) & 1:
                        q[i] -= 1
            lam[1 : K + 1] = q
            bnd = self.bounds[1 : K + 1]
            over = (q > bnd) | (q < -bnd)
            if over.any():
                state.lambda_violations += int(np.count_nonzero(over))
        stale = min(self.n - m, self.support) + 1
        if K < 0:
            K = 0
        if stale > K:
            lam[K + 1 : stale + 1] = 0
        state.psi = Fixed(new_psi, B)
        state.step = m + 1
        state.eps_history.append(eps)
        if abs(new_psi) > state.psi_bound.mantissa:
            state.escape_flag = True


def step(state: TrapState, eps: Fraction, dec: NewmanDecomposition, params: BuildParameters) -> TrapState:
    """Apply one step in place and return the state."""
    if state.escape_flag:
        raise ValueError("cannot step an escaped state")
    if state.step >= params.n:
        raise ValueError("all n steps already taken")
    _Kernel(dec, params).step(state, Fraction(eps))
    return state


def return_violations(psi: list[int], Psi: Fraction, M: int, B: int) -> int:
    """Number of steps m with |psi_m| <= Psi whose next M steps all have |psi| > Psi."""
    lim = floor_mantissa(Psi, B)
    inside = [abs(p) <= lim for p in psi]
    count = 0
    last = len(psi) - 1
    for m, ok in enumerate(inside):
        if ok and m + M <= last and not any(inside[m + 1 : m + M + 1]):
            count += 1
    return count


def run(
    params: BuildParameters,
    dec: NewmanDecomposition,
    model: CoefficientModel,
    *,
    full_trace: bool = False,
    trace_stride: int = 1,
) -> TrapResult:
    """n steps of choose_control + step; raises TrapEscape on leaving |psi| <= mu Lambda."""
    state = init_state(params)
    kernel = _Kernel(dec, params)
    B = params.precision_bits
    window = None if full_trace else TRACE_WINDOW_FACTOR * model.balance_M
    trace: deque = deque(maxlen=window)
    psi_hist = [state.psi.mantissa]
    max_l1 = 0
    for m in range(params.n):
        eps = choose_control(state, model, dec, params)
        kernel.step(state, eps)
        psi_hist.append(state.psi.mantissa)
        l1 = abs(int(state.lam[1]))
        max_l1 = max(max_l1, l1)
        if (m + 1) % trace_stride == 0 or state.escape_flag:
            trace.append((m + 1, state.psi, Fixed(l1, B), eps))
        if state.escape_flag:
            raise TrapEscape(m + 1, list(trace))
    rv = return_violations(psi_hist, params.Psi, model.balance_M, B)
    if rv:
        raise TrapEscape(params.n, list(trace))
    return TrapResult(
        eps=state.eps_history,
        psi=psi_hist,
        precision_bits=B,
        psi_bound=state.psi_bound,
        trace=list(trace),
        lambda_violations=state.lambda_violations,
        return_violations=rv,
        max_drift=Fixed(state.max_drift, B),
        drift_bound=drift_bound(dec, params),
        max_lambda1=Fixed(max_l1, B),
    )


def write_trace_csv(trace: list[tuple], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "psi", "lambda1", "eps"])
        for m, psi, l1, eps in trace:
            w.writerow([m, repr(float(psi)), repr(float(l1)), str(eps)])
