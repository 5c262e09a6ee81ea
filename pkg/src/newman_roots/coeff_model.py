"""Admissible-coefficient families E_1, E_2, ... given by one period of finite sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BoundViolated, NotBalanceable, NotBalanced, ValidationError


def parse_rational(value) -> Fraction:
    """Accept ints, "p/q" / "p" strings and Fractions; floats are rejected (inexact)."""
    if isinstance(value, bool) or isinstance(value, float):
        raise ValidationError(f"rational expected, got {value!r}")
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"cannot parse rational {value!r}") from exc


def format_rational(x: Fraction) -> str:
    return str(Fraction(x))


@dataclass(frozen=True)
class CoefficientModel:
    """Periodic family: E_k = sets[(k - 1) % period] for k >= 1."""

    period: int
    sets: tuple[tuple[Fraction, ...], ...]
    bound_A: Fraction
    balance_M: int
    balance_a: Fraction
    name: str = field(default="custom", compare=False)

    def coefficient_set(self, k: int) -> tuple[Fraction, ...]:
        return self.sets[(k - 1) % self.period]

    def min_at(self, k: int) -> Fraction:
        return self.coefficient_set(k)[0]

    def max_at(self, k: int) -> Fraction:
        return self.coefficient_set(k)[-1]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "period": self.period,
            "sets": [[format_rational(e) for e in s] for s in self.sets],
            "A": format_rational(self.bound_A),
            "M": self.balance_M,
            "a": format_rational(self.balance_a),
        }


def _normalize_sets(period: int, sets: Iterable[Iterable]) -> tuple[tuple[Fraction, ...], ...]:
    out = tuple(tuple(sorted({parse_rational(e) for e in s})) for s in sets)
    if period < 1 or len(out) != period:
        raise ValidationError(f"expected {period} sets, got {len(out)}")
    for k, s in enumerate(out, start=1):
        if not s:
            raise ValidationError(f"E_{k} is empty")
    return out


def _window_sums(sets: Sequence[Sequence[Fraction]], M: int) -> list[tuple[Fraction, Fraction]]:
    """(sum of minima, sum of maxima) over E_{t+1..t+M} for each offset t in one period."""
    p = len(sets)
    return [
        (sum(sets[(t + k) % p][0] for k in range(M)), sum(sets[(t + k) % p][-1] for k in range(M)))
        for t in range(p)
    ]


def balanced_parameters(period: int, sets: Sequence[Iterable]) -> tuple[int, Fraction]:
    """Smallest window length M <= 2*period that balances the family, with the largest a for it."""
    norm = _normalize_sets(period, sets)
    for M in range(1, 2 * period + 1):
        a = min(min(-lo, hi) for lo, hi in _window_sums(norm, M))
        if a > 0:
            return M, a
    raise NotBalanceable(
        "no window length balances this periodic family; polynomials from it have a bounded number of roots in [0, 1]"
    )


def validate_model(model: CoefficientModel) -> CoefficientModel:
    sets = model.sets
    if model.period < 1 or len(sets) != model.period:
        raise ValidationError("period does not match the number of sets")
    if model.balance_M < 1 or model.balance_a <= 0 or model.bound_A <= 0:
        raise ValidationError("M, a and A must be positive")
    for k, s in enumerate(sets, start=1):
        if not s:
            raise ValidationError(f"E_{k} is empty")
        if list(s) != sorted(set(s)):
            raise ValidationError(f"E_{k} must be sorted and duplicate-free")
        for e in s:
            if abs(e) > model.bound_A:
                raise BoundViolated(k, e)
    for t, (lo, hi) in enumerate(_window_sums(sets, model.balance_M)):
        if lo > -model.balance_a:
            raise NotBalanced(t, "min-sum")
        if hi < model.balance_a:
            raise NotBalanced(t, "max-sum")
    return model


def make_model(sets: Sequence[Iterable], name: str = "custom", bound_A=None, balance_M=None, balance_a=None) -> CoefficientModel:
    """Build and validate a model; unspecified A, M, a are derived from the sets."""
    period = len(sets)
    norm = _normalize_sets(period, sets)
    A = parse_rational(bound_A) if bound_A is not None else max(max(abs(s[0]), abs(s[-1])) for s in norm)
    if balance_M is None or balance_a is None:
        M, a = balanced_parameters(period, norm)
        balance_M = M if balance_M is None else balance_M
        balance_a = a if balance_a is None else balance_a
    model = CoefficientModel(period, norm, Fraction(A), int(balance_M), parse_rational(balance_a), name)
    return validate_model(model)


BUILTIN_FAMILIES = {
    "littlewood": [[-1, 1]],
    # E_k = {0, (-1)^k}
    "newman": [[-1, 0], [0, 1]],
    "height1": [[-1, 0, 1]],
}


def builtin_model(name: str) -> CoefficientModel:
    try:
        sets = BUILTIN_FAMILIES[name]
    except KeyError:
        raise ValidationError(f"unknown family {name!r}; choose from {sorted(BUILTIN_FAMILIES)}") from None
    return make_model(sets, name=name)


def load_model(path: str | Path) -> CoefficientModel:
    """Read {"period": int, "sets": [[rat, ...], ...]} with rationals as "p/q" strings."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(data, dict) or "sets" not in data:
        raise ValidationError("model file must be an object with a 'sets' list")
    sets = data["sets"]
    period = data.get("period", len(sets))
    if period != len(sets):
        raise ValidationError(f"period {period} does not match {len(sets)} sets")
    return make_model(
        sets,
        name=data.get("name", Path(path).stem),
        bound_A=data.get("A"),
        balance_M=data.get("M"),
        balance_a=data.get("a"),
    )
