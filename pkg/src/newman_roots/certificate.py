"""Certificate JSON: deterministic serialisation and self-contained re-verification.

All rationals are written as "p/q" strings. The small diagnostic magnitudes
(Q_n values, margins) are rendered as 20-significant-digit decimals, which is
enough to expose any change of a single coefficient because such a change moves
Q_n(x_j) by a relative amount of order 1/n. A SHA-256 digest over the canonical
encoding of the body guards the file as a whole.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .bounds import upper_bound
from .coeff_model import format_rational, make_model, parse_rational
from .errors import CertificateError, NewmanError
from .params import BuildParameters, target_points
from .verify import (
    PolynomialCertificate,
    _sign,
    brackets_disjoint,
    check_q_smallness,
    format_mag,
    homogeneous_value,
    integer_coefficients,
    assemble_polynomial,
)

FORMAT = "newman-roots-certificate/1"
MAG_DIGITS = 20
KNOWN_FIELDS = frozenset({
    "format", "family", "r", "params", "coefficients", "targets", "interval", "q_threshold",
    "q_margins", "q_smallness_passed", "brackets", "root_count", "upper_bound", "diagnostics",
})


def _digest(body: dict) -> str:
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def q_margin_records(cert: PolynomialCertificate) -> list[dict]:
    return [
        {
            "j": m.j,
            "value": format_mag(m.value, MAG_DIGITS),
            "radius": format_mag(m.radius, 6),
            "margin": format_mag(m.margin, MAG_DIGITS),
            "tail_bound": format_mag(m.tail_bound, 6),
            "passed": m.passed,
        }
        for m in cert.q_values
    ]


def certificate_body(
    model_json: dict,
    params: BuildParameters,
    cert: PolynomialCertificate,
    diagnostics: dict | None = None,
) -> dict:
    return {
        "format": FORMAT,
        "family": model_json,
        "r": params.r,
        "params": params.to_json(),
        "coefficients": [format_rational(c) for c in cert.coefficients],
        "targets": [format_rational(x) for x in cert.targets.points],
        "interval": [format_rational(x) for x in cert.interval],
        "q_threshold": format_mag(cert.q_threshold, MAG_DIGITS),
        "q_margins": q_margin_records(cert),
        "q_smallness_passed": all(m.passed for m in cert.q_values),
        "brackets": [[format_rational(a), format_rational(b)] for a, b in cert.brackets],
        "root_count": cert.root_count,
        "upper_bound": upper_bound(cert.degree, params.A),
        "diagnostics": diagnostics or {},
    }


def dumps(body: dict) -> str:
    out = dict(body)
    out["digest"] = _digest(body)
    return json.dumps(out, indent=1) + "\n"


def write_certificate(body: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(body))


def _require(data: dict, key: str, kind):
    if key not in data:
        raise CertificateError(f"missing field {key!r}")
    if not isinstance(data[key], kind):
        raise CertificateError(f"field {key!r} has the wrong type")
    return data[key]


def _rational(s: Any, what: str) -> Fraction:
    if not isinstance(s, str):
        raise CertificateError(f"{what} must be a rational string")
    try:
        return parse_rational(s)
    except NewmanError as exc:
        raise CertificateError(f"bad rational in {what}: {s!r}") from exc


def verify_certificate(text: str) -> dict:
    """Re-check a certificate from its text alone; returns a summary or raises CertificateError.

    Checks: digest (required once the format tag is present, so that a
    minimal hand-written certificate stays checkable); coefficient membership and constant term; exact signs at every
    bracket endpoint; brackets inside I(alpha) with disjoint interiors; root_count;
    targets, q margins and threshold recomputed from the echoed parameters; the
    damping upper bound.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CertificateError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CertificateError("certificate must be a JSON object")
    digest = data.pop("digest", None)
    unknown = set(data) - KNOWN_FIELDS
    if unknown:
        raise CertificateError(f"unknown fields {sorted(unknown)}")
    if "format" in data:
        if data["format"] != FORMAT:
            raise CertificateError(f"unsupported format {data['format']!r}")
        if digest is None:
            raise CertificateError("missing digest")
    if digest is not None and digest != _digest(data):
        raise CertificateError("digest mismatch")
    r = _require(data, "r", int)
    coeffs = [_rational(c, "coefficients") for c in _require(data, "coefficients", list)]
    if not coeffs or coeffs[0] != 1:
        raise CertificateError("constant coefficient must be 1")
    if "family" in data:
        fam = data["family"]
        try:
            model = make_model(fam["sets"], name=fam.get("name", "custom"), bound_A=fam.get("A"),
                               balance_M=fam.get("M"), balance_a=fam.get("a"))
            assemble_polynomial(model, coeffs[1:])
        except NewmanError as exc:
            raise CertificateError(f"family check failed: {exc}") from exc
        except (KeyError, TypeError) as exc:
            raise CertificateError("malformed family") from exc
    brackets_raw = _require(data, "brackets", list)
    brackets = []
    for b in brackets_raw:
        if not isinstance(b, list) or len(b) != 2:
            raise CertificateError("bracket must be a pair")
        lo, hi = _rational(b[0], "bracket"), _rational(b[1], "bracket")
        if hi < lo:
            raise CertificateError("bracket endpoints out of order")
        brackets.append((lo, hi))
    root_count = _require(data, "root_count", int)
    if root_count != len(brackets):
        raise CertificateError("root_count does not match the number of brackets")
    if root_count < r:
        raise CertificateError(f"root_count {root_count} < r = {r}")
    if not brackets_disjoint(brackets):
        raise CertificateError("brackets overlap")
    ints = integer_coefficients(coeffs)
    for lo, hi in brackets:
        slo = _sign(homogeneous_value(ints, lo.numerator, lo.denominator))
        if lo == hi:
            if slo != 0:
                raise CertificateError(f"claimed exact root {lo} is not a root")
            continue
        shi = _sign(homogeneous_value(ints, hi.numerator, hi.denominator))
        if slo * shi >= 0:
            raise CertificateError(f"no sign change on [{lo}, {hi}]")
    summary = {"root_count": root_count, "r": r, "degree": len(coeffs) - 1}
    if "params" in data:
        try:
            params = BuildParameters.from_json(_require(data, "params", dict))
            tp = target_points(params)
        except (NewmanError, TypeError, ValueError) as exc:
            raise CertificateError(f"bad params: {exc}") from exc
        if params.r != r or params.n != len(coeffs) - 1:
            raise CertificateError("params do not match r or the degree")
        if [format_rational(x) for x in tp.points] != data.get("targets"):
            raise CertificateError("targets do not match params")
        lo, hi = tp.points[0], tp.points[-1]
        if data.get("interval") != [format_rational(lo), format_rational(hi)]:
            raise CertificateError("interval does not match params")
        if any(a < lo or b > hi for a, b in brackets):
            raise CertificateError("bracket outside I(alpha)")
        cert = check_q_smallness(PolynomialCertificate(tuple(coeffs)), params, tp, enforce=False)
        if data.get("q_threshold") != format_mag(cert.q_threshold, MAG_DIGITS):
            raise CertificateError("q_threshold mismatch")
        if data.get("q_margins") != q_margin_records(cert):
            raise CertificateError("q margins do not match recomputation")
        passed = all(m.passed for m in cert.q_values)
        if data.get("q_smallness_passed") != passed:
            raise CertificateError("q_smallness_passed flag mismatch")
        ub = upper_bound(len(coeffs) - 1, params.A)
        if data.get("upper_bound") != ub or root_count > ub:
            raise CertificateError("upper bound inconsistent")
        summary["q_smallness_passed"] = passed
    return summary
