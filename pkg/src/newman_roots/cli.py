"""Command-line front end: construct, verify, bound, decompose."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import trap, verify
from .bounds import build_damping
from .certificate import certificate_body, verify_certificate, write_certificate
from .coeff_model import BUILTIN_FAMILIES, CoefficientModel, builtin_model, load_model, parse_rational
from .errors import (
    CertificateError,
    DeltaExceeded,
    NewmanError,
    NotEnoughRoots,
    TrapEscape,
    ValidationError,
    VerificationError,
)
from .newman import NewmanDecomposition, compute_decomposition, verify_decomposition, write_decomposition_csv
from .params import BuildParameters, select_parameters, target_points, with_degree

log = logging.getLogger("newman_roots")

DEFAULT_RETRIES = 6
DEGREE_GROWTH = Fraction(3, 2)


@dataclass
class RunConfig:
    family: str | None = None
    model_path: str | None = None
    r: int = 2
    overrides: dict = field(default_factory=dict)
    out: str | None = None
    trace: str | None = None
    full_trace: bool = False
    retries: int = DEFAULT_RETRIES
    max_depth: int = verify.DEFAULT_MAX_DEPTH

    def model(self) -> CoefficientModel:
        if self.model_path:
            return load_model(self.model_path)
        return builtin_model(self.family or "littlewood")


@dataclass
class ConstructResult:
    params: BuildParameters
    certificate: verify.PolynomialCertificate
    body: dict
    attempts: list[dict]
    decomposition: NewmanDecomposition | None = None
    trap: trap.TrapResult | None = None


def _attempt_record(params: BuildParameters, outcome: str) -> dict:
    return {"eta": str(params.eta), "ell": params.ell, "n": params.n, "outcome": outcome}


def construct(config: RunConfig) -> ConstructResult:
    """validate -> parameters -> decomposition -> trap -> assemble -> smallness -> certify -> bounds.

    DeltaExceeded and TrapEscape halve eta and double ell; too few roots in the
    practical degree rule grow n by half. Both share the retry budget.
    """
    model = config.model()
    overrides = dict(config.overrides)
    attempts: list[dict] = []
    last_error: NewmanError | None = None
    params = select_parameters(model, config.r, overrides)
    for attempt in range(config.retries + 1):
        if attempt:
            log.info("retry %d: eta=%s ell=%d n=%d", attempt, params.eta, params.ell, params.n)
        tp = target_points(params)
        try:
            dec = compute_decomposition(params, tp)
            verify_decomposition(dec, tp)
            run = trap.run(params, dec, model, full_trace=config.full_trace)
        except (DeltaExceeded, TrapEscape) as exc:
            last_error = exc
            attempts.append(_attempt_record(params, type(exc).__name__))
            if isinstance(exc, TrapEscape) and config.trace and exc.trace:
                trap.write_trace_csv(exc.trace, config.trace)
            overrides["eta"] = params.eta / 2
            overrides["ell"] = params.ell * 2
            overrides.pop("fft_size", None)
            params = select_parameters(model, config.r, overrides)
            continue
        cert = verify.assemble_polynomial(model, run.eps)
        cert = verify.check_q_smallness(cert, params, tp)
        cert = verify.certify(cert, params, max_depth=config.max_depth, raise_on_failure=False)
        if cert.root_count < params.r:
            last_error = NotEnoughRoots(cert.root_count, params.r)
            attempts.append(_attempt_record(params, "NotEnoughRoots"))
            if params.degree_rule != "practical" or "n" in overrides:
                break
            params = with_degree(params, math.ceil(params.n * DEGREE_GROWTH))
            continue
        damping = build_damping(cert.degree, params.A)
        if cert.root_count > damping.m:
            raise VerificationError(f"{cert.root_count} roots exceed the upper bound {damping.m}")
        attempts.append(_attempt_record(params, "ok"))
        if config.trace:
            trap.write_trace_csv(run.trace, config.trace)
        diagnostics = {
            "decomposition": dec.summary(),
            "trap": run.summary(),
            "attempts": attempts,
            "n_sufficient": params.n_sufficient,
            "n_over_r2": str(Fraction(params.n, params.r**2)),
            "evaluations": cert.evaluations,
        }
        body = certificate_body(model.to_json(), params, cert, diagnostics)
        return ConstructResult(params, cert, body, attempts, dec, run)
    assert last_error is not None
    raise last_error


# ---------------------------------------------------------------- subcommands


def cmd_construct(config: RunConfig) -> int:
    result = construct(config)
    if config.out:
        write_certificate(result.body, config.out)
    p, c = result.params, result.certificate
    print(json.dumps({
        "root_count": c.root_count, "r": p.r, "n": p.n, "eta": str(p.eta), "ell": p.ell,
        "q_smallness_passed": result.body["q_smallness_passed"], "out": config.out,
    }))
    return 0 if c.root_count >= p.r else NotEnoughRoots.exit_code


def cmd_verify(path: str) -> int:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CertificateError(f"cannot read {path}: {exc}") from exc
    print(json.dumps(verify_certificate(text)))
    return 0


def cmd_bound(n: int, A) -> int:
    print(json.dumps(build_damping(n, parse_rational(A)).to_json()))
    return 0


def cmd_decompose(config: RunConfig, out: str) -> int:
    model = config.model()
    params = select_parameters(model, config.r, config.overrides)
    tp = target_points(params)
    dec = compute_decomposition(params, tp, enforce_delta=False)
    worst = verify_decomposition(dec, tp)
    write_decomposition_csv(dec, out)
    summary = dec.summary()
    summary["max_residual"] = float(worst)
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------------- argument parsing


def _add_build_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--family", choices=sorted(BUILTIN_FAMILIES), help="built-in coefficient family")
    src.add_argument("--model", help="JSON model file {\"period\": p, \"sets\": [[...], ...]}")
    p.add_argument("--roots", "-r", type=int, default=2, help="number of roots to force in I(alpha)")
    p.add_argument("--eta", help="eta as a rational, e.g. 1/8")
    p.add_argument("--ell", type=int, help="index of the damping factor G_ell")
    p.add_argument("--s", type=int, help="number of target points (default 2r)")
    p.add_argument("--degree", type=int, help="fix the degree n")
    p.add_argument("--precision-bits", type=int, help="fixed-point fraction bits B")
    p.add_argument("--fft-size", type=int, help="FFT length N (power of two)")
    p.add_argument("--c-prec", help="bits of precision per unit of r (B = ceil(c r) + 64)")
    p.add_argument("--c-deg", help="degree scale in the practical rule n = ceil(c r / alpha)")
    p.add_argument("--strict", action="store_true",
                   help="use the sufficient degree and enforce sum|nu| < delta and the Q_n threshold")


def _overrides(args) -> dict:
    o = {
        "eta": parse_rational(args.eta) if args.eta else None,
        "ell": args.ell,
        "s": args.s,
        "n": args.degree,
        "precision_bits": args.precision_bits,
        "fft_size": args.fft_size,
        "c_prec": parse_rational(args.c_prec) if args.c_prec else None,
        "c_deg": parse_rational(args.c_deg) if args.c_deg else None,
        "strict": True if args.strict else None,
    }
    return {k: v for k, v in o.items() if v is not None}


def _config(args) -> RunConfig:
    return RunConfig(
        family=args.family,
        model_path=args.model,
        r=args.roots,
        overrides=_overrides(args),
        out=getattr(args, "out", None),
        trace=getattr(args, "trace", None),
        full_trace=getattr(args, "full_trace", False),
        retries=getattr(args, "retries", DEFAULT_RETRIES),
        max_depth=getattr(args, "max_depth", verify.DEFAULT_MAX_DEPTH),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newman-roots",
        description="Construct polynomials with restricted coefficients and many certified roots near 1.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build a polynomial and write its root certificate")
    _add_build_args(c)
    c.add_argument("--out", "-o", help="certificate JSON path")
    c.add_argument("--trace", help="write the trap trace CSV here")
    c.add_argument("--full-trace", action="store_true", help="keep every step in the trace")
    c.add_argument("--retries", type=int, default=DEFAULT_RETRIES)
    c.add_argument("--max-depth", type=int, default=verify.DEFAULT_MAX_DEPTH, help="bisection depth limit")

    v = sub.add_parser("verify", help="re-check a certificate from the file alone")
    v.add_argument("certificate")

    b = sub.add_parser("bound", help="print the damping-polynomial root bound v(A) ceil(sqrt n)")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--A", default="1")

    d = sub.add_parser("decompose", help="dump nu_k and the suffix bounds U_k as CSV")
    _add_build_args(d)
    d.add_argument("--out", "-o", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "construct":
            return cmd_construct(_config(args))
        if args.command == "verify":
            return cmd_verify(args.certificate)
        if args.command == "bound":
            if args.n < 1:
                raise ValidationError("n must be >= 1")
            return cmd_bound(args.n, args.A)
        if args.command == "decompose":
            return cmd_decompose(_config(args), args.out)
    except NewmanError as exc:
        print(f"error [{exc.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
