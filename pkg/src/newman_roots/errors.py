"""Exception hierarchy. Each error carries the pipeline stage and CLI exit code."""

from __future__ import annotations


class NewmanError(Exception):
    stage = "internal"
    exit_code = 1


class ValidationError(NewmanError):
    stage = "validation"
    exit_code = 2


class NotBalanced(ValidationError):
    def __init__(self, offset: int, which: str):
        self.offset = offset
        self.which = which
        super().__init__(f"window at offset {offset} violates the {which} inequality")


class BoundViolated(ValidationError):
    def __init__(self, k: int, element):
        self.k = k
        self.element = element
        super().__init__(f"element {element} of E_{k} exceeds the declared bound")


class NotBalanceable(ValidationError):
    pass


class Infeasible(ValidationError):
    pass


class ProductTooSmall(ValidationError):
    pass


class LengthNotPowerOfTwo(ValueError):
    pass


class DecompositionError(NewmanError):
    stage = "decomposition"
    exit_code = 3


class PoleHit(DecompositionError):
    pass


class DeltaExceeded(DecompositionError):
    def __init__(self, sum_bound, delta):
        self.sum_bound = sum_bound
        self.delta = delta
        super().__init__(f"sum |nu_k| <= {float(sum_bound):.6g} is not below delta = {delta}")


class AliasingTooLarge(DecompositionError):
    def __init__(self, fft_size: int):
        self.fft_size = fft_size
        super().__init__(f"aliasing bound too large for N = {fft_size}")


class ResidualTooLarge(DecompositionError):
    pass


class TrapEscape(NewmanError):
    stage = "trap"
    exit_code = 4

    def __init__(self, step: int, trace=None):
        self.step = step
        self.trace = trace
        super().__init__(f"|psi| left the trap at step {step}")


class VerificationError(NewmanError):
    stage = "verification"
    exit_code = 5


class MembershipViolation(VerificationError):
    def __init__(self, k: int, value=None):
        self.k = k
        super().__init__(f"coefficient {value} at index {k} is not in E_{k}")


class SmallnessFailed(VerificationError):
    def __init__(self, j: int, value, threshold):
        self.j = j
        self.value = value
        self.threshold = threshold
        super().__init__(f"|Q_n(x_{j})| bound {float(value):.6g} is not below {float(threshold):.6g}")


class NotEnoughRoots(VerificationError):
    def __init__(self, found: int, r: int):
        self.found = found
        self.r = r
        super().__init__(f"certified {found} sign changes, need {r}")


class SumCheckFailed(VerificationError):
    pass


class CertificateError(VerificationError):
    pass
