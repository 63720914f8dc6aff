"""
RiskTrack error hierarchy

Every error knows the CLI exit code it maps to, so the command layer can
convert failures without a lookup table.
"""
from typing import Optional


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABOVE_CRITICAL = 3
EXIT_NUMERICAL = 4


class RiskTrackError(Exception):
    """Base class for all RiskTrack errors"""
    exit_code = EXIT_NUMERICAL


class ConfigError(RiskTrackError):
    """Invalid or unreadable configuration document"""
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.field = field
        self.line = line
        location = ""
        if field:
            location += f" [field: {field}]"
        if line is not None:
            location += f" [line {line}]"
        super().__init__(f"{message}{location}")


class ModelAssumptionViolated(RiskTrackError):
    """A controllability / observability / structural hypothesis does not hold"""
    exit_code = EXIT_CONFIG


# Structured closed forms raise the same error when their hypotheses fail
AssumptionViolated = ModelAssumptionViolated


class EpsilonNotZero(ModelAssumptionViolated):
    """A closed form valid only for noiseless pursuers was called with ε > 0"""


class NoSolution(RiskTrackError):
    """The Riccati equation has no stabilizing positive definite solution"""


class IllConditioned(RiskTrackError):
    """Invariant-subspace extraction was too ill-conditioned to trust"""

    def __init__(self, message: str, condition_number: float = float("nan")):
        self.condition_number = condition_number
        super().__init__(message)


class ThetaAboveCritical(RiskTrackError):
    """θ is at or above the critical risk parameter: the cost is infinite"""
    exit_code = EXIT_ABOVE_CRITICAL

    def __init__(self, theta: float, n: Optional[int] = None,
                 critical: Optional[float] = None, reason: str = ""):
        self.theta = theta
        self.n = n
        self.critical = critical
        self.reason = reason
        message = f"theta={theta:g} is above the critical value"
        if n is not None:
            message += f" for n={n}"
        if critical is not None:
            message += f" (theta*={critical:.6g})"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class NonDiagonalizable(RiskTrackError):
    """Eigenvector matrix too ill-conditioned for the Kronecker eigen lemma"""


class NumericalBlowup(RiskTrackError):
    """Simulated state exceeded the overflow guard"""

    def __init__(self, t: float, norm: float):
        self.t = t
        self.norm = norm
        super().__init__(f"state norm {norm:.3g} exceeded overflow guard at t={t:.6g}")


class EstimatorOverflow(RiskTrackError):
    """Exponential-cost estimator met a non-finite exponent"""

    def __init__(self, max_exponent: float):
        self.max_exponent = max_exponent
        super().__init__(f"exponent range exceeded (max exponent seen: {max_exponent!r})")


class SigmaExceedsYWarning(UserWarning):
    """Σ₀ ⪯ Yₙ does not hold; the output-feedback law is no longer optimal"""
