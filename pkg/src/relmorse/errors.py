"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad truncation, shape mismatch, missing parameter."""


class ThresholdOnSpectrumError(ValueError):
    def __init__(self, threshold, eigenvalue):
        self.threshold = threshold
        self.eigenvalue = eigenvalue
        super().__init__(
            f"threshold {threshold!r} lies within 1e-9 of eigenvalue {eigenvalue!r}; "
            "choose a threshold off the spectrum"
        )


class GapViolationError(ValueError):
    """Perturbation is not strictly inside the spectral gap."""


class DegenerateEndpointError(ValueError):
    """An endpoint of a spectral-flow path has an eigenvalue in the kernel window."""


class NumericalFailure(RuntimeError):
    """Base class for solver failures (CLI exit status 3)."""


class NonContractionError(NumericalFailure):
    """Fixed-point iteration did not reach tolerance within max_iter."""


class EvaluationError(NumericalFailure):
    """Pointwise evaluation produced a non-finite value or quadrature failed."""


class BoundednessViolation(NumericalFailure):
    """A continuation path left the configured a priori ball."""


class NoConvergence(NumericalFailure):
    """Regularization path diverged in the kernel direction."""


class HypothesisViolation(Exception):
    """A structural hypothesis of the solver fails for the given input (CLI exit status 2)."""

    def __init__(self, condition, message, evidence=None):
        self.condition = condition
        self.evidence = dict(evidence or {})
        super().__init__(f"{condition}: {message}")
