"""Exception hierarchy shared across the package."""


class UQError(Exception):
    """Base class for all errors raised by uqengine."""


class InvalidParameterError(UQError, ValueError):
    """Distribution or algorithm parameters violate their constraints."""


class DomainError(UQError, ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleCorrelationError(UQError, ValueError):
    """No Gaussian-space correlation reproduces the requested correlation."""


class FactorizationError(UQError, ValueError):
    """A matrix expected to be positive definite could not be factorized."""


class UnsupportedCouplingError(UQError, ValueError):
    """The sampler only supports independent marginals."""


class DegenerateWeightsError(UQError, ValueError):
    """Importance weights are all zero or non-finite."""


class TemplateError(UQError, ValueError):
    """An external-model input template is malformed."""


class ModelSpecError(UQError, ValueError):
    """A model specification is internally inconsistent."""


class ModelEvaluationError(UQError, RuntimeError):
    """One or more model evaluations failed where the analysis needs all of them."""


class SingularGradientError(UQError, ArithmeticError):
    """The limit-state gradient vanished during a FORM iteration."""


class BreitungError(UQError, ArithmeticError):
    """Breitung's SORM correction is not applicable (1 + beta*kappa <= 0)."""


class IllConditionedError(UQError, ArithmeticError):
    """Covariance matrix remained singular after jitter escalation."""


class RankDeficientError(UQError, ArithmeticError):
    """Least-squares design matrix is rank deficient."""


class UndefinedIndicesError(UQError, ArithmeticError):
    """Sensitivity indices are undefined, e.g. for a constant output."""


class ConfigError(UQError, ValueError):
    """A study configuration failed validation.

    ``problems`` holds ``(json_path, message)`` pairs, all of them, not just
    the first one encountered.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
