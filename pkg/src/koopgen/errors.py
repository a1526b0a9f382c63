"""Exception and warning types raised across the package."""


class KoopgenError(Exception):
    """Base class for all package errors."""


class IntegrationError(KoopgenError):
    """The adaptive integrator could not complete a trajectory."""


class BlowUp(IntegrationError):
    """Trajectory norm exceeded the admissible bound or became non-finite."""


class StepUnderflow(IntegrationError):
    """Step size fell below representable progress in time."""


class MaxStepsExceeded(IntegrationError):
    """Integrator hit its step budget before reaching the end time."""


class BasisMismatch(KoopgenError):
    """Weight vector or matrix was fitted against a different dictionary."""


class DegenerateFeatures(UserWarning):
    """Feature matrix is rank deficient; the minimum-norm solution is used."""


class NonDiagonalizable(KoopgenError):
    """Eigenvector matrix is too ill-conditioned for an eigen-based log."""


class BranchCut(KoopgenError):
    """An eigenvalue sits on the branch cut of the principal logarithm."""


class ConvergenceFailure(KoopgenError):
    """The eigensolver did not converge."""


class CoordinateNotInDictionary(KoopgenError):
    """A coordinate function x_k is not a member of the dictionary."""


class ConfigError(KoopgenError):
    """Invalid experiment configuration."""


class IntegrityError(KoopgenError):
    """Persisted artifact does not match its manifest."""


# kernel status codes -> exception type
STATUS_ERRORS = {
    1: BlowUp,
    2: StepUnderflow,
    3: MaxStepsExceeded,
}


def raise_for_status(status, context=""):
    status = int(status)
    if status == 0:
        return
    exc = STATUS_ERRORS.get(status, IntegrationError)
    raise exc(f"integration failed ({exc.__name__}){': ' + context if context else ''}")
