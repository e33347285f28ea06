"""Exception hierarchy.

ValidationError subclasses map to CLI exit code 2 (bad input),
RuntimeFailure subclasses to exit code 3 (a run that could not finish).
"""


class ScscaleError(Exception):
    pass


class ValidationError(ScscaleError):
    exit_code = 2


class RuntimeFailure(ScscaleError):
    exit_code = 3


class NonIntegerM(ValidationError):
    """dv*N is not divisible by dc, so the per-position CN count is fractional."""


class DegenerateChain(ValidationError):
    """Chain length L < 1."""


class EmptyResidual(ValidationError):
    """Residual classification requested for a trial that fully decoded."""


class NonPositiveGap(ValidationError):
    """Erasure rate at or above the coupled threshold."""


class OutOfTableRange(ValidationError):
    """Requested erasure rate outside the parameter table's knot span."""


class InvalidWindow(ValidationError):
    """Steady-state window end exceeds the total erased mass eps*L."""


class MissingParams(ValidationError):
    """Prediction requested without a parameter file."""


class ManifestConflict(ValidationError):
    """Existing manifest was written by a semantically different config."""


class TooManyFailures(RuntimeFailure):
    """Mean-trajectory estimation attempted where failures are not rare."""


class NoPlateau(RuntimeFailure):
    """No steady-state plateau found in a mean trajectory."""


class WindowTooShort(RuntimeFailure):
    """Too few usable autocovariance lags for a decay-rate fit."""


class ExcessiveCensoring(RuntimeFailure):
    """Too many censored first-hit paths to compare distributions."""
