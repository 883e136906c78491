"""Exception types raised across the library."""


class UnsupportedDimensionError(ValueError):
    """Requested dimension exceeds the shipped Sobol' direction-number table."""


class InvalidParameterError(ValueError):
    """A parameter vector or matrix contains non-finite entries."""


class SingularProposalError(RuntimeError):
    """Proposal covariance could not be factorized even after repair."""


class DegenerateWeightsError(RuntimeError):
    """All importance weights are zero; self-normalization is undefined."""


class MamisRunError(RuntimeError):
    """An adaptive run failed (e.g. non-finite target density at a sample)."""


class EstimateError(RuntimeError):
    """The integrand evaluated to a non-finite value at a weighted sample."""


class ModeSearchError(RuntimeError):
    """Newton mode search did not converge; the dependent baseline aborts."""


class IngestionError(ValueError):
    """A data file is missing, malformed, or contains a degenerate column."""
