"""Exception hierarchy shared across the package."""


class SessionWaveError(Exception):
    """Base class for all package errors."""


class LawValidationError(SessionWaveError):
    """A duration/rate law was constructed with invalid parameters."""


class InfiniteMeanError(SessionWaveError):
    """An operation required a finite mean duration but the law has none.

    Raised whenever the tail index makes the mean duration infinite
    (tail index <= 1) and the caller did not ask for a truncated value.
    """


class UnsupportedMomentError(SessionWaveError):
    """A moment of order larger than the law's declared maximum was requested."""


class ScaleSelectionError(SessionWaveError):
    """The requested octave range is infeasible for the given sample size."""


class DegenerateContrastError(SessionWaveError):
    """All squared coefficients in the fitting window sum to zero."""


class QuadratureError(SessionWaveError):
    """A numerical integration routine failed to reach its tolerance."""
