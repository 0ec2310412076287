"""Exception types shared across the package."""


class VorintError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInput(VorintError, ValueError):
    """Point set cannot be tessellated (duplicates, non-finite values, empty)."""


class InvalidConfidence(VorintError, ValueError):
    """Requested rejection confidence is already met at the start of the monotone branch."""

    def __init__(self, message, epsilon=None):
        super().__init__(message)
        self.epsilon = epsilon


class RejectionExhausted(VorintError, RuntimeError):
    """No acceptable SPPP configuration was found within the retry budget."""


class EmptyFilter(VorintError, RuntimeError):
    """The filtered estimator found no cell lying inside the stretched window."""


class UnknownFunction(VorintError, KeyError):
    pass


class ResolutionMismatch(VorintError, ValueError):
    pass
