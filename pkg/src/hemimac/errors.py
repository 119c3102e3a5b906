"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates an operation's precondition."""


class DecodeError(RuntimeError):
    """The decoder cannot produce an estimate for this observation.

    ``kind`` is one of ``"degenerate_observation"``, ``"cap_underflow"`` or
    ``"enumeration_cap"`` so callers can count the events separately.
    """

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind
