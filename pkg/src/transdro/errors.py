"""Exception hierarchy for the transdro package."""


class TransDROError(Exception):
    """Base class for all errors raised by transdro."""


class TooFewLabels(TransDROError):
    pass


class TooFewRows(TransDROError):
    pass


class DimensionMismatch(TransDROError, ValueError):
    pass


class NonFinite(TransDROError, FloatingPointError):
    pass


class BisectionBracketExhausted(TransDROError):
    """The multiplier bracket reached ``mu_max`` without a feasible iterate.

    Signals a near-degenerate feasible set (tau close to zero with the
    witness point being the only feasible weight).
    """


class BadSpec(TransDROError, ValueError):
    pass
