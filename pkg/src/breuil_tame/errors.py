"""Exception hierarchy shared by every layer of the package."""


class BreuilError(Exception):
    """Base class for all errors raised by this package."""


class PrecisionExhausted(BreuilError):
    """A computation would return an element with no certified digits."""


class NotDivisible(BreuilError):
    """An exact division by a power of p was requested on a non-multiple."""


class NoRootInE(BreuilError):
    """A required square root does not exist in the coefficient ring."""


class InadmissibleParameters(BreuilError):
    """Input parameters violate a precondition of the construction."""


class DegenerateCase(InadmissibleParameters):
    """Parameters for which the residual representation has extra endomorphisms."""


class BadValuation(InadmissibleParameters):
    """A parameter has the wrong p-adic valuation."""


class ScalarType(InadmissibleParameters):
    """The requested tame type is scalar."""


class TruncationOverflow(BreuilError):
    """An exact result would need u-degrees beyond the truncation bound."""


class NotInFil1(BreuilError):
    """phi_1 was applied to an element outside the first filtration step."""


class NotRecognized(BreuilError):
    """A rank-one module does not match any standard shape."""


class UnsupportedMap(BreuilError):
    """A coefficient specialization is not of a supported kind."""
