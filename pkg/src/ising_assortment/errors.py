"""Exception hierarchy shared by all modules."""


class IsingError(Exception):
    """Base class for every error raised by this package."""


class AssortmentTooLarge(IsingError):
    """Exact enumeration requested over more products than the configured limit."""


class DimensionMismatch(IsingError, ValueError):
    pass


class ProductNotOffered(IsingError, ValueError):
    pass


class WrongDomain(IsingError, ValueError):
    pass


class EmptyAssortment(IsingError, ValueError):
    pass


class DegenerateColumn(IsingError, ValueError):
    """A product is bought in every basket or in none."""


class MomentOutOfRange(IsingError, ValueError):
    pass


class SingularSigma(IsingError, ValueError):
    pass


class InnerSolveFailed(IsingError, RuntimeError):
    pass


class NonConvergence(IsingError, RuntimeError):
    pass


class TooLarge(IsingError, ValueError):
    """Brute-force search requested over too many products."""
