"""Semantic exceptions shared across the package."""


class MapentError(Exception):
    """Base class for all package errors."""


class IntegralityError(MapentError, ValueError):
    """Standard-ensemble parameters do not give integer node/socket counts."""


class SocketExhaustion(MapentError, RuntimeError):
    """Multi-Poisson construction ran out of free sockets; retry with a new seed."""


class ImpossibleOutput(MapentError, ValueError):
    """Channel output has zero probability under the all-zero codeword."""


class NonSymmetricInput(MapentError, ValueError):
    """An LLR population failed the symmetry identities beyond tolerance."""


class BudgetExceeded(MapentError, RuntimeError):
    """Exact-enumeration oracle called above its instance-size budget."""


class InconsistentInfinity(MapentError, FloatingPointError):
    """Bethe term required log of an exact zero (contradictory hard messages)."""


class NoBadBranch(MapentError, RuntimeError):
    """No nontrivial fixed-point branch exists for any noise level."""


class SpecParseError(MapentError, ValueError):
    """Malformed degree-pair, channel, or graph specification string."""
