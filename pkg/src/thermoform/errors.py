"""Exception hierarchy for the thermoform toolkit.

Every error raised by the library derives from ThermoformError so callers
(and the CLI) can map failures to stable exit codes.
"""


class ThermoformError(Exception):
    """Base class for all toolkit errors."""


class EmptyRowOrColumnError(ThermoformError):
    """Some symbol has no successor or no predecessor; shift space ill-defined."""


class CapExceededError(ThermoformError):
    """An enumeration would exceed the configured word cap."""


class WordTooShortError(ThermoformError):
    """A word is shorter than the Birkhoff window requires."""


class InadmissibleWordError(ThermoformError):
    """A word contains a transition forbidden by the adjacency matrix."""


class InadmissibleCycleError(ThermoformError):
    """A cycle is not a closed admissible path in the given graph."""


class NotABijectionError(ThermoformError):
    """A symbol permutation is not a bijection on the alphabet."""


class ReducibleSupportError(ThermoformError):
    """Support graph of a stochastic matrix is not strongly connected."""


class RangeMismatchError(ThermoformError):
    """A potential does not live on the expected system or range."""


class NotIrreducibleError(ThermoformError):
    """Operation requires a strongly connected transition graph."""


class NotPrimitiveError(ThermoformError):
    """Operation requires a primitive (aperiodic irreducible) graph."""


class NoConvergenceError(ThermoformError):
    """An iterative solver failed to reach its tolerance."""


class NonPositiveScalingError(ThermoformError):
    """The scaling potential must be strictly positive."""


class BracketFailureError(ThermoformError):
    """A root bracket could not be established; upstream values inconsistent."""


class NonFiniteObjectiveError(ThermoformError):
    """An optimization objective returned a non-finite value."""


class NonConvexError(ThermoformError):
    """Convexity hypothesis violated and heuristic mode not acknowledged."""


class EmptySubgraphError(ThermoformError):
    """No critical edges found; signals a tolerance failure upstream."""


class SchemaError(ThermoformError):
    """A run configuration does not match the documented schema."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class ValidationError(ThermoformError):
    """A run configuration is well-formed but semantically invalid."""
