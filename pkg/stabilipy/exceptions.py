"""Exceptions and warnings raised by stabilipy.

Every error subclasses the closest built-in exception as well as
:class:`StabilipyError`, so callers may catch either.
"""


class StabilipyError(Exception):
    """Base class for all stabilipy errors."""


class DimensionMismatch(StabilipyError, ValueError):
    """Array or graph dimensions do not line up."""


class NodeSetMismatch(DimensionMismatch):
    """Two graphs that must share a node set do not."""


class BadDimensions(DimensionMismatch):
    """An ingested file has the wrong number of rows or columns."""


class InvalidGraph(StabilipyError, ValueError):
    """A graph violates a structural precondition."""


class EmptyGraph(InvalidGraph):
    pass


class DisconnectedGraph(InvalidGraph):
    pass


class IsolatedNode(InvalidGraph):
    pass


class NotConverged(StabilipyError, RuntimeError):
    """An iterative solver hit its iteration cap above tolerance."""


class OracleCapExceeded(StabilipyError, ValueError):
    """A dense oracle was asked to handle more nodes than allowed."""


class ZeroCut(StabilipyError, ZeroDivisionError):
    pass


class InfeasibleBudget(StabilipyError, ValueError):
    """Not enough candidate node pairs for the requested perturbation."""


class NegativeEntry(StabilipyError, ValueError):
    pass


class NotADistribution(StabilipyError, ValueError):
    pass


class FormatError(StabilipyError, ValueError):
    """A file does not follow the expected format."""


class ConfigError(StabilipyError, KeyError):
    """Unknown or malformed configuration key."""


class StabilipyWarning(UserWarning):
    pass


class BasisCollapseWarning(StabilipyWarning):
    pass


class DisconnectedWarning(StabilipyWarning):
    pass


class IsolatedNodeWarning(StabilipyWarning):
    pass


class SelfLoopWarning(StabilipyWarning):
    pass


class SamplingRatioWarning(StabilipyWarning):
    """An edge sampling ratio ``w * R`` fell outside (0, 1]."""
