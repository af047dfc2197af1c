"""Exception types shared across the package.

Validation problems (bad input structure) and runtime infeasibility
(no feasible mapping exists) are kept in separate branches so the CLI
can map them to distinct exit codes.
"""


class NocSimError(Exception):
    """Base class for all package errors."""


class ValidationError(NocSimError):
    """Structurally or semantically invalid input."""


class CycleError(ValidationError):
    """Task graph contains a dependency cycle."""


class DanglingEdgeError(ValidationError):
    """Edge endpoint references a task that does not exist."""


class ZeroDimensionError(ValidationError):
    """Mesh dimension of zero or less."""


class InfeasibleK(ValidationError):
    """Cluster count outside 1..number of tasks."""


class DimensionMismatch(ValidationError):
    """Snapshot or mapping shaped for a different platform."""


class UnknownTarget(ValidationError):
    """Fault target does not name an element of the health map."""


class UnknownTile(ValidationError):
    """Tile id outside the mesh."""


class UnknownPort(ValidationError):
    """No such output port on this tile."""


class RangeError(ValidationError):
    """Numeric field outside its documented range."""


class LengthMismatch(ValidationError):
    """Two mappings for the same application differ in length."""


class EmptyHistory(ValidationError):
    """Classification requested for a location with no recorded events."""


class RegionBudgetError(ValidationError):
    """Rectangle budget too small for a non-empty destination set."""


class ParseError(ValidationError):
    """Scenario file is not well-formed."""


class SemanticError(ValidationError):
    """Scenario file is well-formed but internally inconsistent."""


class InfeasibilityError(NocSimError):
    """No feasible result exists for a valid instance."""


class UnroutableFlow(InfeasibilityError):
    """No route between two tiles under the current routing graph."""

    def __init__(self, src, dst):
        super().__init__(f"no route from tile {src} to tile {dst}")
        self.src = src
        self.dst = dst


class NoHealthyPE(InfeasibilityError):
    """Every processing element is broken or fully aged out."""


class InfeasibleInstance(InfeasibilityError):
    """Bounded probing found no assignment with routable flows."""
