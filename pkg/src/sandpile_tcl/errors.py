"""Exception types shared across the package."""


class SandpileError(Exception):
    """Base class for all package errors."""


class GraphError(SandpileError, ValueError):
    pass


class DisconnectedGraph(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class BadSink(GraphError):
    pass


class NotIntegerNetwork(GraphError):
    """Raised when sandpile dynamics are requested on a graph whose
    conductances differ from its edge multiplicities."""


class NonPlanarEmbedding(GraphError):
    pass


class NotStable(SandpileError, ValueError):
    pass


class NonTerminating(SandpileError, RuntimeError):
    """Some ordinary site can never be reached without passing the sink."""


class HeightOverflow(SandpileError, OverflowError):
    pass


class SingularSystem(SandpileError, ArithmeticError):
    pass


class InfiniteBound(SandpileError, ArithmeticError):
    """The requested bound is infinite because the pole potential is zero."""


class InfeasibleCertificate(SandpileError, ArithmeticError):
    pass


class MaxIterations(SandpileError, RuntimeError):
    pass


class Disconnecting(SandpileError, ValueError):
    pass


class NotDegreeThree(SandpileError, ValueError):
    pass


class CenterIsCritical(SandpileError, ValueError):
    pass


class BoundaryMismatch(SandpileError, ValueError):
    pass


class WouldDisconnect(SandpileError, ValueError):
    pass


class WouldMergePoles(SandpileError, ValueError):
    pass


class SchemaError(SandpileError, ValueError):
    pass


class PropertyViolation(SandpileError, AssertionError):
    """A checked mathematical property failed on a concrete instance.

    ``instance`` carries a JSON-serialisable description of the failure.
    """

    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance if instance is not None else {}
