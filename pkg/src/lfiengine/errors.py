"""Exception hierarchy for the inference engine."""


class LfiError(Exception):
    """Base class for all engine errors."""


# -- graph ------------------------------------------------------------------

class GraphError(LfiError):
    pass


class DuplicateNameError(GraphError):
    pass


class UnknownParentError(GraphError):
    pass


class UnknownNodeError(GraphError):
    pass


class CycleError(GraphError):
    pass


class ObservedMissingError(GraphError):
    pass


class ShapeInferenceError(GraphError):
    pass


class GraphValidationError(GraphError):
    """Raised when a graph with outstanding violations is compiled."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


# -- execution --------------------------------------------------------------

class OpFailureError(LfiError):
    """An operation raised during batch evaluation.  Identifies the node,
    the element index within the batch (None for vectorized ops) and the
    batch index."""

    def __init__(self, node, message, element=None, batch_index=None):
        self.node = node
        self.element = element
        self.batch_index = batch_index
        where = f"node '{node}'"
        if batch_index is not None:
            where += f", batch {batch_index}"
        if element is not None:
            where += f", element {element}"
        super().__init__(f"{where}: {message}")


class ShapeMismatchError(LfiError):
    pass


# -- numerics ---------------------------------------------------------------

class InvalidParamsError(LfiError):
    pass


class DimensionMismatchError(LfiError):
    pass


class LagTooLargeError(LfiError):
    pass


class EmptyInputError(LfiError):
    pass


class BadQuantileError(LfiError):
    pass


class UnknownOpError(LfiError):
    pass


# -- methods ----------------------------------------------------------------

class DegenerateWeightsError(LfiError):
    pass


class SingularKernelError(LfiError):
    pass


class ScheduleNotShrinkingError(LfiError):
    pass


class NotPositiveDefiniteError(LfiError):
    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(
            message
            or f"matrix not positive definite (pivot {pivot}); "
            "consider raising the noise variance"
        )


class AllRestartsFailedError(LfiError):
    pass


class OutOfBoundsError(LfiError):
    pass


class InsufficientInitError(LfiError):
    pass


class ChainStuckError(LfiError):
    pass


# -- store ------------------------------------------------------------------

class StoreError(LfiError):
    pass


class CorruptionError(StoreError):
    pass


class ChecksumMismatchError(StoreError):
    pass


# -- external bridge --------------------------------------------------------

class ExternalError(LfiError):
    pass


class ExternalTimeoutError(ExternalError):
    pass


class NonzeroExitError(ExternalError):
    def __init__(self, returncode, stderr):
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(f"external command exited {returncode}: {stderr.strip()}")


class ProtocolError(ExternalError):
    pass


# -- cli / model files ------------------------------------------------------

class ModelParseError(LfiError):
    pass


class ModelSchemaError(ModelParseError):
    pass
