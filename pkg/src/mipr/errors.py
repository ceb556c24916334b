"""Exception hierarchy shared by every stage of the pipeline."""


class MiprError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(MiprError, ValueError):
    pass


class InvalidInputError(MiprError, ValueError):
    pass


class TrainingDivergedError(MiprError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss


class ProbeError(MiprError):
    def __init__(self, layer, neuron, message="non-finite activation"):
        super().__init__(f"{message} at layer {layer}, neuron {neuron}")
        self.layer = layer
        self.neuron = neuron


class RangeError(MiprError, ValueError):
    """A value fell outside its permitted interval."""


class InvalidPlanError(MiprError, ValueError):
    pass


class LayerEmptiedError(InvalidPlanError):
    def __init__(self, layer, width):
        super().__init__(f"plan would remove all {width} neurons of hidden layer {layer}")
        self.layer = layer
        self.width = width


class FormatError(MiprError):
    """Malformed binary or text file."""

    def __init__(self, message, path=None):
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class DimensionError(FormatError):
    pass
