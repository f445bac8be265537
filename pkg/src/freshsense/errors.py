"""Exception types shared across the toolkit."""


class InvalidParameterError(ValueError):
    """A numeric parameter lies outside its valid domain."""


class ShapeError(ValueError):
    """Two buffers that must line up do not (length or sample rate)."""


class ConfigurationError(RuntimeError):
    """A threshold, state snapshot or experiment description does not match its use."""


class DivergenceError(ArithmeticError):
    """LMS adaptation produced a non-finite weight or output.

    Attributes
    ----------
    sample_index : int or None
        Absolute sample index at which the non-finite value appeared; None
        when the error summarises many runs.
    partial : numpy.ndarray or None
        Squared errors of the samples processed before divergence, when known.
    """

    def __init__(self, sample_index, message=None, partial=None):
        self.sample_index = None if sample_index is None else int(sample_index)
        self.partial = partial
        super().__init__(message or f"adaptation diverged at sample {self.sample_index}")
