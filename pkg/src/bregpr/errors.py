"""Exception hierarchy shared by all submodules."""


class BregprError(Exception):
    """Base class for every error raised by this package."""


class InvalidConfigurationError(BregprError, ValueError):
    """A window, plan, solver or experiment configuration is not admissible."""


class InvalidInputError(BregprError, ValueError):
    """An array argument has the wrong shape, length or sign."""


class DomainError(BregprError, ValueError):
    """A function was evaluated outside of its domain (e.g. log(0))."""


class NumericIntegrityError(BregprError, ArithmeticError):
    """A numerical invariant (realness, finiteness) was violated."""


class UnsupportedOperationError(BregprError, NotImplementedError):
    """The requested (divergence, direction, power) combination is not provided."""


class UndefinedMetricError(BregprError, ValueError):
    """A metric is undefined for the given inputs (zero reference energy)."""


class DivergedRunError(BregprError, RuntimeError):
    """An iterative solver produced a non-finite or exploding iterate.

    The partial :class:`~bregpr.solvers.RunReport` (with the last finite
    trace) is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class WavError(BregprError, OSError):
    """Base class for WAV input/output failures."""


class MalformedWavError(WavError):
    pass


class UnsupportedCodecError(WavError):
    pass


class SampleRateMismatchError(WavError):
    pass
