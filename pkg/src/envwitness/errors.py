"""Exception hierarchy shared by all modules."""


class EnvWitnessError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(EnvWitnessError, ValueError):
    pass


class InvalidProtocol(EnvWitnessError, ValueError):
    pass


class NonUnitaryInput(EnvWitnessError, ValueError):
    pass


class OutcomeOutOfRange(EnvWitnessError, ValueError):
    pass


class NotAnInstrument(EnvWitnessError, ValueError):
    pass


class TooManyOutcomes(EnvWitnessError, ValueError):
    pass


class SizeMismatch(EnvWitnessError, ValueError):
    pass


class EmptyType(EnvWitnessError, ValueError):
    pass


class SizeOverflow(EnvWitnessError, OverflowError):
    pass


class IntractableSize(EnvWitnessError, MemoryError):
    """Raised before allocation when a problem exceeds the configured budget."""


class ComplexNotRealified(EnvWitnessError, ValueError):
    pass


class NoReduction(EnvWitnessError):
    """The effective sparsity covers every entry; use the dense problem."""


class SolverUnavailable(EnvWitnessError, RuntimeError):
    pass


class SdpaFormatError(EnvWitnessError, ValueError):
    pass
