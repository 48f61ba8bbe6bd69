"""Exception hierarchy shared by all envmorph modules."""


class EnvMorphError(Exception):
    """Base class for all envmorph errors."""


class InvalidArgument(EnvMorphError, ValueError):
    """A caller-supplied value violates an operation's preconditions."""


class InvalidSpec(EnvMorphError, ValueError):
    """An impulse-train or stimulus spec violates its invariants."""


class GenerationExhausted(EnvMorphError, RuntimeError):
    """No valid random context found within the retry budget."""

    def __init__(self, message: str, tuple_index: int | None = None):
        super().__init__(message)
        self.tuple_index = tuple_index


class NumericFailure(EnvMorphError, ArithmeticError):
    """A forward/backward pass or training step produced non-finite values."""


class CorruptFile(EnvMorphError, ValueError):
    """An envelope file failed its magic/version/length checks."""


class CorruptCheckpoint(CorruptFile):
    """A model checkpoint failed its magic/architecture/payload checks."""


class CheckpointMissing(EnvMorphError, ValueError):
    """An engine requiring a trained model was invoked without one."""


class TemplateMissing(EnvMorphError, ValueError):
    """The naturalistic suite was invoked without any impulse template."""


class InvalidMap(EnvMorphError, ValueError):
    """An alpha map failed its endpoint or monotonicity probe."""


class InvalidExpectation(EnvMorphError, ValueError):
    """An ordering expectation references a cell that does not exist."""
