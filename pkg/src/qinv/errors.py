"""Exception hierarchy shared by all qinv modules."""


class QinvError(Exception):
    """Base class for every error raised by qinv."""


class RejectedInputError(QinvError, ValueError):
    """An argument violates an operation's precondition."""


class IntegrationQualityError(QinvError, RuntimeError):
    """A propagated trajectory left its tolerance band.

    ``step`` is the index of the first offending grid point.
    """

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class UnsupportedModelError(QinvError):
    """The model falls outside what the DFS search can handle."""


class NotADfsError(QinvError):
    """A proposed DFS split does not block-triangularize a Lindblad operator."""

    def __init__(self, message, norm):
        super().__init__(message)
        self.norm = norm


class SingularScheduleError(QinvError, ValueError):
    """A coefficient schedule comes too close to zero for a division by it."""


class ConfigError(QinvError):
    """Invalid CLI configuration; ``pointer`` is a JSON pointer to the field."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
