"""Exception types shared across the package."""


class FclError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FclError, ValueError):
    pass


class FormatError(FclError, ValueError):
    """A file did not match its expected format.

    ``line`` is the 1-based line number of the offending line, when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class StaleInput(FormatError):
    """An input refers to a problem, or a configuration, that no longer matches."""


class UnsatisfiableConfig(FclError, ValueError):
    """No loop can ever satisfy the configured loop type on this region."""


class GenerationFailure(FclError):
    """The retry budget ran out before the target loop count was reached."""

    def __init__(self, message, loops_accepted, loops_target):
        self.loops_accepted = loops_accepted
        self.loops_target = loops_target
        super().__init__(f"{message} ({loops_accepted}/{loops_target} loops accepted)")
