"""Exception hierarchy shared by all modules."""


class AmgCoarsenError(Exception):
    """Base class for package errors."""


class InputError(AmgCoarsenError):
    """Invalid argument or malformed problem data (fatal)."""


class ContractViolationError(AmgCoarsenError):
    """A caller broke an API precondition, e.g. stepping a non-violating node."""


class FileFormatError(AmgCoarsenError):
    """Unparseable or corrupt on-disk data; carries location when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
