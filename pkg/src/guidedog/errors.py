"""Exception types shared across the package."""


class GuideDogError(Exception):
    """Base class for all package errors."""


class InvalidInput(GuideDogError, ValueError):
    pass


class InvalidPalette(GuideDogError, ValueError):
    pass


class EmptyRegion(GuideDogError, ValueError):
    pass


class ParseError(GuideDogError, ValueError):
    """Raised for malformed text inputs; carries the offending line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
