"""Exception types shared across the package."""


class CmtagError(Exception):
    """Base class for all package errors."""


class ParseError(CmtagError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += ":%d" % line
        super().__init__("%s: %s" % (loc, message) if loc else message)
        self.path = path
        self.line = line


class ConfigError(CmtagError):
    """Invalid parameter value or inconsistent option combination."""


class ShapeError(CmtagError):
    """Array argument has the wrong dimensions."""


class AlignmentError(CmtagError):
    """Two corpora that must share sentence/token structure do not."""


class NumericalError(CmtagError):
    """A computation produced non-finite values."""
