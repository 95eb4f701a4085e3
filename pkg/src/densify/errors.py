"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class DensifyError(Exception):
    exit_code = 1


class ConfigError(DensifyError):
    """Bad or inconsistent configuration (usage problem)."""

    exit_code = 2


class FormatError(DensifyError, ValueError):
    """A file does not follow its declared format."""

    exit_code = 3


class TruncationError(FormatError):
    pass


class DataError(FormatError):
    """Well-formed file carrying invalid values (NaN, out of range, ...)."""


class ParseError(FormatError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class TagError(ParseError):
    pass


class ContractError(DensifyError, ValueError):
    """A precondition of an operation was violated by the caller."""

    exit_code = 4


class ShapeError(ContractError):
    pass
