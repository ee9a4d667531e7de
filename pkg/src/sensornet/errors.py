"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SensorNetError(ValueError):
    """Base class for every rejection raised by this package."""


class InputFormatError(SensorNetError):
    """Malformed CSV/JSON input."""


class EmptyInputError(InputFormatError):
    """Input file has no data rows."""


class ValidationError(SensorNetError):
    """Arguments violate an operation's preconditions."""


class AlphabetOverflowError(ValidationError):
    """Product alphabet too large to encode as a single integer symbol."""


class IncompleteVectorError(ValidationError):
    """An entropy vector lacks subsets required by the query."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)
