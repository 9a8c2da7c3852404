"""Exception types raised across the toolkit."""


class ParameterError(ValueError):
    """A parameter lies outside its physical or declared domain."""


class UnsupportedCombinationError(ValueError):
    """Two lineshapes cannot be combined by the requested operation."""


class ExtrapolationError(ValueError):
    """A lookup was requested outside the calibrated anchor range."""


class InsufficientDataError(ValueError):
    """The data do not contain enough structure for the estimator."""


class ScenarioError(ValueError):
    """A scenario failed validation; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


class FormatError(ValueError):
    """A data file does not conform to its format.

    ``line`` is the 1-based line number (text formats) or ``offset`` the byte
    offset (binary formats) at which parsing failed.
    """

    def __init__(self, message, *, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
