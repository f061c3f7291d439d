"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user input: bad shapes, bad values, malformed files.

    CLI commands map this to exit code 2.
    """


class DegenerateDataError(InputError):
    """Data admits no meaningful statistic (e.g. all points identical)."""


class CsvParseError(InputError):
    """A CSV file could not be parsed; message carries row/column context."""


class TrainingDivergedError(RuntimeError):
    """A non-finite loss was encountered; message names the step and term."""
