"""Exception types shared across the package."""


class InputError(ValueError):
    """An input failed validation.

    ``field`` names the offending argument or record so callers (and the CLI)
    can point at it directly.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class CapacityError(InputError):
    """The request exceeds an enumeration guard."""


class NumericalError(RuntimeError):
    """A numerical routine did not reach its requested tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)
