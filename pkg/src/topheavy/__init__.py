"""Top-heavy contest portfolios: union-probability objectives, greedy integer
programs, sport rule compilers, projections and a contest simulator."""

from .exceptions import CapacityError, InputError, NumericalError

__version__ = "0.1.0"

__all__ = ["CapacityError", "InputError", "NumericalError", "__version__"]
