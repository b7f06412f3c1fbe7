"""Level lines of quasiperiodic functions on the plane with 2, 3 and 4 quasiperiods."""
from ._accel import backend
from .errors import ConfigError, DomainError, QuasilevelError

__version__ = "0.1.0"

__all__ = ["backend", "ConfigError", "DomainError", "QuasilevelError", "__version__"]
