"""Design and verification toolkit for birefringent-waveguide SFWM photon-pair sources."""

__version__ = "0.1.0"

from .errors import DomainError, FitError, NoSolution  # noqa: F401
