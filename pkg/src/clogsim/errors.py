"""Exception types shared across the package."""

from __future__ import annotations


class ClogsimError(Exception):
    """Base class for all package-specific errors."""


class GeometryDomainError(ClogsimError):
    """Radius outside the admissible range for the requested quantity."""


class MeshingError(ClogsimError):
    """Triangulation failed to meet the quality or conformity targets."""


class CellSolveError(ClogsimError):
    """Cell corrector solve did not converge to the requested tolerance."""


class TableFormatError(ClogsimError):
    """Coefficient table file is malformed or incompatible."""


class ConfigError(ClogsimError):
    """Simulation configuration is missing keys or holds invalid values."""


class SolverError(ClogsimError):
    """Macroscopic time stepper failed (linear solve or step-size control)."""
