"""Two-scale simulator of colloid transport, deposition and clogging.

The package couples a microscopic cell description (a growing solid
grain inside a periodic square cell) to a macroscopic one-dimensional
reaction-diffusion system for N colloidal size classes, one deposited
species and an evolving pore radius field.  Effective diffusion enters
through a tortuosity factor tabulated from finite element solves of
cell corrector problems.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .geometry import MicroConfig, SQRT2  # noqa: F401
from .cellsolver import EffectiveCoeff, solve_cell  # noqa: F401
from .coefftable import CoeffTable, build_table, interpolate_tau  # noqa: F401
from .kinetics import LossMode, SpeciesParams  # noqa: F401
from .simconfig import RadiusProfile, SimConfig, load_config  # noqa: F401
from .macrosolver import (  # noqa: F401
    BoundarySchedule,
    MacroState,
    RunResult,
    RunStatus,
    run,
    step,
)
from .observables import (  # noqa: F401
    ClogEvent,
    ClogTrigger,
    StorageIndicators,
    detect_clogs,
    masses,
    porosity_field,
    storage_indicators,
)
