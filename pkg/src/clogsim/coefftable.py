"""Precomputed tortuosity multiplier over a radius partition.

The macro stepper never solves cell problems during time integration;
it reads tau from a table built once per configuration and interpolated
linearly in the grain radius.  The partition always contains the
touching radius r=1 as a node because the pore topology switches there,
and it stops at sqrt(2) - EPS_CLOG: beyond that the remaining void
slivers are numerically degenerate, and the macro solver freezes such
cells as clogged anyway, so interpolation clamps instead of meshing
them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cellmesh import build_cell_boundary, triangulate
from .cellsolver import SOLVER_TOL, solve_cell
from .errors import (
    CellSolveError,
    ClogsimError,
    ConfigError,
    GeometryDomainError,
    TableFormatError,
)
from .geometry import MicroConfig

EPS_CLOG = 0.01

# plateau noise allowance for the non-increasing check: the converged
# curve dips slightly before the touching radius and recovers to the
# overlap plateau, so consecutive nodes may tick up by a fraction of a
# percent; anything past 1% relative signals a bad solve
MONO_RTOL = 0.01

FORMAT_VERSION = 1
_MAGIC = "clogsim-table"


@dataclass(frozen=True)
class CoeffTable:
    """Tortuosity multiplier sampled on a radius grid.

    radii   strictly increasing, containing the touching radius 1.0
    tau     multiplier values in (0, 1], one per node
    h_used  mesh resolution the nodes were solved at
    tol     linear-solver residual tolerance of those solves
    """

    config: MicroConfig
    radii: np.ndarray
    tau: np.ndarray
    h_used: float
    tol: float

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=np.float64).copy()
        tau = np.asarray(self.tau, dtype=np.float64).copy()
        radii.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "config", MicroConfig.parse(self.config))
        if radii.ndim != 1 or radii.shape != tau.shape or len(radii) < 2:
            raise ConfigError("table needs matching 1d radius and tau arrays")
        if not np.all(np.diff(radii) > 0.0):
            raise ConfigError("table radii must be strictly increasing")
        if not np.any(np.abs(radii - 1.0) <= 1e-12):
            raise ConfigError("table must contain the touching radius r=1")
        if not np.all(np.isfinite(tau)) or np.any(tau <= 0.0) or np.any(tau > 1.0 + 1e-12):
            raise ConfigError("table tau values must lie in (0, 1]")

    @property
    def n_nodes(self) -> int:
        return len(self.radii)


def _radius_grid(delta_r: float) -> np.ndarray:
    """Partition [delta_r, sqrt(2) - EPS_CLOG] containing r = 1 exactly."""
    top = math.sqrt(2.0) - EPS_CLOG
    below = np.arange(1, int(round(1.0 / delta_r)) + 1) * delta_r
    below = below[below < 1.0 - 1e-9 * delta_r]
    above = 1.0 + np.arange(1, len(below) + 2) * delta_r
    above = above[above < top - 1e-9 * delta_r]
    return np.concatenate([below, [1.0], above, [top]])


def _solve_node(args):
    r, config, h = args
    try:
        mesh = triangulate(build_cell_boundary(r, h=h, config=config))
        return solve_cell(mesh).tau_hat
    except ClogsimError as exc:
        raise type(exc)(f"radius {r:.6g}: {exc}") from exc


def _monotone_violation(radii, tau):
    """Index of the worst uptick beyond MONO_RTOL, or None."""
    rise = tau[1:] - tau[:-1] * (1.0 + MONO_RTOL)
    worst = int(np.argmax(rise))
    return worst if rise[worst] > 0.0 else None


def _solve_grid(radii, config, h, n_jobs):
    jobs = [(float(r), config, h) for r in radii]
    if n_jobs == 1:
        return np.array([_solve_node(job) for job in jobs])
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return np.array(list(pool.map(_solve_node, jobs)))


def build_table(
    config,
    delta_r: float = 0.02,
    h: float = 0.05,
    n_jobs: int | None = None,
) -> CoeffTable:
    """Solve the cell problem on the radius partition, in parallel.

    n_jobs=1 solves serially in-process; otherwise a process pool covers
    the radii.  If the sampled multiplier rises between consecutive
    nodes by more than MONO_RTOL relative, the whole grid is re-solved
    once at h/2; a second violation raises.
    """
    config = MicroConfig.parse(config)
    if not 0.0 < delta_r <= 0.1:
        raise ConfigError(f"delta_r must lie in (0, 0.1], got {delta_r:g}")
    if h <= 0.0:
        raise ConfigError(f"mesh size must be positive, got {h:g}")
    if n_jobs is None:
        n_jobs = os.cpu_count() or 1
    radii = _radius_grid(delta_r)
    tau = _solve_grid(radii, config, h, n_jobs)
    if _monotone_violation(radii, tau) is not None:
        h /= 2.0
        tau = _solve_grid(radii, config, h, n_jobs)
        bad = _monotone_violation(radii, tau)
        if bad is not None:
            raise CellSolveError(
                "tabulated multiplier is not non-increasing even after mesh "
                f"refinement: tau({radii[bad]:.4g}) = {tau[bad]:.6g} -> "
                f"tau({radii[bad + 1]:.4g}) = {tau[bad + 1]:.6g}"
            )
    return CoeffTable(config=config, radii=radii, tau=tau, h_used=h, tol=SOLVER_TOL)


def interpolate_tau(table: CoeffTable, r):
    """Piecewise-linear tau at radius r, scalar or array.

    Exact at nodes; beyond the last node the value clamps, since such a
    cell is about to clog and gets frozen by the macro solver.  Radii
    below the first node are outside the tabulated range and raise.
    """
    arr = np.asarray(r, dtype=np.float64)
    if np.any(arr < table.radii[0] - 1e-12):
        raise GeometryDomainError(
            f"radius below the first table node {table.radii[0]:g}"
        )
    out = np.interp(arr, table.radii, table.tau)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def save(table: CoeffTable, path) -> None:
    """Write the table as versioned plain text, full double precision."""
    lines = [
        f"{_MAGIC} {FORMAT_VERSION}",
        f"config {table.config.value}",
        f"h {table.h_used:.17g}",
        f"tol {table.tol:.17g}",
    ]
    lines.extend(
        f"{r:.17g} {t:.17g}" for r, t in zip(table.radii, table.tau)
    )
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def load(path, expect_config=None) -> CoeffTable:
    """Read a table written by save.

    expect_config, when given, is the configuration the simulation runs
    with; a table built for the other configuration is refused.
    """
    with open(path) as handle:
        raw = [ln for ln in handle.read().split("\n") if ln.strip()]
    if not raw or raw[0].split()[0] != _MAGIC:
        raise TableFormatError(f"not a coefficient table: {path}")
    version = raw[0].split()[1:]
    if version != [str(FORMAT_VERSION)]:
        raise TableFormatError(
            f"unsupported table format version {' '.join(version)!r}"
        )
    header = {}
    body = []
    for ln in raw[1:]:
        parts = ln.split()
        if parts[0] in ("config", "h", "tol") and len(parts) == 2 and not body:
            header[parts[0]] = parts[1]
        elif len(parts) == 2:
            body.append(parts)
        else:
            raise TableFormatError(f"malformed table line: {ln!r}")
    if set(header) != {"config", "h", "tol"}:
        raise TableFormatError(
            f"table header incomplete, found {sorted(header)}"
        )
    try:
        config = MicroConfig.parse(header["config"])
        h_used = float(header["h"])
        tol = float(header["tol"])
        data = np.array([[float(a), float(b)] for a, b in body])
    except (ValueError, GeometryDomainError) as exc:
        raise TableFormatError(f"malformed table data: {exc}") from exc
    if expect_config is not None and config is not MicroConfig.parse(expect_config):
        raise TableFormatError(
            f"table was built for configuration {config.value}, "
            f"simulation uses {MicroConfig.parse(expect_config).value}"
        )
    if len(data) < 2:
        raise TableFormatError("table holds fewer than two nodes")
    try:
        return CoeffTable(
            config=config, radii=data[:, 0], tau=data[:, 1], h_used=h_used, tol=tol
        )
    except ConfigError as exc:
        raise TableFormatError(str(exc)) from exc
