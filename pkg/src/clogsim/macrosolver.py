"""Linearly-implicit stepper for the upscaled transport-deposition system.

Hat functions on a uniform grid over [0, 1] discretize the mobile
species; the deposit and the grain radius are nodal surface quantities
and evolve as pointwise ODEs.  One step solves mobile species and
deposit together: the deposit update is scalar per node, so it is
eliminated into the species systems, which leaves one block-tridiagonal
solve with an N x N block per node, and the deposit is recovered
afterwards.  Geometry-dependent matrices are frozen at the step start;
aggregation enters explicitly.

A node clogs when its void area falls to A_MIN.  From then on its
radius and its exchange weight stay frozen; the diffusion coefficient
keeps using the table value clamped at the last node, so the clogged
region is inert rather than absorbing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .coefftable import CoeffTable, build_table, interpolate_tau, load as load_table
from .errors import ConfigError, SolverError
from .geometry import SQRT2, interface_length, void_area
from .kinetics import SpeciesParams, radius_rhs, smoluchowski_rate
from .observables import detect_clogs
from .simconfig import RadiusProfile, SimConfig

A_MIN = 1e-6
DR_MAX = 0.05
MAX_HALVINGS = 10

# 2-point Gauss rule on the unit element, as hat-function values
# (phi_left, phi_right) at each quadrature point; weights are 1/2 each
_GAUSS_S = (0.5 * (1.0 - 1.0 / math.sqrt(3.0)), 0.5 * (1.0 + 1.0 / math.sqrt(3.0)))


@dataclass(frozen=True)
class MacroGrid:
    """Uniform nodes x_j = j/M carrying one hat function each."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ConfigError(f"grid needs at least 2 elements, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)


def _frozen(arr, dtype=np.float64):
    out = np.asarray(arr, dtype=dtype).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MacroState:
    """Nodal coefficients of one time level; arrays are immutable.

    a_u holds the N mobile species row-wise, shape (N, M+1); a_v and
    a_r are the nodal deposit and radius.  dt_used, clipped and
    rejections describe the step that produced this state.
    """

    t: float
    a_u: np.ndarray
    a_v: np.ndarray
    a_r: np.ndarray
    clogged: np.ndarray
    dt_used: float = 0.0
    clipped: float = 0.0
    rejections: int = 0

    def __post_init__(self):
        a_u = _frozen(np.atleast_2d(self.a_u))
        a_v = _frozen(self.a_v)
        a_r = _frozen(self.a_r)
        clogged = _frozen(self.clogged, dtype=bool)
        if a_v.ndim != 1 or len(a_v) < 3:
            raise ConfigError("a_v must be a nodal vector on at least 3 nodes")
        for name, arr in (("a_r", a_r), ("clogged", clogged)):
            if arr.shape != a_v.shape:
                raise ConfigError(f"{name} must match the nodal grid shape")
        if a_u.ndim != 2 or a_u.shape[1] != a_v.shape[0]:
            raise ConfigError(
                f"a_u must be (N, M+1), got {a_u.shape} against {a_v.shape}"
            )
        if not math.isfinite(self.t):
            raise ConfigError("state time must be finite")
        if min(a_u.min(initial=0.0), a_v.min(initial=0.0)) < -1e-10:
            raise ConfigError("concentrations must be nonnegative")
        if np.any(a_r < 0.0) or np.any(a_r > SQRT2 + 1e-12):
            raise ConfigError("radii must lie in [0, sqrt(2)]")
        object.__setattr__(self, "a_u", a_u)
        object.__setattr__(self, "a_v", a_v)
        object.__setattr__(self, "a_r", a_r)
        object.__setattr__(self, "clogged", clogged)

    @property
    def n_species(self) -> int:
        return self.a_u.shape[0]

    @property
    def grid(self) -> MacroGrid:
        return MacroGrid(self.a_v.shape[0] - 1)


@dataclass(frozen=True)
class BoundarySchedule:
    """Inlet values held until the shutoff time, then dropped to zero.

    u_b None means an insulated domain: no value is imposed at x=0 and
    both ends carry the natural zero-flux condition.
    """

    u_b: "np.ndarray | None"
    t0: float = 0.0

    def __post_init__(self):
        if self.t0 < 0.0:
            raise ConfigError(f"shutoff time must be nonnegative, got {self.t0}")
        if self.u_b is not None:
            object.__setattr__(self, "u_b", _frozen(self.u_b))

    def inlet(self, t: float) -> "np.ndarray | None":
        """Dirichlet vector for the step starting at t, or None."""
        if self.u_b is None:
            return None
        return self.u_b if t < self.t0 else np.zeros_like(self.u_b)


class RunStatus(Enum):
    COMPLETED = "completed"
    ALL_CLOGGED = "all_clogged"


@dataclass
class RunResult:
    status: RunStatus
    snapshots: list
    events: list
    clipped_mass: float
    table: CoeffTable


def assemble_mass(grid: MacroGrid) -> sp.csr_matrix:
    """Hat-function mass matrix, tridiagonal h/6 * [1, 4, 1]."""
    h = grid.h
    main = np.full(grid.M + 1, 4.0 * h / 6.0)
    main[0] = main[-1] = 2.0 * h / 6.0
    off = np.full(grid.M, h / 6.0)
    return sp.diags([off, main, off], [-1, 0, 1]).tocsr()


def _mass_weights(n_nodes: int) -> np.ndarray:
    """Row sums of the mass matrix: trapezoid weights."""
    h = 1.0 / (n_nodes - 1)
    w = np.full(n_nodes, h)
    w[0] = w[-1] = h / 2.0
    return w


def _gauss_radii(a_r: np.ndarray) -> np.ndarray:
    """Radius at the two Gauss points of every element, shape (M, 2)."""
    left, right = a_r[:-1], a_r[1:]
    return np.stack(
        [(1.0 - s) * left + s * right for s in _GAUSS_S], axis=1
    )


def _stiffness_weights(state: MacroState, table: CoeffTable) -> np.ndarray:
    """Per-element mean of tau over the Gauss points, shape (M,)."""
    r_g = _gauss_radii(state.a_r)
    return interpolate_tau(table, r_g).mean(axis=1)


def _exchange_theta(state: MacroState, config) -> np.ndarray:
    """Nodal interface-to-void ratio L/A, zero at clogged nodes."""
    theta = np.zeros_like(state.a_r)
    live = ~state.clogged
    if np.any(live):
        r = state.a_r[live]
        theta[live] = interface_length(r, config) / void_area(r, config)
    return theta


def _tridiag_from_theta(theta: np.ndarray, h: float):
    """Gauss-integrated mass-like matrix entries for a nodal weight.

    Returns (sub, diag, sup) arrays of the tridiagonal; exact for the
    linearly interpolated weight since the integrand is cubic.
    """
    t0, t1 = theta[:-1], theta[1:]
    e_ll = h * (t0 / 4.0 + t1 / 12.0)
    e_lr = h * (t0 + t1) / 12.0
    e_rr = h * (t0 / 12.0 + t1 / 4.0)
    diag = np.zeros(len(theta))
    diag[:-1] += e_ll
    diag[1:] += e_rr
    return e_lr.copy(), diag, e_lr.copy()


def assemble_stiffness(state: MacroState, table: CoeffTable,
                       params: SpeciesParams) -> list:
    """Per-species diffusion stiffness matrices kappa*d_i*tau(r(x))."""
    h = state.grid.h
    omega = _stiffness_weights(state, table)
    diag = np.zeros(len(state.a_r))
    diag[:-1] += omega / h
    diag[1:] += omega / h
    off = -omega / h
    base = sp.diags([off, diag, off], [-1, 0, 1]).tocsr()
    return [params.kappa * d * base for d in params.diff]


def assemble_exchange(state: MacroState, params: SpeciesParams,
                      config=None) -> sp.csr_matrix:
    """Exchange mass matrix weighted by the nodal surface ratio L/A."""
    if config is None:
        raise ConfigError("micro configuration required")
    sub, diag, sup = _tridiag_from_theta(
        _exchange_theta(state, config), state.grid.h
    )
    return sp.diags([sub, diag, sup], [-1, 0, 1]).tocsr()


def assemble_reaction(state: MacroState, params: SpeciesParams) -> np.ndarray:
    """Aggregation load vector per species, shape (N, M+1).

    The reaction of the interpolated state is quadratic per element, so
    the 2-point Gauss rule integrates the hat-weighted load exactly.
    """
    h = state.grid.h
    u = state.a_u.T
    out = np.zeros_like(u)
    for s in _GAUSS_S:
        u_g = (1.0 - s) * u[:-1] + s * u[1:]
        rate = smoluchowski_rate(u_g, params)
        out[:-1] += 0.5 * h * (1.0 - s) * rate
        out[1:] += 0.5 * h * s * rate
    return out.T


def _solve_coupled(state, dt, theta_tri, omega, b_r, inlet, params):
    """One implicit update of (a_u, a_v) with the deposit eliminated.

    Species systems couple only through the deposit, whose nodal update
    (1 + dt*beta) v' = v + dt * sum_i a_i u_i' is substituted into each
    species equation before the block-tridiagonal solve.
    """
    n_nodes = state.a_v.shape[0]
    n = state.n_species
    h = state.grid.h
    beta = params.beta_total
    ads, des = params.adsorption, params.desorption
    shrink = dt / (1.0 + dt * beta)

    c_sub, c_diag, c_sup = theta_tri
    k_diag = np.zeros(n_nodes)
    k_diag[:-1] += omega / h
    k_diag[1:] += omega / h
    k_off = -omega / h
    m_diag = np.full(n_nodes, 4.0 * h / 6.0)
    m_diag[0] = m_diag[-1] = 2.0 * h / 6.0
    m_off = np.full(n_nodes - 1, h / 6.0)

    cross = np.outer(des, ads)  # beta_i * a_k coupling through the deposit
    eye = np.eye(n)

    diag = np.zeros((n_nodes, n, n))
    sub = np.zeros((n_nodes, n, n))
    sup = np.zeros((n_nodes, n, n))
    scalar_diag = m_diag[:, None] + dt * (
        params.kappa * np.outer(k_diag, params.diff)
        + np.outer(c_diag, ads)
    )
    diag[:] = eye[None, :, :] * scalar_diag[:, None, :]
    diag -= dt * shrink * c_diag[:, None, None] * cross[None, :, :]
    scalar_off_sub = m_off[:, None] + dt * (
        params.kappa * np.outer(k_off, params.diff) + np.outer(c_sub, ads)
    )
    sub[1:] = eye[None, :, :] * scalar_off_sub[:, None, :]
    sub[1:] -= dt * shrink * c_sub[:, None, None] * cross[None, :, :]
    scalar_off_sup = m_off[:, None] + dt * (
        params.kappa * np.outer(k_off, params.diff) + np.outer(c_sup, ads)
    )
    sup[:-1] = eye[None, :, :] * scalar_off_sup[:, None, :]
    sup[:-1] -= dt * shrink * c_sup[:, None, None] * cross[None, :, :]

    u_n = state.a_u.T  # (nodes, N)
    mass_u = m_diag[:, None] * u_n
    mass_u[:-1] += m_off[:, None] * u_n[1:]
    mass_u[1:] += m_off[:, None] * u_n[:-1]
    s_n = state.a_v / (1.0 + dt * beta)
    c_s = c_diag * s_n
    c_s[:-1] += c_sup * s_n[1:]
    c_s[1:] += c_sub * s_n[:-1]
    rhs = mass_u + dt * b_r.T + dt * c_s[:, None] * des[None, :]

    if inlet is not None:
        diag[0] = eye
        sup[0] = 0.0
        rhs[0] = inlet

    try:
        u_next = _kernels.block_tridiag_solve(sub, diag, sup, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"implicit block solve failed: {exc}") from exc
    if not np.all(np.isfinite(u_next)):
        raise SolverError("implicit block solve produced non-finite values")
    v_next = s_n + shrink * (u_next @ ads)
    return u_next.T, v_next


def step(state: MacroState, dt: float, table: CoeffTable,
         params: SpeciesParams, schedule: "BoundarySchedule | None" = None,
         r_min: "float | None" = None) -> MacroState:
    """Advance one time level, halving dt while radii move too fast.

    Geometry matrices are frozen at the entry state; the reaction is
    explicit.  A trial step is rejected when any nodal radius increment
    (after clamping) exceeds DR_MAX, and retried at half the step, up
    to MAX_HALVINGS times.  Negative concentration parts are clipped to
    zero and the clipped mass is recorded on the returned state.
    """
    if dt <= 0.0:
        raise ConfigError(f"dt must be positive, got {dt}")
    config = table.config
    if r_min is None:
        r_min = float(table.radii[0])
    theta_tri = _tridiag_from_theta(
        _exchange_theta(state, config), state.grid.h
    )
    omega = _stiffness_weights(state, table)
    b_r = assemble_reaction(state, params)
    inlet = None if schedule is None else schedule.inlet(state.t)

    live = ~state.clogged
    weights = _mass_weights(state.a_v.shape[0])
    classes = np.arange(1, state.n_species + 1, dtype=np.float64)

    trial = dt
    for halving in range(MAX_HALVINGS + 1):
        u_next, v_next = _solve_coupled(
            state, trial, theta_tri, omega, b_r, inlet, params
        )
        clip_u = np.minimum(u_next, 0.0)
        clip_v = np.minimum(v_next, 0.0)
        clipped = float(
            classes @ (np.abs(clip_u) @ weights) + weights @ np.abs(clip_v)
        )
        u_next = np.maximum(u_next, 0.0)
        v_next = np.maximum(v_next, 0.0)

        dr = trial * radius_rhs(state.a_r, u_next.T, v_next, config, params)
        r_next = np.where(live, state.a_r + dr, state.a_r)
        r_next = np.clip(r_next, r_min, SQRT2)
        if np.max(np.abs(r_next - state.a_r)) <= DR_MAX:
            break
        trial /= 2.0
    else:
        raise SolverError(
            f"radius increment still above {DR_MAX} after {MAX_HALVINGS} "
            f"step halvings at t={state.t:.6g}"
        )

    clogged = state.clogged | (void_area(r_next, config) <= A_MIN)
    return MacroState(
        t=state.t + trial,
        a_u=u_next,
        a_v=v_next,
        a_r=r_next,
        clogged=clogged,
        dt_used=trial,
        clipped=clipped,
        rejections=halving,
    )


def radius_profile(profile: RadiusProfile, M: int,
                   seed: "int | None" = None,
                   r_min: float = 0.02) -> np.ndarray:
    """Nodal initial radii for a named profile, clamped to the usable range."""
    x = np.linspace(0.0, 1.0, M + 1)
    if profile.name == "constant":
        r = np.full(M + 1, profile.value)
    elif profile.name == "quad":
        r = profile.coeff * x * x
    elif profile.name == "normal":
        rng = np.random.default_rng(seed)
        r = rng.normal(profile.mu, math.sqrt(profile.sigma2), M + 1)
    elif profile.name == "uniform":
        rng = np.random.default_rng(seed)
        r = rng.uniform(0.0, SQRT2, M + 1)
    else:  # pragma: no cover - RadiusProfile already validates
        raise ConfigError(f"unknown radius profile {profile.name!r}")
    return np.clip(r, r_min, SQRT2 - 1e-3)


def initial_state(config: SimConfig, table: CoeffTable) -> MacroState:
    r0 = radius_profile(
        config.r_profile, config.M, config.seed, float(table.radii[0])
    )
    a_u = np.repeat(config.u_a[:, None], config.M + 1, axis=1)
    return MacroState(
        t=0.0,
        a_u=a_u,
        a_v=np.full(config.M + 1, config.v_a),
        a_r=r0,
        clogged=void_area(r0, config.micro_config) <= A_MIN,
    )


def resolve_table(config: SimConfig) -> CoeffTable:
    """Load the table named by the config, or build one to its spec."""
    if config.table_path is not None:
        return load_table(config.table_path, expect_config=config.micro_config)
    return build_table(
        config.micro_config, config.table_delta_r, config.table_h
    )


def run(config: SimConfig, table: "CoeffTable | None" = None) -> RunResult:
    """Advance from t=0 to T, collecting snapshots and clog events.

    Snapshots are emitted at t=0, at every crossing of the configured
    cadence, and at the final time.  The run ends early once every node
    is clogged.
    """
    if table is None:
        table = resolve_table(config)
    if table.config is not config.micro_config:
        raise ConfigError(
            f"table configuration {table.config.value} does not match "
            f"the run configuration {config.micro_config.value}"
        )
    params = config.species
    schedule = (
        None if config.u_b is None
        else BoundarySchedule(config.u_b, config.t0)
    )
    state = initial_state(config, table)
    snapshots = [state]
    events = []
    clipped_total = 0.0
    next_snap = config.snapshot_dt
    status = RunStatus.COMPLETED
    while state.t < config.T - 1e-12:
        dt_step = min(config.dt, config.T - state.t)
        try:
            new = step(state, dt_step, table, params, schedule)
        except SolverError as exc:
            raise SolverError(f"t={state.t:.6g}: {exc}") from exc
        events.extend(detect_clogs(state, new))
        clipped_total += new.clipped
        if new.t >= next_snap - 1e-12:
            snapshots.append(new)
            while next_snap <= new.t + 1e-12:
                next_snap += config.snapshot_dt
        state = new
        if bool(np.all(state.clogged)):
            status = RunStatus.ALL_CLOGGED
            break
    if snapshots[-1] is not state:
        snapshots.append(state)
    return RunResult(
        status=status,
        snapshots=snapshots,
        events=events,
        clipped_mass=clipped_total,
        table=table,
    )
