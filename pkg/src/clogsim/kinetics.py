"""Reaction and exchange kinetics of the colloidal size classes.

Size classes i = 1..N aggregate pairwise (class i + class j -> class
i+j) with symmetric efficiency and collision matrices; classes beyond N
are not tracked.  Mobile mass exchanges with the deposited species v via
a linear adsorption/desorption law a_i u_i - beta_i v, and the deposit
feeds the growth of the grain radius through the rate coefficient m(r)
from :mod:`clogsim.geometry`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError
from .geometry import MicroConfig, radius_rate_coefficient


class LossMode(enum.Enum):
    """Treatment of aggregation partners that would exceed class N.

    FULL counts every collision as a loss for both partners, so mass
    leaks into untracked clusters larger than N.  MASS_CONSERVING caps
    the loss sums at partner index N - k, which makes sum_k k*R_k vanish
    identically.
    """

    FULL = "full"
    MASS_CONSERVING = "mass_conserving"

    @classmethod
    def parse(cls, label: str) -> "LossMode":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise ConfigError(
                f"unknown loss mode {label!r}, expected 'full' or 'mass_conserving'"
            ) from None


def _sym_matrix(m, n: int, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(m, dtype=np.float64)
    if arr.shape == ():
        arr = np.full((n, n), float(arr))
    if arr.shape != (n, n):
        raise ConfigError(f"{name} must be an {n}x{n} matrix, got shape {arr.shape}")
    if np.any(arr < 0.0):
        raise ConfigError(f"{name} must be elementwise nonnegative")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise ConfigError(f"{name} must be symmetric")
    arr.setflags(write=False)
    return arr


def _vector(v, n: int, name: str, positive: bool = False) -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.shape == ():
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have {n} entries, got shape {arr.shape}")
    if positive and np.any(arr <= 0.0):
        raise ConfigError(f"{name} must be strictly positive")
    if not positive and np.any(arr < 0.0):
        raise ConfigError(f"{name} must be nonnegative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpeciesParams:
    """Physical parameters of the N-class colloid system.

    diff             molecular diffusivities d_i (scaled by kappa and the
                     tortuosity to give the effective coefficients)
    adsorption       deposition coefficients a_i
    desorption       release coefficients beta_i; their sum is the decay
                     rate of the deposited species
    agg_efficiency   symmetric matrix alpha_ij of sticking efficiencies
    collision_kernel symmetric matrix beta_ij of collision frequencies
    kappa            surface Thiele modulus scaling the diffusion term
    alpha            deposited-mass to grain-volume conversion constant
    alpha_curv       curvature correction strength in the radius law
    growth_only      clamp deposition and radius rates at zero from below
    loss_mode        aggregation loss bookkeeping, see LossMode
    """

    diff: np.ndarray
    adsorption: np.ndarray
    desorption: np.ndarray
    agg_efficiency: np.ndarray
    collision_kernel: np.ndarray
    kappa: float = 1.0
    alpha: float = 1.0
    alpha_curv: float = 0.0
    growth_only: bool = False
    loss_mode: LossMode = LossMode.FULL
    n_classes: int = field(init=False)

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.diff, dtype=np.float64))
        n = d.shape[0]
        object.__setattr__(self, "n_classes", n)
        object.__setattr__(self, "diff", _vector(d, n, "diff", positive=True))
        object.__setattr__(self, "adsorption", _vector(self.adsorption, n, "adsorption"))
        object.__setattr__(self, "desorption", _vector(self.desorption, n, "desorption"))
        object.__setattr__(
            self, "agg_efficiency", _sym_matrix(self.agg_efficiency, n, "agg_efficiency")
        )
        object.__setattr__(
            self,
            "collision_kernel",
            _sym_matrix(self.collision_kernel, n, "collision_kernel"),
        )
        if self.kappa <= 0.0:
            raise ConfigError("kappa must be strictly positive")
        if self.alpha <= 0.0:
            raise ConfigError("alpha must be strictly positive")
        if self.alpha_curv < 0.0:
            raise ConfigError("alpha_curv must be nonnegative")

    @property
    def beta_total(self) -> float:
        """Decay rate of the deposit, the sum of the release coefficients."""
        return float(np.sum(self.desorption))


def smoluchowski_rate(u, params: SpeciesParams) -> np.ndarray:
    """Aggregation rates R_k(u) for one state or a batch of states.

    u has shape (N,) or (..., N); the result mirrors it.  Gain at class
    k collects all ordered pairs i + j = k weighted by half the product
    of efficiency, kernel and the two concentrations; loss follows the
    configured bookkeeping mode.
    """
    n = params.n_classes
    arr = np.ascontiguousarray(u, dtype=np.float64)
    if arr.shape[-1:] != (n,):
        raise ConfigError(f"state must end with {n} classes, got shape {arr.shape}")
    flat = arr.reshape(-1, n)
    out = np.empty_like(flat)
    _kernels.smoluchowski_rates(
        flat,
        params.agg_efficiency,
        params.collision_kernel,
        params.loss_mode is LossMode.FULL,
        out,
    )
    return out.reshape(arr.shape)


def exchange_rate(u, v, params: SpeciesParams) -> np.ndarray:
    """Per-class exchange density a_i u_i - beta_i v (positive = deposits)."""
    arr = np.asarray(u, dtype=np.float64)
    vv = np.asarray(v, dtype=np.float64)
    return params.adsorption * arr - params.desorption * vv[..., None]


def deposition_rhs(u, v, params: SpeciesParams) -> np.ndarray:
    """Net deposition rate sum_i a_i u_i - beta v of the immobile species."""
    arr = np.asarray(u, dtype=np.float64)
    vv = np.asarray(v, dtype=np.float64)
    rate = arr @ params.adsorption - params.beta_total * vv
    if params.growth_only:
        rate = np.maximum(rate, 0.0)
    return rate


def radius_rhs(r, u, v, config: MicroConfig, params: SpeciesParams) -> np.ndarray:
    """Growth rate of the grain radius, m(r)*(sum a_i u_i - beta v) - a_c/r."""
    arr = np.asarray(u, dtype=np.float64)
    vv = np.asarray(v, dtype=np.float64)
    rr = np.asarray(r, dtype=np.float64)
    core = arr @ params.adsorption - params.beta_total * vv
    m = np.asarray(radius_rate_coefficient(rr, config, params.alpha))
    rate = m * core
    if params.alpha_curv > 0.0:
        rate = rate - params.alpha_curv / np.maximum(rr, 1e-12)
    if params.growth_only:
        rate = np.maximum(rate, 0.0)
    return rate
