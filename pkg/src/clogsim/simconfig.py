"""Run configuration: flat key-value files parsed into a validated bundle.

The file format is ini-style sections with comma-separated arrays, e.g.

    [species]
    diff = 0.3, 0.5, 0.99
    adsorption = 0.9, 0.5, 0.3
    desorption = 1, 1, 1
    agg_efficiency = 0.1
    collision_kernel = 100

Matrix-valued keys accept a single scalar (constant matrix) or N*N
row-major values.  The inlet key u_b accepts `none` for an insulated
domain with zero-flux at both ends.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import MicroConfig
from .kinetics import LossMode, SpeciesParams

PROFILE_NAMES = ("constant", "quad", "normal", "uniform")

_REQUIRED = object()


@dataclass(frozen=True)
class RadiusProfile:
    """Named initial-radius profile with its shape parameters.

    constant: r(x) = value
    quad:     r(x) = coeff * x**2
    normal:   nodewise normal(mu, sqrt(sigma2)) draws, clamped
    uniform:  nodewise uniform draws on [0, sqrt(2)], clamped
    """

    name: str
    value: float = 0.1
    coeff: float = 1.0
    mu: float = 0.3
    sigma2: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "name", str(self.name).strip().lower())
        if self.name not in PROFILE_NAMES:
            raise ConfigError(
                f"unknown radius profile {self.name!r}, "
                f"expected one of {', '.join(PROFILE_NAMES)}"
            )
        if self.value < 0.0 or self.coeff < 0.0:
            raise ConfigError("radius profile parameters must be nonnegative")
        if self.sigma2 <= 0.0:
            raise ConfigError("radius profile variance must be positive")


@dataclass(frozen=True)
class SimConfig:
    """Everything one simulation run needs, validated on construction."""

    species: SpeciesParams
    micro_config: MicroConfig
    M: int
    dt: float
    T: float
    snapshot_dt: float
    u_b: "np.ndarray | None"
    t0: float
    u_a: np.ndarray
    v_a: float
    r_profile: RadiusProfile
    seed: "int | None" = None
    table_path: "str | None" = None
    table_delta_r: float = 0.02
    table_h: float = 0.05
    out_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(
            self, "micro_config", MicroConfig.parse(self.micro_config)
        )
        n = self.species.n_classes
        if int(self.M) != self.M or self.M < 2:
            raise ConfigError(f"M must be an integer >= 2, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        for label, val in (("dt", self.dt), ("T", self.T),
                           ("snapshot_dt", self.snapshot_dt)):
            if not val > 0.0:
                raise ConfigError(f"{label} must be positive, got {val}")
        if self.t0 < 0.0:
            raise ConfigError(f"t0 must be nonnegative, got {self.t0}")
        if self.u_b is not None:
            u_b = np.asarray(self.u_b, dtype=np.float64).copy()
            if u_b.shape != (n,) or np.any(u_b < 0.0):
                raise ConfigError(
                    f"u_b needs {n} nonnegative values, got {self.u_b}"
                )
            u_b.setflags(write=False)
            object.__setattr__(self, "u_b", u_b)
        u_a = np.asarray(self.u_a, dtype=np.float64).copy()
        if u_a.shape != (n,) or np.any(u_a < 0.0):
            raise ConfigError(f"u_a needs {n} nonnegative values, got {self.u_a}")
        u_a.setflags(write=False)
        object.__setattr__(self, "u_a", u_a)
        if self.v_a < 0.0:
            raise ConfigError(f"v_a must be nonnegative, got {self.v_a}")
        if not isinstance(self.r_profile, RadiusProfile):
            raise ConfigError("r_profile must be a RadiusProfile")
        if self.table_path is not None and not os.path.isfile(self.table_path):
            raise ConfigError(f"coefficient table not found: {self.table_path}")
        if not 0.0 < self.table_delta_r <= 0.1 or self.table_h <= 0.0:
            raise ConfigError("invalid table build parameters")


def _get(parser, section, key, default=_REQUIRED):
    if parser.has_option(section, key):
        return parser.get(section, key).strip()
    if default is _REQUIRED:
        raise ConfigError(f"missing config key [{section}] {key}")
    return default


def _floats(text, what):
    try:
        return np.array([float(tok) for tok in text.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None


def _matrix(text, n, what):
    vals = _floats(text, what)
    if vals.size == 1:
        return np.full((n, n), float(vals[0]))
    if vals.size == n * n:
        return vals.reshape(n, n)
    raise ConfigError(
        f"{what}: expected 1 or {n * n} values, got {vals.size}"
    )


def _bool(text, what):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


def load_config(path) -> SimConfig:
    """Parse a run configuration file.  Raises ConfigError on any defect."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    for section in ("species", "domain", "boundary", "initial"):
        if not parser.has_section(section):
            raise ConfigError(f"config file missing section [{section}]")

    diff = _floats(_get(parser, "species", "diff"), "diff")
    n = len(diff)
    try:
        species = SpeciesParams(
            diff=diff,
            adsorption=_floats(_get(parser, "species", "adsorption"), "adsorption"),
            desorption=_floats(_get(parser, "species", "desorption"), "desorption"),
            agg_efficiency=_matrix(
                _get(parser, "species", "agg_efficiency"), n, "agg_efficiency"
            ),
            collision_kernel=_matrix(
                _get(parser, "species", "collision_kernel"), n, "collision_kernel"
            ),
            kappa=float(_get(parser, "species", "kappa", "1.0")),
            alpha=float(_get(parser, "species", "alpha", "1.0")),
            alpha_curv=float(_get(parser, "species", "alpha_curv", "0.0")),
            growth_only=_bool(
                _get(parser, "species", "growth_only", "false"), "growth_only"
            ),
            loss_mode=LossMode.parse(
                _get(parser, "species", "loss_mode", "full")
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"bad species value: {exc}") from exc

    u_b_text = _get(parser, "boundary", "u_b")
    u_b = None if u_b_text.lower() == "none" else _floats(u_b_text, "u_b")

    profile = RadiusProfile(
        name=_get(parser, "initial", "r_profile"),
        value=float(_get(parser, "initial", "r_value", "0.1")),
        coeff=float(_get(parser, "initial", "r_coeff", "1.0")),
        mu=float(_get(parser, "initial", "r_mu", "0.3")),
        sigma2=float(_get(parser, "initial", "r_sigma2", "0.8")),
    )
    seed_text = _get(parser, "initial", "seed", "")
    table_path = _get(parser, "table", "path", "") if parser.has_section("table") else ""

    try:
        return SimConfig(
            species=species,
            micro_config=_get(parser, "domain", "micro_config"),
            M=int(_get(parser, "domain", "m")),
            dt=float(_get(parser, "domain", "dt")),
            T=float(_get(parser, "domain", "t")),
            snapshot_dt=float(_get(parser, "domain", "snapshot_dt")),
            u_b=u_b,
            t0=float(_get(parser, "boundary", "t0", "0.0")),
            u_a=_floats(_get(parser, "initial", "u_a"), "u_a"),
            v_a=float(_get(parser, "initial", "v_a", "0.0")),
            r_profile=profile,
            seed=int(seed_text) if seed_text else None,
            table_path=table_path or None,
            table_delta_r=float(
                _get(parser, "table", "delta_r", "0.02")
                if parser.has_section("table") else "0.02"
            ),
            table_h=float(
                _get(parser, "table", "h", "0.05")
                if parser.has_section("table") else "0.05"
            ),
            out_dir=(
                _get(parser, "output", "dir", "out")
                if parser.has_section("output") else "out"
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
