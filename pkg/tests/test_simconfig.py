"""Run-configuration parsing: ini round trips, defaults, and rejection paths."""

import numpy as np
import pytest

from clogsim.errors import ConfigError
from clogsim.geometry import MicroConfig
from clogsim.kinetics import LossMode
from clogsim.simconfig import RadiusProfile, SimConfig, load_config

FULL = """\
[species]
diff = 0.3, 0.5, 0.99
adsorption = 0.9, 0.5, 0.3
desorption = 1.0, 1.0, 1.0
agg_efficiency = 0.1
collision_kernel = 100.0
kappa = 2.0
alpha = 0.53
alpha_curv = 0.1
growth_only = true
loss_mode = mass_conserving

[domain]
micro_config = B
M = 40
dt = 2e-3
T = 1.5
snapshot_dt = 0.25

[boundary]
u_b = 1.0, 0.5, 0.25
t0 = 1.0

[initial]
u_a = 0.0, 0.1, 0.0
v_a = 0.05
r_profile = normal
r_mu = 0.3
r_sigma2 = 0.8
seed = 42

[output]
dir = results
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_full_round_trip(tmp_path):
    cfg = load_config(write_cfg(tmp_path, FULL))
    sp = cfg.species
    assert sp.n_classes == 3
    assert np.array_equal(sp.diff, [0.3, 0.5, 0.99])
    assert np.array_equal(sp.adsorption, [0.9, 0.5, 0.3])
    assert np.array_equal(sp.desorption, [1.0, 1.0, 1.0])
    assert np.all(sp.agg_efficiency == 0.1)
    assert np.all(sp.collision_kernel == 100.0)
    assert sp.kappa == 2.0 and sp.alpha == 0.53 and sp.alpha_curv == 0.1
    assert sp.growth_only is True
    assert sp.loss_mode is LossMode.MASS_CONSERVING
    assert cfg.micro_config is MicroConfig.B
    assert cfg.M == 40 and cfg.dt == 2e-3 and cfg.T == 1.5
    assert cfg.snapshot_dt == 0.25
    assert np.array_equal(cfg.u_b, [1.0, 0.5, 0.25])
    assert cfg.t0 == 1.0
    assert np.array_equal(cfg.u_a, [0.0, 0.1, 0.0])
    assert cfg.v_a == 0.05
    assert cfg.r_profile.name == "normal"
    assert cfg.r_profile.mu == 0.3 and cfg.r_profile.sigma2 == 0.8
    assert cfg.seed == 42
    assert cfg.out_dir == "results"


def test_defaults_applied(tmp_path):
    text = FULL.replace("kappa = 2.0\n", "").replace("alpha = 0.53\n", "")
    text = text.replace("alpha_curv = 0.1\n", "").replace("growth_only = true\n", "")
    text = text.replace("loss_mode = mass_conserving\n", "")
    text = text.replace("seed = 42\n", "").replace("[output]\ndir = results\n", "")
    cfg = load_config(write_cfg(tmp_path, text))
    assert cfg.species.kappa == 1.0
    assert cfg.species.alpha == 1.0
    assert cfg.species.alpha_curv == 0.0
    assert cfg.species.growth_only is False
    assert cfg.species.loss_mode is LossMode.FULL
    assert cfg.seed is None
    assert cfg.out_dir == "out"
    assert cfg.table_path is None


def test_no_inlet_parses_to_none(tmp_path):
    cfg = load_config(write_cfg(tmp_path, FULL.replace("u_b = 1.0, 0.5, 0.25", "u_b = none")))
    assert cfg.u_b is None


def test_inline_comments_stripped(tmp_path):
    cfg = load_config(write_cfg(tmp_path, FULL.replace("M = 40", "M = 40  # nodes")))
    assert cfg.M == 40


def test_missing_key_names_the_key(tmp_path):
    text = FULL.replace("diff = 0.3, 0.5, 0.99\n", "")
    with pytest.raises(ConfigError, match=r"\[species\] diff"):
        load_config(write_cfg(tmp_path, text))


def test_missing_section_rejected(tmp_path):
    text = FULL[: FULL.index("[boundary]")] + FULL[FULL.index("[initial]"):]
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, text))


def test_matrix_broadcast_scalar_and_rowmajor(tmp_path):
    nine = ", ".join(str(v) for v in [1, 2, 3, 2, 5, 6, 3, 6, 9])
    cfg = load_config(write_cfg(tmp_path, FULL.replace(
        "agg_efficiency = 0.1", f"agg_efficiency = {nine}")))
    assert np.array_equal(
        cfg.species.agg_efficiency, [[1, 2, 3], [2, 5, 6], [3, 6, 9]]
    )


def test_asymmetric_kernel_rejected(tmp_path):
    nine = ", ".join(str(v) for v in [1, 2, 3, 4, 5, 6, 7, 8, 9])
    with pytest.raises(ConfigError, match="symmetric"):
        load_config(write_cfg(tmp_path, FULL.replace(
            "collision_kernel = 100.0", f"collision_kernel = {nine}")))


def test_species_length_mismatch_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, FULL.replace(
            "adsorption = 0.9, 0.5, 0.3", "adsorption = 0.9, 0.5")))


def test_bad_float_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, FULL.replace("dt = 2e-3", "dt = fast")))


def test_unknown_loss_mode_rejected(tmp_path):
    with pytest.raises(ConfigError, match="loss mode"):
        load_config(write_cfg(tmp_path, FULL.replace(
            "loss_mode = mass_conserving", "loss_mode = lossy")))


def test_unknown_profile_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, FULL.replace(
            "r_profile = normal", "r_profile = sawtooth")))


def test_domain_validation():
    with pytest.raises(ConfigError):
        RadiusProfile(name="normal", sigma2=0.0)
    with pytest.raises(ConfigError):
        RadiusProfile(name="constant", value=-0.1)


@pytest.mark.parametrize("field,bad", [
    ("M = 40", "M = 1"),
    ("dt = 2e-3", "dt = 0"),
    ("T = 1.5", "T = -1"),
    ("snapshot_dt = 0.25", "snapshot_dt = 0"),
    ("t0 = 1.0", "t0 = -0.5"),
    ("v_a = 0.05", "v_a = -0.05"),
])
def test_scalar_bounds_rejected(tmp_path, field, bad):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, FULL.replace(field, bad)))


def test_missing_table_file_rejected(tmp_path):
    text = FULL + "\n[table]\npath = /nonexistent/table.txt\n"
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, text))


def test_table_build_parameters_parsed(tmp_path):
    text = FULL + "\n[table]\ndelta_r = 0.05\nh = 0.1\n"
    cfg = load_config(write_cfg(tmp_path, text))
    assert cfg.table_path is None
    assert cfg.table_delta_r == 0.05
    assert cfg.table_h == 0.1


def test_shipped_base_config_loads():
    cfg = load_config("configs/base.cfg")
    assert cfg.M == 100 and cfg.T == 3.0 and cfg.t0 == 2.0
    assert cfg.micro_config is MicroConfig.A
    assert cfg.species.alpha == 0.53
    assert np.array_equal(cfg.u_b, [1.0, 1.0, 1.0])
    assert cfg.r_profile.name == "constant" and cfg.r_profile.value == 0.1
