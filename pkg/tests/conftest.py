"""Session-wide fixtures: coefficient tables are expensive, build once."""

import numpy as np
import pytest

from clogsim.coefftable import build_table


@pytest.fixture(scope="session")
def table_a_coarse():
    # 16 radius nodes at h=0.1: plenty for solver-level tests that only
    # need a valid monotone table, ~2 s to build
    return build_table("A", delta_r=0.1, h=0.1)


@pytest.fixture(scope="session")
def table_a():
    return build_table("A", delta_r=0.02, h=0.05)


@pytest.fixture(scope="session")
def table_b():
    return build_table("B", delta_r=0.02, h=0.05)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240818)
