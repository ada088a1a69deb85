import numpy as np
import pytest

from blowlab.params import validate
from blowlab.fields import RadialGrid
from blowlab.solver import SolverConfig, profile_seeded_field, run_until_blowup


@pytest.fixture(scope="session")
def default_params():
    """The laboratory's default instance: p=4, q=3, mu=0.1, dim=1."""
    return validate(p=4.0, q=3.0, mu=0.1, dim=1)


@pytest.fixture(scope="session")
def heat_params():
    """Same exponents with the perturbation switched off."""
    return validate(p=4.0, q=3.0, mu=0.0, dim=1)


@pytest.fixture(scope="session")
def small_run(default_params):
    """Coarse but complete blow-up run (M=256, cap 1e4); seconds, not minutes."""
    grid = RadialGrid(R=1.0, M=256, dim=1)
    u0 = profile_seeded_field(grid, default_params, t_star=0.01)
    config = SolverConfig(grid=grid, params=default_params,
                          blowup_cap=1e4, max_steps=200_000)
    return run_until_blowup(u0, config)


@pytest.fixture(scope="session")
def acceptance_run(default_params):
    """The desk-scale reference run: p=4, q=3, N=1, mu=0.1, profile seed with
    t_star=0.01, M=4096, R=1, cap 1e8.  Takes a couple of minutes; shared by
    every acceptance criterion that inspects the real simulation."""
    grid = RadialGrid(R=1.0, M=4096, dim=1)
    u0 = profile_seeded_field(grid, default_params, t_star=0.01)
    config = SolverConfig(grid=grid, params=default_params)
    return run_until_blowup(u0, config)


def make_rng(seed=0):
    return np.random.default_rng(seed)
