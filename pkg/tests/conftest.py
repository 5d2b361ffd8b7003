import numpy as np
import pytest

from mlf.complexify import ComplexificationMap, scan_delta
from mlf.rearrange import blend, search_constants
from mlf.scenarios import build_scenario


@pytest.fixture(scope="session")
def sphere():
    return build_scenario("sphere2-height")


@pytest.fixture(scope="session")
def sphere_cm(sphere):
    return ComplexificationMap(sphere.ms)


@pytest.fixture(scope="session")
def sphere_pipeline(sphere, sphere_cm):
    """(scan report, constants report, assembled Lyapunov) for sphere2-height."""
    ds = scan_delta(sphere_cm, np.random.default_rng(5),
                    n_interior=20000, n_sphere=6000)
    cr = search_constants(sphere_cm, sphere.slope, ds.delta,
                          np.random.default_rng(6), n_per_region=20000)
    al = blend(sphere_cm, sphere.slope, cr.cutoff)
    return ds, cr, al


@pytest.fixture(scope="session")
def torus_tilted():
    return build_scenario("torus-tilted")


@pytest.fixture(scope="session")
def torus_upright():
    return build_scenario("torus-upright")


@pytest.fixture(scope="session")
def quadric21():
    return build_scenario("quadric-n2-k1")
