"""Shared fixtures.

The large path batches (10^5 paths at the default 2048-step grid) are
expensive, so they are simulated once per session and shared by the law,
entropy, Girsanov, and acceptance tests.
"""

import numpy as np
import pytest

from outail import MixtureDensity, SinePerturbationDensity, TiltDensity
from outail.verify import DEFAULT_R_GRID, simulate_family_batch

N_PATHS = 10**5
STEPS = 2048
SEED = 42


def make_family(name):
    if name == "tilt":
        return TiltDensity([2.0])
    if name == "mixture":
        return MixtureDensity([0.5, 0.5], [-1.0, 1.0], 0.5)
    if name == "sine":
        return SinePerturbationDensity(0.3, [2.0])
    raise KeyError(name)


@pytest.fixture(scope="session")
def families():
    return {name: make_family(name) for name in ("tilt", "mixture", "sine")}


@pytest.fixture(scope="session")
def batches(families):
    """One 10^5-path batch per family, reused across every test that can."""
    out = {}
    for offset, name in enumerate(sorted(families)):
        out[name] = simulate_family_batch(
            families[name],
            n_paths=N_PATHS,
            steps=STEPS,
            seed=SEED + offset,
            r_values=DEFAULT_R_GRID,
        )
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
