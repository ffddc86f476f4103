import numpy as np
import pytest

from cdf_lab import (FluidParams, HeatParams, fluid_model, heat_model,
                     sign_flipped_heat_model)


@pytest.fixture(scope="session")
def heat():
    return heat_model(HeatParams())


@pytest.fixture(scope="session")
def heat_params():
    return HeatParams()


@pytest.fixture(scope="session")
def fluid():
    return fluid_model(FluidParams())


@pytest.fixture(scope="session")
def fluid_params():
    return FluidParams()


@pytest.fixture(scope="session")
def broken_heat():
    return sign_flipped_heat_model(HeatParams())


def random_heat_states(n, seed=0, u_range=(0.5, 2.0), w_range=(-1.0, 1.0)):
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.uniform(*u_range, n),
                            rng.uniform(*w_range, n)])


def random_fluid_states(model, n, seed=0):
    rng = np.random.default_rng(seed)
    box = model.sample_box
    draws = rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))
    return model.from_sample(draws)
