import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gtwaves.models import BarotropicModel, ForceSpec, PressureLaw

FLAGSHIP = dict(k1=0.5, s=1.0, a0=0.1, rho0=1.0)


@pytest.fixture(scope="session")
def law_g2():
    return PressureLaw.polytropic(kappa=1.0, gamma=2.0)


@pytest.fixture(scope="session")
def flagship_model(law_g2):
    return BarotropicModel(
        pressure=law_g2,
        force=ForceSpec.gtw_family(k1=FLAGSHIP["k1"], s=FLAGSHIP["s"]))


@pytest.fixture(scope="session")
def flagship_system(flagship_model):
    return flagship_model.system()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_states(rng, n=20, rho_range=(0.3, 4.0), u_range=(-2.0, 3.0)):
    return [np.array([rng.uniform(*rho_range), rng.uniform(*u_range)])
            for _ in range(n)]
