import numpy as np
import pytest

from src.config import ScenarioConfig
from src.species import AtomicSpecies, BeamParams, TWO_PI
from src.state import SegmentLayout, init_coherent

APPENDIX_AREA = 4 * np.pi * 1e-10


@pytest.fixture(scope="session")
def species():
    return AtomicSpecies.from_file()


@pytest.fixture(scope="session")
def beam():
    return BeamParams(photon_flux=1e14, detuning=TWO_PI * 1e9, cross_section=APPENDIX_AREA)


@pytest.fixture
def appendix_config():
    return ScenarioConfig()


@pytest.fixture
def fast_config():
    """Appendix physics, short run with a coarse step."""
    return ScenarioConfig(total_time=2.0, tau_fraction=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def pair_state():
    """One channel, one atom segment of 1e6 atoms, one light segment of 1e7 photons."""
    layout = SegmentLayout.uniform(1, 1, APPENDIX_AREA)
    return init_coherent(layout, [1e6], photons_per_segment=[1e7])


def random_psd(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim))
    return scale * (a @ a.T + dim * np.eye(dim))
