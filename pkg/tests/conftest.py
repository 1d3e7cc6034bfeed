import pytest
from hypothesis import HealthCheck, settings

from cos2phi.circuit import CircuitParams, JunctionSet
from cos2phi.noise import NoiseConfig
from cos2phi.spectra import ResonatorParams

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def paper_junctions():
    return JunctionSet(ej1=42.49, ej2=53.9, ej3=88.11, ej4=35.73, ej5=35.73)


@pytest.fixture(scope="session")
def paper_params(paper_junctions):
    return CircuitParams(ec=0.21, junctions=paper_junctions)


@pytest.fixture(scope="session")
def table_noise():
    return NoiseConfig()


@pytest.fixture(scope="session")
def paper_resonator():
    return ResonatorParams(f_res=5.344, g=0.025)
