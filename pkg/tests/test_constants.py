import math

from cos2phi.constants import CONSTANTS


def test_hbar_identity():
    assert CONSTANTS.hbar == CONSTANTS.planck_h / (2.0 * math.pi)


def test_resistance_quantum_identity():
    assert CONSTANTS.resistance_quantum == CONSTANTS.planck_h / CONSTANTS.electron_charge**2


def test_flux_quantum_identity():
    assert CONSTANTS.flux_quantum == CONSTANTS.planck_h / (2.0 * CONSTANTS.electron_charge)


def test_all_positive_and_frozen():
    for name in (
        "planck_h",
        "hbar",
        "boltzmann_kb",
        "electron_charge",
        "flux_quantum",
        "resistance_quantum",
    ):
        assert getattr(CONSTANTS, name) > 0
    try:
        CONSTANTS.planck_h = 1.0
        raised = False
    except AttributeError:
        raised = True
    assert raised
