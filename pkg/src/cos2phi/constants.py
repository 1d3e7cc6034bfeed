"""Fixed physical constants (2019 exact SI values).

These are deliberately not configurable; every formula in the package pulls
from the single frozen instance below.
"""

import math
from dataclasses import dataclass

_PLANCK_H = 6.62607015e-34
_E_CHARGE = 1.602176634e-19


@dataclass(frozen=True)
class PhysicalConstants:
    planck_h: float = _PLANCK_H                            # J s
    hbar: float = _PLANCK_H / (2.0 * math.pi)              # J s
    boltzmann_kb: float = 1.380649e-23                     # J / K
    electron_charge: float = _E_CHARGE                     # C
    flux_quantum: float = _PLANCK_H / (2.0 * _E_CHARGE)    # Wb
    resistance_quantum: float = _PLANCK_H / _E_CHARGE**2   # Ohm, h/e^2


CONSTANTS = PhysicalConstants()

# Circuit energies are stored as E/h in GHz throughout the package; this is
# the single conversion factor back to Joules.
GHZ_TO_J = CONSTANTS.planck_h * 1e9
