import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import ebk


@pytest.fixture(scope="session")
def harmonic():
    return ebk.schrodinger_symbol(ebk.harmonic_potential())


@pytest.fixture(scope="session")
def quartic():
    return ebk.schrodinger_symbol(ebk.quartic_potential())


@pytest.fixture(scope="session")
def morse():
    return ebk.schrodinger_symbol(ebk.morse_potential(1.0, 1.0))


@pytest.fixture(scope="session")
def double_well():
    return ebk.schrodinger_symbol(ebk.double_well_potential(1.0))


@pytest.fixture(scope="session")
def harmonic_window():
    return ebk.EnergyWindow(0.2, 0.8, 0.05)


@pytest.fixture(scope="session")
def quartic_window():
    return ebk.EnergyWindow(0.5, 2.0, 0.05)


@pytest.fixture(scope="session")
def morse_window():
    return ebk.EnergyWindow(0.1, 0.6, 0.05)


@pytest.fixture(scope="session")
def dw_window():
    return ebk.EnergyWindow(0.1, 0.6, 0.05)


@pytest.fixture(scope="session")
def harmonic_table(harmonic, harmonic_window):
    fams = ebk.build_families(harmonic, harmonic_window)
    return ebk.build_action_table(harmonic, fams[0], harmonic_window, 33)


@pytest.fixture(scope="session")
def harmonic_wide_table(harmonic):
    window = ebk.EnergyWindow(0.2, 1.05, 0.05)
    fams = ebk.build_families(harmonic, window)
    return ebk.build_action_table(harmonic, fams[0], window, 33)


@pytest.fixture(scope="session")
def quartic_table(quartic, quartic_window):
    fams = ebk.build_families(quartic, quartic_window)
    return ebk.build_action_table(quartic, fams[0], quartic_window, 49)


@pytest.fixture(scope="session")
def morse_table(morse, morse_window):
    fams = ebk.build_families(morse, morse_window)
    return ebk.build_action_table(morse, fams[0], morse_window, 49)


@pytest.fixture(scope="session")
def dw_tables(double_well, dw_window):
    fams = ebk.build_families(double_well, dw_window)
    return [ebk.build_action_table(double_well, f, dw_window, 33) for f in fams]


@pytest.fixture(scope="session")
def dw_families(double_well, dw_window):
    return ebk.build_families(double_well, dw_window)
