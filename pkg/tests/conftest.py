import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size acceptance runs (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    from src.services.matcore import RngHandle

    return RngHandle(1234)


@pytest.fixture
def ht_gateset():
    """{H, T} with T dagger in the table."""
    from src.services.gatelib import GateSpec, assemble_gateset

    return assemble_gateset([GateSpec("H1"), GateSpec("T1")], label="HT")


@pytest.fixture
def htcx_gateset():
    from src.services.gatelib import GateSpec, assemble_gateset

    return assemble_gateset([GateSpec("H1"), GateSpec("T1"), GateSpec("CX2")], label="HTCX")


@pytest.fixture
def haar_1q(rng):
    from src.services.matcore import haar_unitary

    return [haar_unitary(2, rng.child(i)) for i in range(10)]


@pytest.fixture
def hadamard():
    return np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
