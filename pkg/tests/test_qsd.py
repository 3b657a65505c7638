"""
Quantum Shannon decomposition and multiplexed rotations.
"""

import numpy as np
import pytest


def test_identity_needs_no_gates():
    from src.services.qsd_service import qsd_decompose

    seq = qsd_decompose(np.eye(8))
    assert len(seq) == 0
    np.testing.assert_allclose(seq.unitary(), np.eye(8), atol=1e-12)


def test_two_qubit_uses_at_most_three_cx():
    from src.services.matcore import RngHandle, haar_unitary, operator_distance
    from src.services.qsd_service import qsd_decompose

    root = RngHandle(77)
    for i in range(100):
        u = haar_unitary(4, root.child(i)).data
        seq = qsd_decompose(u)
        assert seq.count("CX") <= 3
        assert operator_distance(seq.unitary(), u) < 1e-8
        assert {op.name for op in seq.ops} <= {"CX", "RY", "RZ"}


def test_three_qubit_reconstruction():
    from src.services.matcore import RngHandle, haar_unitary, operator_distance
    from src.services.qsd_service import qsd_decompose

    root = RngHandle(78)
    for i in range(20):
        u = haar_unitary(8, root.child(i)).data
        seq = qsd_decompose(u)
        # 4 two-qubit blocks of 3 CX plus three 2-control multiplexors of 4 CX
        assert seq.count("CX") <= 26
        assert operator_distance(seq.unitary(), u) < 1e-8


def test_four_qubit_reconstruction(rng):
    from src.services.matcore import haar_unitary, operator_distance
    from src.services.qsd_service import qsd_decompose

    u = haar_unitary(16, rng).data
    assert operator_distance(qsd_decompose(u).unitary(), u) < 1e-8


def test_qsd_rejects_single_qubit_and_non_unitary(hadamard):
    from src.core.errors import InvalidArgumentError
    from src.services.qsd_service import qsd_decompose

    with pytest.raises(InvalidArgumentError):
        qsd_decompose(hadamard)
    with pytest.raises(InvalidArgumentError):
        qsd_decompose(2 * np.eye(4))


@pytest.mark.parametrize("axis", ["RY", "RZ"])
@pytest.mark.parametrize("n_controls", [1, 2])
def test_multiplexed_rotation_matches_block_diagonal(axis, n_controls):
    import scipy.linalg

    from src.services.gatelib import OpSequence, ry, rz
    from src.services.qsd_service import multiplexed_rotation

    gen = np.random.default_rng(n_controls)
    angles = gen.uniform(-np.pi, np.pi, 2 ** n_controls)
    n = n_controls + 1
    seq = OpSequence(n)
    # target is the last qubit so the reference is block diagonal in control order
    multiplexed_rotation(seq, axis, angles, list(range(n_controls)), n_controls)

    rot = ry if axis == "RY" else rz
    expected = scipy.linalg.block_diag(*[rot(a) for a in angles])
    np.testing.assert_allclose(seq.unitary(), expected, atol=1e-12)
    assert seq.count("CX") == 2 ** n_controls


def test_multiplexed_rotation_uniform_angles_is_single_rotation():
    from src.services.gatelib import OpSequence, ry
    from src.services.matcore import kron
    from src.services.qsd_service import multiplexed_rotation

    seq = OpSequence(2)
    multiplexed_rotation(seq, "RY", [0.7, 0.7], [0], 1)
    assert seq.count("CX") == 0
    np.testing.assert_allclose(seq.unitary(), kron(np.eye(2), ry(0.7)), atol=1e-12)


def test_multiplexed_rotation_angle_count():
    from src.core.errors import InvalidArgumentError
    from src.services.gatelib import OpSequence
    from src.services.qsd_service import multiplexed_rotation

    with pytest.raises(InvalidArgumentError):
        multiplexed_rotation(OpSequence(3), "RZ", [0.1, 0.2, 0.3], [0, 1], 2)
