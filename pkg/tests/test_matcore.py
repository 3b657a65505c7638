"""
Dense linear algebra: Haar sampling, fidelities, distances and the
real-orthogonal diagonalisation of symmetric unitaries.
"""

import numpy as np
import pytest


def test_haar_dim_one_is_unit_modulus(rng):
    """U(1) samples lie on the unit circle."""
    from src.services.matcore import haar_unitary

    u = haar_unitary(1, rng)
    assert u.dim == 1
    assert abs(abs(u.data[0, 0]) - 1.0) < 1e-12


def test_haar_rejects_zero_dim(rng):
    from src.core.errors import InvalidArgumentError
    from src.services.matcore import haar_unitary

    with pytest.raises(InvalidArgumentError):
        haar_unitary(0, rng)


def test_haar_is_unitary_and_seeded():
    """Equal seeds give bitwise-equal matrices."""
    from src.services.matcore import RngHandle, haar_unitary, unitarity_error

    a = haar_unitary(8, RngHandle(42))
    b = haar_unitary(8, RngHandle(42))
    c = haar_unitary(8, RngHandle(43))
    assert unitarity_error(a) < 1e-10
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_haar_trace_moment():
    """E|Tr U|^2 = 1 under the Haar measure."""
    from src.services.matcore import RngHandle, haar_unitary

    root = RngHandle(5)
    samples = [abs(np.trace(haar_unitary(2, root.child(i)).data)) ** 2 for i in range(10_000)]
    assert abs(np.mean(samples) - 1.0) < 0.05


def test_unitary_matrix_validation():
    from src.core.errors import InvalidArgumentError, MatrixValidationError
    from src.services.matcore import UnitaryMatrix

    with pytest.raises(MatrixValidationError):
        UnitaryMatrix(np.array([[1, 1], [0, 1]]))
    with pytest.raises(InvalidArgumentError):
        UnitaryMatrix(np.eye(3))
    u = UnitaryMatrix(np.eye(2))
    with pytest.raises(ValueError):
        u.data[0, 0] = 2


def test_process_fidelity_examples(rng):
    from src.services.gatelib import FIXED_MATRICES, GateId
    from src.services.matcore import PAULI_X, haar_unitary, process_fidelity

    u = haar_unitary(4, rng)
    assert process_fidelity(u, u) == pytest.approx(1.0, abs=1e-12)
    assert process_fidelity(np.eye(2), PAULI_X) == pytest.approx(0.0, abs=1e-15)
    t = FIXED_MATRICES[GateId.T1]
    assert process_fidelity(np.eye(2), t) == pytest.approx((2 + np.sqrt(2)) / 4, abs=1e-12)


def test_process_fidelity_symmetric_and_phase_invariant():
    from src.services.matcore import RngHandle, haar_unitary, process_fidelity

    root = RngHandle(9)
    gen = np.random.default_rng(0)
    for i in range(1000):
        a = haar_unitary(2, root.child(2 * i))
        b = haar_unitary(2, root.child(2 * i + 1))
        f = process_fidelity(a, b)
        assert f == pytest.approx(process_fidelity(b, a), abs=1e-12)
        theta = gen.uniform(0, 2 * np.pi)
        assert process_fidelity(np.exp(1j * theta) * a.data, b) == pytest.approx(f, abs=1e-12)


def test_process_fidelity_matches_superoperator_overlap():
    """|Tr(a^dag b)|^2/d^2 equals Tr(S_a^dag S_b)/d^2 with S = conj(U) (x) U."""
    from src.services.matcore import RngHandle, haar_unitary, process_fidelity

    root = RngHandle(11)
    for i in range(100):
        a = haar_unitary(4, root.child(2 * i)).data
        b = haar_unitary(4, root.child(2 * i + 1)).data
        sa, sb = np.kron(a.conj(), a), np.kron(b.conj(), b)
        brute = np.trace(sa.conj().T @ sb).real / 16
        assert process_fidelity(a, b) == pytest.approx(brute, abs=1e-12)


def test_process_fidelity_dimension_mismatch():
    from src.core.errors import InvalidArgumentError
    from src.services.matcore import process_fidelity

    with pytest.raises(InvalidArgumentError):
        process_fidelity(np.eye(2), np.eye(4))


def test_operator_distance_examples(rng):
    from src.services.matcore import PAULI_Z, haar_unitary, operator_distance

    u = haar_unitary(2, rng)
    assert operator_distance(u, u) == pytest.approx(0.0, abs=1e-12)
    # Tr(I^dag Z) = 0, so the phase grid decides
    assert operator_distance(np.eye(2), PAULI_Z) == pytest.approx(np.sqrt(2), abs=1e-12)
    for theta in (0.3, 1.7, 4.0):
        assert operator_distance(np.eye(2), np.exp(1j * theta) * np.eye(2)) == pytest.approx(0.0, abs=1e-12)


def test_operator_distances_vectorised(rng):
    from src.services.matcore import PAULI_Z, haar_unitary, operator_distance, operator_distances

    stack = np.stack([haar_unitary(2, rng.child(i)).data for i in range(20)] + [PAULI_Z])
    target = np.eye(2, dtype=np.complex128)
    expected = [operator_distance(target, m) for m in stack]
    np.testing.assert_allclose(operator_distances(stack, target), expected, atol=1e-12)


def test_kron_examples(hadamard):
    from src.services.matcore import PAULI_X, kron

    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    state = np.zeros(4)
    state[0] = 1
    assert np.argmax(np.abs(kron(PAULI_X, np.eye(2)) @ state)) == 2
    hh = kron(hadamard, hadamard)
    np.testing.assert_allclose(hh @ hh, np.eye(4), atol=1e-12)


def test_nearest_kron_factors_exact_product(rng):
    from src.services.matcore import haar_unitary, nearest_kron_factors

    a, b = haar_unitary(2, rng.child(0)).data, haar_unitary(2, rng.child(1)).data
    fa, fb, residual = nearest_kron_factors(np.kron(a, b))
    assert residual < 1e-12
    np.testing.assert_allclose(np.kron(fa, fb), np.kron(a, b), atol=1e-12)


def test_eig_symmetric_identity_and_diagonal():
    from src.services.matcore import eig_unitary_symmetric

    ev, q = eig_unitary_symmetric(np.eye(4))
    np.testing.assert_allclose(ev, np.ones(4), atol=1e-12)
    np.testing.assert_allclose(q, np.eye(4), atol=1e-12)

    d = np.array([1, -1, 1j, -1j])
    ev, q = eig_unitary_symmetric(np.diag(d))
    np.testing.assert_allclose(np.abs(q), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(q @ np.diag(ev) @ q.T, np.diag(d), atol=1e-12)


def _random_orthogonal(gen):
    import scipy.stats

    return scipy.stats.ortho_group.rvs(4, random_state=gen)


def test_eig_symmetric_round_trip():
    """Random Q0 D Q0^T, including repeated eigenvalues, reconstructs to 1e-8 with real Q."""
    from src.services.matcore import eig_unitary_symmetric

    gen = np.random.default_rng(3)
    for i in range(1000):
        q0 = _random_orthogonal(gen)
        phases = gen.uniform(0, 2 * np.pi, 4)
        if i % 3 == 0:
            phases[1] = phases[0]
        if i % 5 == 0:
            phases[3] = phases[2]
        m = q0 @ np.diag(np.exp(1j * phases)) @ q0.T
        ev, q = eig_unitary_symmetric(m)
        assert np.isrealobj(q)
        np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-10)
        np.testing.assert_allclose(np.abs(ev), 1.0, atol=1e-12)
        assert np.max(np.abs(q @ np.diag(ev) @ q.T - m)) < 1e-8


def test_eig_symmetric_rejects_bad_input():
    from src.core.errors import InvalidArgumentError
    from src.services.matcore import eig_unitary_symmetric

    with pytest.raises(InvalidArgumentError):
        eig_unitary_symmetric(np.array([[0, 1], [-1, 0]], dtype=complex))
    with pytest.raises(InvalidArgumentError):
        eig_unitary_symmetric(np.diag([1.0, 2.0]))


def test_derived_seeds_are_stable():
    from src.services.matcore import RngHandle, derive_seed

    assert derive_seed(7, 3) == derive_seed(7, 3)
    assert derive_seed(7, 3) != derive_seed(7, 4)
    assert RngHandle(7).child(3).seed == derive_seed(7, 3)


def test_axis_angle_and_bloch():
    from src.services.gatelib import rx
    from src.services.matcore import axis_angle, bloch_vector

    axis, angle = axis_angle(rx(0.4))
    np.testing.assert_allclose(axis, [1, 0, 0], atol=1e-12)
    assert angle == pytest.approx(0.4, abs=1e-12)
    np.testing.assert_allclose(bloch_vector(np.array([1, 1]) / np.sqrt(2)), [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(bloch_vector(np.array([1, 0])), [0, 0, 1], atol=1e-12)
