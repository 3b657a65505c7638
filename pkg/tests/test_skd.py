"""
Solovay-Kitaev: basis enumeration, nearest-entry search, the balanced group
commutator and the recursion itself.
"""

import numpy as np
import pytest


def _seq_matrix(gs, seq):
    u = np.eye(2, dtype=np.complex128)
    for g in seq:
        u = gs.gates[g].matrix @ u
    return u


def test_depth_one_basis(ht_gateset):
    """Identity plus H, T and T^dag."""
    from src.services.skd_service import skd_build_basis

    basis = skd_build_basis(ht_gateset, 1)
    assert basis.sequences == [(), (0,), (1,), (2,)]
    assert basis.dagger == {0: 0, 1: 2, 2: 1}


def test_basis_entries_match_their_sequences(ht_gateset):
    from src.services.matcore import operator_distance
    from src.services.skd_service import skd_build_basis

    basis = skd_build_basis(ht_gateset, 3)
    assert len(basis) <= sum(3 ** k for k in range(4))
    assert len(basis.sequences) == basis.matrices.shape[0] == basis.quats.shape[0]
    for seq, m in zip(basis.sequences, basis.matrices):
        assert len(seq) <= 3
        assert operator_distance(m, _seq_matrix(ht_gateset, seq)) < 1e-12


def test_basis_has_no_near_duplicates(ht_gateset):
    from src.services.skd_service import DEDUP_TOL, skd_build_basis

    q = skd_build_basis(ht_gateset, 4).quats
    plus = np.linalg.norm(q[:, None, :] - q[None, :, :], axis=2)
    minus = np.linalg.norm(q[:, None, :] + q[None, :, :], axis=2)
    d = np.minimum(plus, minus)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= DEDUP_TOL


def test_quaternion_distance_matches_operator_distance(rng):
    """min(|q-p|, |q+p|) is the phase-aligned spectral distance."""
    from src.services.matcore import haar_unitary, operator_distance
    from src.services.skd_service import quaternion

    for i in range(50):
        a = haar_unitary(2, rng.child(2 * i)).data
        b = haar_unitary(2, rng.child(2 * i + 1)).data
        qa, qb = quaternion(a), quaternion(b)
        d = min(np.linalg.norm(qa - qb), np.linalg.norm(qa + qb))
        assert d == pytest.approx(operator_distance(a, b), abs=1e-10)


def test_best_approx_examples(ht_gateset):
    from src.services.gatelib import FIXED_MATRICES, GateId
    from src.services.skd_service import skd_best_approx, skd_build_basis

    basis = skd_build_basis(ht_gateset, 3)
    t = FIXED_MATRICES[GateId.T1]
    h = FIXED_MATRICES[GateId.H1]

    seq, dist = skd_best_approx(t, basis)
    assert seq == (1,)
    assert dist < 1e-12

    # T then H
    seq, dist = skd_best_approx(h @ t, basis)
    assert seq == (1, 0)
    assert dist < 1e-12


def test_best_approx_matches_brute_force(ht_gateset, haar_1q):
    from src.services.matcore import operator_distance
    from src.services.skd_service import skd_best_approx, skd_build_basis

    basis = skd_build_basis(ht_gateset, 5)
    for u in haar_1q:
        _, dist = skd_best_approx(u, basis)
        brute = min(operator_distance(u, m) for m in basis.matrices)
        assert dist == pytest.approx(brute, abs=1e-9)


def test_group_commutator_identity():
    from src.services.skd_service import skd_group_commutator

    v, w = skd_group_commutator(np.eye(2))
    np.testing.assert_array_equal(v, np.eye(2))
    np.testing.assert_array_equal(w, np.eye(2))


def _commutator(v, w):
    return v @ w @ v.conj().T @ w.conj().T


def test_group_commutator_is_balanced():
    from src.services.matcore import axis_angle, operator_distance, rotation_su2
    from src.services.skd_service import skd_group_commutator

    delta = rotation_su2(np.array([1.0, 2.0, 2.0]) / 3.0, 0.1)
    v, w = skd_group_commutator(delta)
    assert operator_distance(_commutator(v, w), delta) < 1e-8
    (_, phi_v), (_, phi_w) = axis_angle(v), axis_angle(w)
    assert phi_v == pytest.approx(phi_w, abs=1e-10)
    # rotations about orthogonal axes
    assert abs(np.dot(axis_angle(v)[0], axis_angle(w)[0])) < 1e-8


def test_group_commutator_of_z():
    from src.services.matcore import PAULI_Z, operator_distance
    from src.services.skd_service import skd_group_commutator

    v, w = skd_group_commutator(PAULI_Z)
    assert operator_distance(_commutator(v, w), PAULI_Z) < 1e-8


def test_group_commutator_random_inputs():
    """1000 random SU(2) elements plus angles next to 0 and pi."""
    from src.services.matcore import RngHandle, haar_unitary, operator_distance, rotation_su2
    from src.services.skd_service import skd_group_commutator

    root = RngHandle(31)
    deltas = [haar_unitary(2, root.child(i)).data for i in range(1000)]
    axis = np.array([0.0, 0.6, 0.8])
    deltas += [rotation_su2(axis, 1e-4), rotation_su2(axis, np.pi - 1e-4)]
    for delta in deltas:
        v, w = skd_group_commutator(delta)
        assert operator_distance(_commutator(v, w), delta) < 1e-8


def test_group_commutator_near_half_turn():
    """Angles within 1e-8 of pi, where the angle equation is flat."""
    from src.services.matcore import RngHandle, operator_distance, rotation_su2
    from src.services.skd_service import skd_group_commutator

    gen = RngHandle(37).generator
    for theta in (np.pi - 1e-8, np.pi - 1e-10, np.pi):
        for _ in range(200):
            axis = gen.normal(size=3)
            delta = rotation_su2(axis / np.linalg.norm(axis), theta)
            v, w = skd_group_commutator(delta)
            assert operator_distance(_commutator(v, w), delta) < 1e-8


def test_recursion_tie_keeps_shorter_word(ht_gateset, haar_1q, monkeypatch):
    """When the commutator step does not improve the distance, the shorter word stays."""
    import src.services.skd_service as skd
    from src.services.skd_service import skd_build_basis, skd_decompose

    basis = skd_build_basis(ht_gateset, 4)
    flat = [skd_decompose(u, ht_gateset, recursion=0, basis=basis).depth for u in haar_1q]
    monkeypatch.setattr(skd, "operator_distance", lambda a, b: 0.5)
    deep = [skd_decompose(u, ht_gateset, recursion=2, basis=basis).depth for u in haar_1q]
    assert deep == flat


def test_recursion_reproduces_basis_members(ht_gateset):
    from src.services.skd_service import skd_build_basis, skd_decompose

    basis = skd_build_basis(ht_gateset, 4)
    for idx in (1, 5, len(basis) - 1):
        target = basis.matrices[idx]
        result = skd_decompose(target, ht_gateset, recursion=2, basis=basis)
        assert result.fidelity == pytest.approx(1.0, abs=1e-10)
        assert result.depth <= len(basis.sequences[idx])


def test_recursion_never_worse_than_basis_scan(ht_gateset, haar_1q):
    from src.services.skd_service import skd_build_basis, skd_decompose

    basis = skd_build_basis(ht_gateset, 6)
    d0 = [skd_decompose(u, ht_gateset, recursion=0, basis=basis).distance for u in haar_1q]
    d2 = [skd_decompose(u, ht_gateset, recursion=2, basis=basis).distance for u in haar_1q]
    for a, b in zip(d0, d2):
        assert b <= a + 1e-12
    assert np.mean(d2) <= np.mean(d0)


def test_deeper_basis_is_never_worse(ht_gateset, haar_1q):
    from src.services.skd_service import skd_build_basis, skd_decompose

    means = []
    for depth in range(2, 7):
        basis = skd_build_basis(ht_gateset, depth)
        means.append(np.mean([skd_decompose(u, ht_gateset, recursion=0, basis=basis).distance for u in haar_1q]))
    assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))
    assert means[-1] < means[0]


def test_sequence_length_bound(ht_gateset, haar_1q):
    from src.services.skd_service import skd_build_basis, skd_decompose

    basis = skd_build_basis(ht_gateset, 4)
    for n in range(3):
        for u in haar_1q[:3]:
            result = skd_decompose(u, ht_gateset, recursion=n, basis=basis)
            assert result.depth <= 4 * 5 ** n


def test_result_fidelity_is_recomputed(ht_gateset, haar_1q):
    from src.services.decomposition import Method
    from src.services.matcore import process_fidelity
    from src.services.skd_service import skd_decompose

    result = skd_decompose(haar_1q[0], ht_gateset, recursion=1, basis_depth=4)
    assert result.method == Method.SKD
    assert result.fidelity == pytest.approx(process_fidelity(result.unitary(), haar_1q[0]), abs=1e-15)


def test_basis_cap(ht_gateset):
    from src.core.errors import ResourceLimitError
    from src.services.skd_service import skd_build_basis

    with pytest.raises(ResourceLimitError):
        skd_build_basis(ht_gateset, 6, cap=10)


def test_needs_one_qubit_gates():
    from src.core.errors import InvalidArgumentError
    from src.services.gatelib import GateSpec, assemble_gateset
    from src.services.skd_service import skd_build_basis

    gs = assemble_gateset([GateSpec("CX2")], label="CX")
    with pytest.raises(InvalidArgumentError):
        skd_build_basis(gs, 2)


def test_rejects_two_qubit_target(ht_gateset):
    from src.core.errors import InvalidArgumentError
    from src.services.skd_service import skd_decompose

    with pytest.raises(InvalidArgumentError):
        skd_decompose(np.eye(4), ht_gateset, basis_depth=2)
