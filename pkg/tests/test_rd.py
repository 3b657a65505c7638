"""
Random decomposition.
"""

import numpy as np
import pytest


def test_single_gate_target(hadamard):
    from src.services.decomposition import Method
    from src.services.gatelib import GateSpec, assemble_gateset
    from src.services.matcore import RngHandle
    from src.services.rd_service import rd_decompose

    gs = assemble_gateset([GateSpec("H1")], label="H")
    result = rd_decompose(hadamard, gs, max_length=3, trials=50, rng=RngHandle(0))
    assert result.method == Method.RD
    assert result.fidelity == pytest.approx(1.0, abs=1e-12)
    # HHH is as good as H, the shorter circuit wins
    assert result.depth == 1


def test_seeded_runs_are_identical(ht_gateset, haar_1q):
    from src.services.matcore import RngHandle
    from src.services.rd_service import rd_decompose

    a = rd_decompose(haar_1q[0], ht_gateset, trials=40, rng=RngHandle(5))
    b = rd_decompose(haar_1q[0], ht_gateset, trials=40, rng=RngHandle(5))
    assert a.circuit == b.circuit
    assert a.fidelity == b.fidelity


def test_more_trials_never_hurt(ht_gateset, haar_1q):
    """A smaller trial budget sees a prefix of the same sample stream."""
    from src.services.matcore import RngHandle
    from src.services.rd_service import rd_decompose

    for u in haar_1q[:3]:
        few = rd_decompose(u, ht_gateset, trials=10, rng=RngHandle(9))
        many = rd_decompose(u, ht_gateset, trials=200, rng=RngHandle(9))
        assert many.fidelity >= few.fidelity


def test_two_qubit_circuits_are_valid(htcx_gateset, rng):
    from src.services.gatelib import circuit_unitary
    from src.services.matcore import haar_unitary, process_fidelity
    from src.services.rd_service import rd_decompose

    u = haar_unitary(4, rng.child(0))
    result = rd_decompose(u, htcx_gateset, max_length=10, trials=30, rng=rng.child(1))
    assert result.circuit.n_qubits == 2
    assert 1 <= result.depth <= 10
    for op in result.circuit.ops:
        assert len(op.qubits) == htcx_gateset.gates[op.gate].arity
    assert result.fidelity == pytest.approx(process_fidelity(circuit_unitary(result.circuit, htcx_gateset), u), abs=1e-12)


def test_skips_gates_wider_than_target(htcx_gateset, hadamard):
    from src.services.rd_service import rd_decompose

    result = rd_decompose(hadamard, htcx_gateset, trials=20)
    assert all(htcx_gateset.gates[op.gate].arity == 1 for op in result.circuit.ops)


def test_state_metric(hadamard):
    from src.services.decomposition import FidelityMetric
    from src.services.gatelib import GateSpec, assemble_gateset
    from src.services.rd_service import rd_decompose

    gs = assemble_gateset([GateSpec("H1"), GateSpec("S1")], label="HS")
    # |+i> = S H |0>
    target = np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)
    result = rd_decompose(target, gs, max_length=4, trials=200, metric=FidelityMetric.STATE)
    assert result.metric == FidelityMetric.STATE
    assert result.fidelity == pytest.approx(1.0, abs=1e-12)


def test_rejects_bad_budgets(ht_gateset, hadamard):
    from src.core.errors import InvalidArgumentError
    from src.services.rd_service import rd_decompose

    with pytest.raises(InvalidArgumentError):
        rd_decompose(hadamard, ht_gateset, trials=0)
    with pytest.raises(InvalidArgumentError):
        rd_decompose(hadamard, ht_gateset, max_length=0)


def test_no_usable_gates(hadamard):
    from src.core.errors import InvalidArgumentError
    from src.services.gatelib import GateSpec, assemble_gateset
    from src.services.rd_service import rd_decompose

    gs = assemble_gateset([GateSpec("CX2")], label="CX")
    with pytest.raises(InvalidArgumentError):
        rd_decompose(hadamard, gs)
