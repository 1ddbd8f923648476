import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctcsim.qcore import (DensityMatrix, DimensionMismatch, IndexOutOfRange, InvalidState, QuantumChannel,
                          UnitaryOp, UnknownGate, embed, entropy, evolve, ket, partial_trace, random_density,
                          random_unitary, standard_gate, swap_subsystems, tensor, trace_distance)

seeds = st.integers(0, 2**32 - 1)


def test_bell_reduced_state_is_mixed():
    bell = DensityMatrix.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2))
    red = partial_trace(bell, [0])
    assert np.allclose(red.data, np.eye(2) / 2)
    assert entropy(red) == pytest.approx(1.0)
    assert entropy(bell) == pytest.approx(0.0, abs=1e-12)


def test_partial_trace_of_product_recovers_factors():
    rng = np.random.default_rng(1)
    a = DensityMatrix((2,), random_density(2, rng))
    b = DensityMatrix((3,), random_density(3, rng))
    ab = tensor(a, b)
    assert np.allclose(partial_trace(ab, [0]).data, a.data)
    assert np.allclose(partial_trace(ab, [1]).data, b.data)


def test_partial_trace_rejects_bad_keep():
    rho = DensityMatrix.maximally_mixed((2, 2))
    with pytest.raises(IndexOutOfRange):
        partial_trace(rho, [2])
    with pytest.raises(IndexOutOfRange):
        partial_trace(rho, [])


def test_shape_mismatch_raises():
    with pytest.raises(DimensionMismatch):
        DensityMatrix((2, 2), np.eye(2))
    with pytest.raises(DimensionMismatch):
        evolve(DensityMatrix.maximally_mixed((2,)), standard_gate("CNOT"))


def test_validate_rejects_nonphysical():
    with pytest.raises(InvalidState):
        DensityMatrix((2,), np.diag([1.5, -0.5])).validate()
    assert not DensityMatrix((2,), np.eye(2)).is_valid()


def test_gates():
    # CNOT control is the first factor
    out = evolve(DensityMatrix.from_ket(ket("10")), standard_gate("CNOT"))
    assert np.allclose(out.data, DensityMatrix.from_ket(ket("11")).data)
    out = evolve(DensityMatrix.from_ket(ket("01")), standard_gate("SWAP"))
    assert np.allclose(out.data, DensityMatrix.from_ket(ket("10")).data)
    rx = standard_gate("ROT", np.pi, "X").data
    assert np.allclose(rx, -1j * np.array([[0, 1], [1, 0]]))
    with pytest.raises(UnknownGate):
        standard_gate("toffoli")


def test_embed_matches_swap_conjugation():
    cnot = standard_gate("CNOT").data
    flipped = embed(cnot, [1, 0], [2, 2])
    sw = standard_gate("SWAP").data
    assert np.allclose(flipped, sw @ cnot @ sw)


def test_swap_subsystems_unequal_dims():
    rng = np.random.default_rng(3)
    a = DensityMatrix((2,), random_density(2, rng))
    b = DensityMatrix((3,), random_density(3, rng))
    P = swap_subsystems((2,), (3,))
    assert np.allclose(P.data @ tensor(a, b).data @ P.data.T, tensor(b, a).data)


def test_channel_superoperator_consistent():
    p = 0.3
    ks = [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * np.diag([1, -1])]
    ch = QuantumChannel(ks, (2,), (2,)).validate()
    rho = DensityMatrix.from_ket(ket("+"))
    out = ch(rho)
    assert out.data[0, 1] == pytest.approx(0.5 * (1 - 2 * p))
    vec = ch.superoperator() @ rho.data.reshape(-1)
    assert np.allclose(vec.reshape(2, 2), out.data)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_unitary_evolution_preserves_trace_distance(seed):
    rng = np.random.default_rng(seed)
    U = UnitaryOp((2, 2), random_unitary(4, rng))
    a = DensityMatrix((2, 2), random_density(4, rng))
    b = DensityMatrix((2, 2), random_density(4, rng, rank=1))
    assert trace_distance(evolve(a, U), evolve(b, U)) == pytest.approx(trace_distance(a, b), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_trace_distance_contracts_under_partial_trace(seed):
    rng = np.random.default_rng(seed)
    a = DensityMatrix((2, 2), random_density(4, rng))
    b = DensityMatrix((2, 2), random_density(4, rng))
    full = trace_distance(a, b)
    assert trace_distance(partial_trace(a, [0]), partial_trace(b, [0])) <= full + 1e-12
    assert 0 <= full <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_random_density_valid(seed):
    rho = DensityMatrix((3,), random_density(3, np.random.default_rng(seed)))
    rho.validate()
