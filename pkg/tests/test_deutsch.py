import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctcsim.deutsch import (FixedPointConfig, MultiPolicy, NotConverged, brun_unitary, consistency_residual,
                            deutsch_map, deutsch_output, extend_with_ancilla, grandfather_unitary,
                            info_paradox_unitary, max_entropy_fixed_point, multi_ctc_solve, otc_break,
                            solve_fixed_point, solve_fixed_point_spectral, unroll_equivalent_circuit)
from ctcsim.qcore import (DensityMatrix, UnitaryOp, entropy, ket, partial_trace, random_density, random_unitary,
                          standard_gate, trace_distance)

MIXED = DensityMatrix.maximally_mixed((2,))


def dm(label):
    return DensityMatrix.from_ket(ket(label))


def test_grandfather_solution_is_mixed():
    sol = solve_fixed_point(grandfather_unitary(), dm("1"))
    assert trace_distance(sol.rho_ctc, MIXED) < 1e-12
    assert sol.converged


def test_grandfather_with_zero_input_has_pure_history():
    # CR = |0> never flips the loop, so |0> is consistent
    assert consistency_residual(grandfather_unitary(), dm("0"), dm("0")) < 1e-12


def test_grandfather_pure_states_are_inconsistent():
    # |0> in the loop flips to |1> and back: no pure consistent history
    U = grandfather_unitary()
    for lab in "01":
        assert consistency_residual(U, dm("1"), dm(lab)) == pytest.approx(1.0)


def test_info_paradox_x_diagonal_family_consistent():
    U = info_paradox_unitary()
    for p in np.linspace(0, 1, 5):
        x = DensityMatrix((2,), p * dm("+").data + (1 - p) * dm("-").data)
        assert consistency_residual(U, dm("+"), x) < 1e-12
    assert consistency_residual(U, dm("+"), dm("0")) > 0.1


def test_seed_selects_solution():
    U = info_paradox_unitary()
    sol = solve_fixed_point(U, dm("+"), FixedPointConfig(seed_state=dm("-")))
    assert trace_distance(sol.rho_ctc, dm("-")) < 1e-12


def test_entropy_history_recorded():
    sol = solve_fixed_point(grandfather_unitary(), dm("1"),
                            FixedPointConfig(seed_state=dm("0"), damping=0.5, record_history=True))
    assert sol.entropy_history[0] == pytest.approx(0.0, abs=1e-12)
    assert sol.entropy_history[-1] == pytest.approx(1.0, abs=1e-6)


def test_plain_iteration_oscillates_without_damping():
    # the grandfather map sends |0> to |1> and back; pure iteration never settles
    cfg = FixedPointConfig(seed_state=dm("0"), max_iter=50, retry_on_stall=False)
    with pytest.raises(NotConverged):
        solve_fixed_point(grandfather_unitary(), dm("1"), cfg)


def test_stall_falls_back_to_extrapolated_solve():
    cfg = FixedPointConfig(seed_state=dm("0"))
    sol = solve_fixed_point(grandfather_unitary(), dm("1"), cfg)
    assert sol.method == "noise-extrapolated"
    assert trace_distance(sol.rho_ctc, MIXED) < 1e-8


def test_max_entropy_fixed_point_info_paradox():
    x = max_entropy_fixed_point(info_paradox_unitary(), dm("+"))
    assert np.allclose(x, np.eye(2) / 2, atol=1e-8)


def test_spectral_solver_agrees_on_grandfather():
    sol = solve_fixed_point_spectral(grandfather_unitary(), dm("1"))
    assert trace_distance(sol.rho_ctc, MIXED) < 1e-10


def test_swap_circuit_outputs_loop_state():
    # U = SWAP: the CR qubit enters the loop and the loop state exits, so rho2 = rho1
    U = standard_gate("SWAP")
    rho1 = DensityMatrix.from_ket(np.array([0.6, 0.8j]))
    out = deutsch_output(U, rho1)
    assert trace_distance(out, rho1) < 1e-12


def test_brun_box_discriminates_nonorthogonal_states():
    U = brun_unitary()
    cases = {"00": "00", "10": "01", "+0": "10", "-0": "11"}
    for src, dst in cases.items():
        out = deutsch_output(U, dm(src))
        assert trace_distance(out, dm(dst)) < 1e-8, src


def test_otc_break_bell_and_product():
    bell = DensityMatrix.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.allclose(otc_break(bell, [0]).data, np.eye(4) / 4)
    rng = np.random.default_rng(0)
    a, b = random_density(2, rng), random_density(3, rng)
    prod = DensityMatrix((2, 3), np.kron(a, b))
    assert np.allclose(otc_break(prod, [1]).data, prod.data)


def test_extension_with_reference_keeps_marginal():
    bell = DensityMatrix.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2))
    out = extend_with_ancilla(standard_gate("SWAP"), bell, 1)
    # the CR qubit is swapped with a loop that holds its own reduced state: correlations are lost
    assert np.allclose(out.data, np.eye(4) / 4, atol=1e-10)
    assert np.allclose(partial_trace(out, [1]).data, np.eye(2) / 2)


def test_multi_ctc_policies():
    # CR controls nothing; rails 2 and 3 swap each other
    sw23 = np.kron(np.eye(2), standard_gate("SWAP").data)
    U = UnitaryOp((2, 2, 2), sw23)
    joint = multi_ctc_solve(U, dm("0"), (2, 2), MultiPolicy.JOINT)
    assert joint.converged
    a, b = multi_ctc_solve(U, dm("0"), (2, 2), "separate")
    assert trace_distance(a.rho_ctc, b.rho_ctc) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixed_point_satisfies_consistency(seed):
    rng = np.random.default_rng(seed)
    U = UnitaryOp((2, 2), random_unitary(4, rng))
    rho1 = DensityMatrix((2,), random_density(2, rng))
    try:
        sol = solve_fixed_point(U, rho1)
    except NotConverged:
        pytest.skip("no convergence for this draw")
    assert consistency_residual(U, rho1, sol.rho_ctc) < 1e-8
    x = deutsch_map(U, rho1, sol.rho_ctc)
    assert entropy(x) >= -1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unrolled_circuit_matches_at_matched_noise(seed):
    rng = np.random.default_rng(seed)
    U = UnitaryOp((2, 2), random_unitary(4, rng))
    rho1 = DensityMatrix((2,), random_density(2, rng))
    a = deutsch_output(U, rho1, FixedPointConfig(noise_eps=1e-2))
    b = unroll_equivalent_circuit(U, rho1, 300, MIXED, noise_eps=1e-2)
    assert trace_distance(a, b) < 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        FixedPointConfig(tol=0)
    with pytest.raises(ValueError):
        FixedPointConfig(damping=1.0)
    with pytest.raises(ValueError):
        unroll_equivalent_circuit(grandfather_unitary(), dm("0"), 0, MIXED)
