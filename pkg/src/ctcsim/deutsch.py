"""Deutsch CTC model: self-consistent fixed points and circuit outputs.

Unitaries act on H_CR ⊗ H_CTC with the chronology-respecting (CR) factor first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .qcore import (
    DensityMatrix,
    DimensionMismatch,
    QuantumChannel,
    UnitaryOp,
    embed,
    entropy,
    evolve,
    partial_trace,
    partial_trace_array,
    standard_gate,
    swap_subsystems,
    tensor,
    trace_distance_array,
    _normalize_keep,
    _prod,
)

RETRY_EPS = (1e-6, 1e-7, 1e-8)
STALL_WINDOW = 100


class NotConverged(RuntimeError):
    def __init__(self, msg: str, result: "FixedPointResult | None" = None):
        super().__init__(msg)
        self.result = result


class NoSolution(RuntimeError):
    def __init__(self, msg: str, results=None):
        super().__init__(msg)
        self.results = results


@dataclass(frozen=True)
class CtcCircuit:
    U: UnitaryOp
    dims_cr: tuple[int, ...]
    dims_ctc: tuple[int, ...]

    def __post_init__(self):
        if self.U.data.shape[0] != _prod(self.dims_cr) * _prod(self.dims_ctc):
            raise DimensionMismatch("dim(U) must equal D_cr * D_ctc")


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-10
    max_iter: int = 100_000
    seed_state: DensityMatrix | None = None  # None means I/D_ctc
    damping: float = 0.0
    noise_eps: float = 0.0
    retry_on_stall: bool = True
    record_history: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 <= self.damping < 1:
            raise ValueError("damping must lie in [0, 1)")
        if self.noise_eps < 0:
            raise ValueError("noise_eps must be >= 0")


@dataclass
class FixedPointResult:
    rho_ctc: DensityMatrix
    iterations: int
    residual: float
    converged: bool
    method: str = "iteration"
    entropy_history: list[float] = field(default_factory=list)


# ---------------------------------------------------------------- canonical circuits

def _cnot(control: int, target: int) -> np.ndarray:
    return embed(standard_gate("CNOT").data, [control, target], [2, 2])


def grandfather_unitary() -> UnitaryOp:
    """CNOT with the CTC qubit as control and the CR qubit as target, then SWAP."""
    return UnitaryOp((2, 2), standard_gate("SWAP").data @ _cnot(1, 0))


def info_paradox_unitary() -> UnitaryOp:
    """CNOT with the CR qubit as control and the CTC qubit as target, then SWAP.

    With rho1 = |+><+| every state diagonal in the X basis is consistent.
    """
    return UnitaryOp((2, 2), standard_gate("SWAP").data @ _cnot(0, 1))


def brun_unitary() -> UnitaryOp:
    """Two CR qubits, two CTC qubits; discriminates {|00>,|10>,|+0>,|-0>}.

    SWAP the CR pair with the loop pair, then apply U_k to the loop pair
    controlled by the CR value k. U_k maps the k-th input state to |k>.
    """
    I2, X, H = np.eye(2), standard_gate("X").data, standard_gate("H").data
    sw = standard_gate("SWAP").data
    Uk = [sw, np.kron(X, X), np.kron(X @ H, I2), np.kron(X, H) @ sw]
    ctrl = sum(np.kron(np.diag(np.eye(4)[k]), Uk[k]) for k in range(4))
    pair_swap = swap_subsystems((2, 2), (2, 2)).data
    return UnitaryOp((2, 2, 2, 2), ctrl @ pair_swap)


# ---------------------------------------------------------------- the map

def _split(U: UnitaryOp, rho1: DensityMatrix, dims_ctc=None):
    Dcr = rho1.dim
    D = U.data.shape[0]
    if D % Dcr:
        raise DimensionMismatch(f"U of size {D} incompatible with CR dimension {Dcr}")
    Dctc = D // Dcr
    if dims_ctc is None:
        dims_ctc = (Dctc,) if Dctc != 2 ** int(round(np.log2(Dctc))) else (2,) * int(round(np.log2(Dctc)))
        if Dctc == 1:
            dims_ctc = (1,)
    if _prod(dims_ctc) != Dctc:
        raise DimensionMismatch("dims_ctc inconsistent with U")
    return Dcr, Dctc, tuple(dims_ctc)


def _apply_map(Ud: np.ndarray, rho1: np.ndarray, x: np.ndarray) -> np.ndarray:
    Dcr, Dc = rho1.shape[0], x.shape[0]
    y = Ud @ np.kron(rho1, x) @ Ud.conj().T
    return np.einsum("iaib->ab", y.reshape(Dcr, Dc, Dcr, Dc))


def _output(Ud: np.ndarray, rho1: np.ndarray, x: np.ndarray) -> np.ndarray:
    Dcr, Dc = rho1.shape[0], x.shape[0]
    y = Ud @ np.kron(rho1, x) @ Ud.conj().T
    return np.einsum("aibi->ab", y.reshape(Dcr, Dc, Dcr, Dc))


def deutsch_map_channel(U: UnitaryOp, rho1: DensityMatrix, dims_ctc=None) -> QuantumChannel:
    """Kraus form of x -> Tr_CR[U (rho1 ⊗ x) U^+]."""
    Dcr, Dctc, dims_ctc = _split(U, rho1, dims_ctc)
    lam, vecs = np.linalg.eigh(rho1.data)
    T = U.data.reshape(Dcr, Dctc, Dcr, Dctc)
    kraus = []
    for p, v in zip(lam, vecs.T):
        if p <= 1e-15:
            continue
        # (<k| ⊗ I) U (|v> ⊗ I)
        Tv = np.einsum("kaib,i->kab", T, v)
        kraus.extend(np.sqrt(p) * Tv[k] for k in range(Dcr))
    return QuantumChannel(tuple(kraus), dims_ctc, dims_ctc)


def deutsch_map(U: UnitaryOp, rho1: DensityMatrix, x: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(x.dims, _apply_map(U.data, rho1.data, x.data))


def consistency_residual(U: UnitaryOp, rho1: DensityMatrix, x: DensityMatrix) -> float:
    return trace_distance_array(x.data, _apply_map(U.data, rho1.data, x.data))


# ---------------------------------------------------------------- solvers

def _superop(U: np.ndarray, rho1: np.ndarray, Dc: int) -> np.ndarray:
    """Row-major vec superoperator of the Deutsch map."""
    S = np.empty((Dc * Dc, Dc * Dc), dtype=complex)
    for idx in range(Dc * Dc):
        E = np.zeros(Dc * Dc, dtype=complex)
        E[idx] = 1
        S[:, idx] = _apply_map(U, rho1, E.reshape(Dc, Dc)).ravel()
    return S


def _noisy_fixed_point(S: np.ndarray, eps: float) -> np.ndarray:
    """Unique fixed point of x -> M((1-eps) x + eps I/D) by a direct linear solve."""
    n = S.shape[0]
    Dc = int(round(np.sqrt(n)))
    u = (np.eye(Dc) / Dc).ravel()
    v = np.linalg.solve(np.eye(n) - (1 - eps) * S, eps * (S @ u))
    return v.reshape(Dc, Dc)


def _clean(x: np.ndarray) -> np.ndarray:
    x = 0.5 * (x + x.conj().T)
    return x / np.trace(x).real


def max_entropy_fixed_point(U: UnitaryOp, rho1: DensityMatrix, eps=RETRY_EPS) -> np.ndarray:
    """Decoherence-selected fixed point: noisy solves at each eps, quadratic
    extrapolation to eps -> 0."""
    Dc = U.data.shape[0] // rho1.dim
    S = _superop(U.data, rho1.data, Dc)
    eps = np.asarray(eps, dtype=float)
    xs = [_noisy_fixed_point(S, e) for e in eps]
    # Lagrange weights at 0
    w = np.array([np.prod([-eps[j] / (eps[i] - eps[j]) for j in range(len(eps)) if j != i])
                  for i in range(len(eps))])
    return _clean(sum(wi * xi for wi, xi in zip(w, xs)))


def solve_fixed_point_spectral(U: UnitaryOp, rho1: DensityMatrix, dims_ctc=None) -> FixedPointResult:
    """Cross-check solver via the superoperator; restricted to D_ctc <= 16."""
    _, Dc, dims_ctc = _split(U, rho1, dims_ctc)
    if Dc > 16:
        raise ValueError("spectral solve limited to D_ctc <= 16")
    x = max_entropy_fixed_point(U, rho1)
    rho = DensityMatrix(dims_ctc, x)
    return FixedPointResult(rho, 0, consistency_residual(U, rho1, rho), True, method="spectral")


def solve_fixed_point(U: UnitaryOp, rho1: DensityMatrix, cfg: FixedPointConfig | None = None,
                      dims_ctc=None) -> FixedPointResult:
    """Iterate the Deutsch map from the seed (default I/D).

    If the residual stalls for STALL_WINDOW iterations and ``noise_eps`` is 0,
    fall back to the decoherence-regularised solve extrapolated to eps -> 0.
    Raises NotConverged carrying the last result otherwise.
    """
    cfg = cfg or FixedPointConfig()
    _, Dc, dims_ctc = _split(U, rho1, dims_ctc)
    Ud, r1 = U.data, rho1.data
    mix = np.eye(Dc) / Dc
    x = mix.copy() if cfg.seed_state is None else np.array(cfg.seed_state.data)
    if x.shape != (Dc, Dc):
        raise DimensionMismatch("seed_state dimension mismatch")

    hist: list[float] = []
    best, stall = np.inf, 0
    it, step, loop_ok = 0, np.inf, False
    while True:
        if cfg.record_history:
            hist.append(entropy(DensityMatrix(dims_ctc, _clean(x))))
        xin = (1 - cfg.noise_eps) * x + cfg.noise_eps * mix if cfg.noise_eps else x
        y = _apply_map(Ud, r1, xin)
        # residual of the update actually iterated (noisy map when noise_eps > 0)
        step = trace_distance_array(x, y)
        if step <= cfg.tol:
            loop_ok = True
            break
        if it >= cfg.max_iter:
            break
        x = cfg.damping * x + (1 - cfg.damping) * y
        it += 1
        if step < best * (1 - 1e-12):
            best, stall = step, 0
        else:
            stall += 1
        if stall >= STALL_WINDOW and cfg.noise_eps == 0 and cfg.retry_on_stall and Dc <= 64:
            xe = max_entropy_fixed_point(U, rho1)
            rho = DensityMatrix(dims_ctc, xe)
            r = consistency_residual(U, rho1, rho)
            out = FixedPointResult(rho, it, r, r <= cfg.tol, "noise-extrapolated", hist)
            if not out.converged:
                raise NotConverged(f"extrapolated residual {r:.3e} > tol", out)
            return out
    rho = DensityMatrix(dims_ctc, _clean(x))
    res = consistency_residual(U, rho1, rho)
    out = FixedPointResult(rho, it, res, loop_ok, "iteration", hist)
    if not loop_ok:
        raise NotConverged(f"residual {step:.3e} after {it} iterations", out)
    return out


def deutsch_output(U: UnitaryOp, rho1: DensityMatrix, cfg: FixedPointConfig | None = None,
                   dims_ctc=None) -> DensityMatrix:
    """Tr_CTC[U (rho1 ⊗ rho2) U^+] at the selected fixed point rho2."""
    sol = solve_fixed_point(U, rho1, cfg, dims_ctc)
    return DensityMatrix(rho1.dims, _output(U.data, rho1.data, sol.rho_ctc.data))


def unroll_equivalent_circuit(U: UnitaryOp, rho1: DensityMatrix, N: int, rho0: DensityMatrix,
                              noise_eps: float = 0.0) -> DensityMatrix:
    """Explicit linear circuit: fresh copies of rho1 interact in turn with one
    carried wire started in rho0; after N rounds the final copy's CR output is read.

    The carried wire is depolarised at weight ``noise_eps`` before every round.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if U.data.shape[0] != rho1.dim * rho0.dim:
        raise DimensionMismatch("U does not act on rho1 ⊗ rho0")
    ncr = len(rho1.dims)
    ctc_idx = list(range(ncr, ncr + len(rho0.dims)))
    Ufull = UnitaryOp(rho1.dims + rho0.dims, U.data)
    mix = DensityMatrix.maximally_mixed(rho0.dims)
    wire = rho0
    for _ in range(N):
        if noise_eps:
            wire = DensityMatrix(wire.dims, (1 - noise_eps) * wire.data + noise_eps * mix.data)
        wire = partial_trace(evolve(tensor(rho1, wire), Ufull), ctc_idx)
    return partial_trace(evolve(tensor(rho1, wire), Ufull), range(ncr))


def otc_break(rho_ab: DensityMatrix, cut: Sequence[int]) -> DensityMatrix:
    """Replace rho_AB by Tr_B[rho] ⊗ Tr_A[rho]; ``cut`` lists the A subsystems.

    The result is returned in the original subsystem order.
    """
    n = len(rho_ab.dims)
    A = _normalize_keep(cut, n)
    B = [i for i in range(n) if i not in A]
    if not B:
        return rho_ab
    prod = tensor(partial_trace(rho_ab, A), partial_trace(rho_ab, B))
    order = A + B
    inv = list(np.argsort(order))
    dims = [rho_ab.dims[i] for i in order]
    t = prod.data.reshape(dims * 2).transpose(inv + [n + k for k in inv])
    return DensityMatrix(rho_ab.dims, t.reshape(rho_ab.data.shape))


def extend_with_ancilla(U: UnitaryOp, sigma_ar: DensityMatrix, n_a: int,
                        cfg: FixedPointConfig | None = None, dims_ctc=None) -> DensityMatrix:
    """Deutsch extension to a reference R: the first ``n_a`` subsystems of
    sigma are the CR input A, the rest are R.

    Output on A ⊗ R: Tr_CTC[(U ⊗ I_R)(sigma ⊗ rho_ctc)(U ⊗ I_R)^+] with rho_ctc
    solved from rho_A = Tr_R sigma.
    """
    n = len(sigma_ar.dims)
    if not 1 <= n_a <= n:
        raise DimensionMismatch("n_a outside subsystem range")
    rho_a = partial_trace(sigma_ar, range(n_a))
    sol = solve_fixed_point(U, rho_a, cfg, dims_ctc)
    rc = sol.rho_ctc
    if n_a == n:
        return DensityMatrix(rho_a.dims, _output(U.data, rho_a.data, rc.data))
    dims_a, dims_r = sigma_ar.dims[:n_a], sigma_ar.dims[n_a:]
    full_dims = list(dims_a) + list(rc.dims) + list(dims_r)
    # state ordered A, CTC, R
    sig = sigma_ar.data
    st = np.kron(sig, rc.data)  # A R CTC
    k = len(full_dims)
    na, nr, nc = len(dims_a), len(dims_r), len(rc.dims)
    src_dims = list(dims_a) + list(dims_r) + list(rc.dims)
    perm = list(range(na)) + list(range(na + nr, na + nr + nc)) + list(range(na, na + nr))
    t = st.reshape(src_dims * 2).transpose(perm + [k + p for p in perm])
    D = sig.shape[0] * rc.dim
    st = t.reshape(D, D)
    Ufull = embed(U.data, list(range(na + nc)), full_dims)
    out = Ufull @ st @ Ufull.conj().T
    keep = list(range(na)) + list(range(na + nc, k))
    return DensityMatrix(sigma_ar.dims, partial_trace_array(out, full_dims, keep))


class MultiPolicy(str, Enum):
    JOINT = "joint"
    SEPARATE = "separate"


def multi_ctc_solve(U: UnitaryOp, rho1: DensityMatrix, dims_ctc: tuple[int, int],
                    policy: MultiPolicy | str = MultiPolicy.JOINT,
                    cfg: FixedPointConfig | None = None):
    """Two CTC rails, U on H_CR ⊗ H_2 ⊗ H_3.

    JOINT returns one FixedPointResult on rail 2 ⊗ rail 3. SEPARATE returns a
    pair found by cyclic alternating updates, or raises NoSolution.
    """
    cfg = cfg or FixedPointConfig()
    policy = MultiPolicy(policy)
    d2, d3 = dims_ctc
    if U.data.shape[0] != rho1.dim * d2 * d3:
        raise DimensionMismatch("U does not act on CR ⊗ CTC2 ⊗ CTC3")
    if policy is MultiPolicy.JOINT:
        return solve_fixed_point(U, rho1, cfg, dims_ctc=(d2, d3))

    Dcr = rho1.dim
    dims = [Dcr, d2, d3]
    x2, x3 = np.eye(d2) / d2, np.eye(d3) / d3
    Ud = U.data

    def joint_out(a, b):
        y = Ud @ np.kron(np.kron(rho1.data, a), b) @ Ud.conj().T
        return y

    r2 = r3 = np.inf
    for it in range(1, cfg.max_iter + 1):
        x2 = partial_trace_array(joint_out(x2, x3), dims, [1])
        x3 = partial_trace_array(joint_out(x2, x3), dims, [2])
        y = joint_out(x2, x3)
        r2 = trace_distance_array(x2, partial_trace_array(y, dims, [1]))
        r3 = trace_distance_array(x3, partial_trace_array(y, dims, [2]))
        if max(r2, r3) <= cfg.tol:
            a = FixedPointResult(DensityMatrix((d2,), _clean(x2)), it, r2, True, "alternating")
            b = FixedPointResult(DensityMatrix((d3,), _clean(x3)), it, r3, True, "alternating")
            return a, b
    a = FixedPointResult(DensityMatrix((d2,), _clean(x2)), cfg.max_iter, r2, False, "alternating")
    b = FixedPointResult(DensityMatrix((d3,), _clean(x3)), cfg.max_iter, r3, False, "alternating")
    raise NoSolution(f"separate policy did not converge (residuals {r2:.2e}, {r3:.2e})", (a, b))
