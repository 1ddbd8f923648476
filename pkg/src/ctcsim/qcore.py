"""Dense finite-dimensional quantum primitives.

Everything is a small immutable value object wrapping a complex numpy array.
Validation is explicit (``validate``) so that iterative solvers may pass
through states with tiny negative eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
POS_TOL = -1e-10
UNITARY_TOL = 1e-10
EIG_CLAMP = 1e-14


class DimensionMismatch(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class UnknownGate(KeyError):
    pass


class InvalidState(ValueError):
    pass


def _prod(dims: Sequence[int]) -> int:
    return int(np.prod(dims)) if len(dims) else 1


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        data = np.array(self.data, dtype=complex)
        D = _prod(dims)
        if data.shape != (D, D):
            raise DimensionMismatch(f"data shape {data.shape} does not match dims {dims}")
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def validate(self) -> "DensityMatrix":
        """Raise InvalidState unless Hermitian, unit trace and PSD."""
        rho = self.data
        if np.abs(rho - rho.conj().T).max() > HERM_TOL:
            raise InvalidState("not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise InvalidState(f"trace {np.trace(rho)} != 1")
        if np.linalg.eigvalsh(rho).min() < POS_TOL:
            raise InvalidState("negative eigenvalue")
        return self

    def is_valid(self) -> bool:
        try:
            self.validate()
        except InvalidState:
            return False
        return True

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))

    def __repr__(self) -> str:
        return f"DensityMatrix(dims={self.dims})"

    @staticmethod
    def from_ket(psi, dims: Sequence[int] | None = None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        if dims is None:
            dims = _qubit_dims(psi.size)
        return DensityMatrix(tuple(dims), np.outer(psi, psi.conj()))

    @staticmethod
    def maximally_mixed(dims: Sequence[int]) -> "DensityMatrix":
        D = _prod(dims)
        return DensityMatrix(tuple(dims), np.eye(D) / D)


def _qubit_dims(D: int) -> tuple[int, ...]:
    n = int(round(np.log2(D)))
    if 2**n != D:
        return (D,)
    return (2,) * max(n, 1)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        data = np.array(self.data, dtype=complex)
        D = _prod(dims)
        if data.shape != (D, D):
            raise DimensionMismatch(f"unitary shape {data.shape} does not match dims {dims}")
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    def validate(self) -> "UnitaryOp":
        D = self.data.shape[0]
        if np.abs(self.data.conj().T @ self.data - np.eye(D)).max() > UNITARY_TOL:
            raise InvalidState("not unitary")
        return self

    def __matmul__(self, other: "UnitaryOp") -> "UnitaryOp":
        if self.data.shape != other.data.shape:
            raise DimensionMismatch("cannot compose unitaries of different size")
        return UnitaryOp(self.dims, self.data @ other.data)

    def dagger(self) -> "UnitaryOp":
        return UnitaryOp(self.dims, self.data.conj().T)

    def kron(self, other: "UnitaryOp") -> "UnitaryOp":
        return UnitaryOp(self.dims + other.dims, np.kron(self.data, other.data))

    def __repr__(self) -> str:
        return f"UnitaryOp(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Kraus-form channel. ``dims_out`` labels the output subsystems."""

    kraus_ops: tuple[np.ndarray, ...]
    dims_in: tuple[int, ...]
    dims_out: tuple[int, ...]

    def __post_init__(self):
        ks = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ks:
            raise ValueError("channel needs at least one Kraus operator")
        object.__setattr__(self, "kraus_ops", ks)
        object.__setattr__(self, "dims_in", tuple(self.dims_in))
        object.__setattr__(self, "dims_out", tuple(self.dims_out))

    def completeness_error(self) -> float:
        S = sum(k.conj().T @ k for k in self.kraus_ops)
        return float(np.abs(S - np.eye(S.shape[0])).max())

    def validate(self) -> "QuantumChannel":
        if self.completeness_error() > UNITARY_TOL:
            raise InvalidState("Kraus operators are not trace preserving")
        return self

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        return sum(k @ x @ k.conj().T for k in self.kraus_ops)

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        if rho.dim != self.kraus_ops[0].shape[1]:
            raise DimensionMismatch("channel input dimension mismatch")
        return DensityMatrix(self.dims_out, self.apply_array(rho.data))

    def superoperator(self) -> np.ndarray:
        """Column-stacking (row-major vec) superoperator: vec(K x K^+) = (K ⊗ K*) vec(x)."""
        return sum(np.kron(k, k.conj()) for k in self.kraus_ops)


# ---------------------------------------------------------------- operations

def tensor(a: DensityMatrix, b: DensityMatrix, *more: DensityMatrix) -> DensityMatrix:
    out = DensityMatrix(a.dims + b.dims, np.kron(a.data, b.data))
    for m in more:
        out = tensor(out, m)
    return out


def _normalize_keep(keep: Iterable[int], n: int) -> list[int]:
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise IndexOutOfRange("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexOutOfRange(f"keep {keep} outside subsystems 0..{n - 1}")
    return keep


def partial_trace_array(data: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    keep = sorted(keep)
    trace_out = [i for i in range(n) if i not in keep]
    t = np.asarray(data).reshape(tuple(dims) * 2)
    # contract traced pairs, highest index first so positions stay valid
    for i in sorted(trace_out, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + m)
    Dk = _prod([dims[i] for i in keep])
    return t.reshape(Dk, Dk)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = _normalize_keep(keep, len(rho.dims))
    data = partial_trace_array(rho.data, rho.dims, keep)
    return DensityMatrix(tuple(rho.dims[i] for i in keep), data)


def evolve(rho: DensityMatrix, U: UnitaryOp) -> DensityMatrix:
    if U.data.shape != rho.data.shape:
        raise DimensionMismatch(f"unitary {U.data.shape} vs state {rho.data.shape}")
    return DensityMatrix(rho.dims, U.data @ rho.data @ U.data.conj().T)


def entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    lam = rho.eigvals()
    lam = lam[lam > EIG_CLAMP]
    return float(-(lam * np.log2(lam)).sum()) if lam.size else 0.0


def trace_distance_array(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.data.shape != sigma.data.shape:
        raise DimensionMismatch("trace distance needs equal total dimension")
    return trace_distance_array(rho.data, sigma.data)


# ---------------------------------------------------------------- gates

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


def standard_gate(name: str, *params) -> UnitaryOp:
    """Named gate. ``ROT`` takes (theta, axis) and returns exp(-i theta/2 sigma_axis).

    CNOT has control on the first factor, target on the second.
    """
    key = name.upper()
    if key in ("I", "X", "Y", "Z"):
        return UnitaryOp((2,), PAULI[key])
    if key == "H":
        return UnitaryOp((2,), _H)
    if key == "CNOT":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = _X
        return UnitaryOp((2, 2), m)
    if key == "SWAP":
        m = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
        return UnitaryOp((2, 2), m)
    if key == "CSIGN":
        return UnitaryOp((2, 2), np.diag([1, 1, 1, -1]).astype(complex))
    if key == "ROT":
        if len(params) != 2:
            raise ValueError("ROT needs (theta, axis)")
        theta, axis = params
        s = PAULI[str(axis).upper()]
        return UnitaryOp((2,), np.cos(theta / 2) * _I2 - 1j * np.sin(theta / 2) * s)
    raise UnknownGate(name)


def swap_subsystems(dims_a: Sequence[int], dims_b: Sequence[int]) -> UnitaryOp:
    """Permutation unitary mapping H_A ⊗ H_B -> H_B ⊗ H_A."""
    Da, Db = _prod(dims_a), _prod(dims_b)
    P = np.zeros((Da * Db, Da * Db), dtype=complex)
    for i in range(Da):
        for j in range(Db):
            P[j * Da + i, i * Db + j] = 1
    return UnitaryOp(tuple(dims_b) + tuple(dims_a), P)


def embed(op: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Lift an operator on the ``targets`` subsystems (in the given order) to the full space."""
    n = len(dims)
    targets = list(targets)
    rest = [i for i in range(n) if i not in targets]
    Dt = _prod([dims[i] for i in targets])
    Dr = _prod([dims[i] for i in rest])
    full = np.kron(np.asarray(op, dtype=complex).reshape(Dt, Dt), np.eye(Dr))
    order = targets + rest
    shape = [dims[i] for i in order]
    t = full.reshape(shape * 2)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + k for k in inv])
    D = _prod(dims)
    return t.reshape(D, D)


# ---------------------------------------------------------------- helpers

def ket(labels: str) -> np.ndarray:
    """Product ket from single-qubit labels in {0,1,+,-,r,l} (r/l are the Y eigenstates)."""
    basis = {
        "0": np.array([1, 0]),
        "1": np.array([0, 1]),
        "+": np.array([1, 1]) / np.sqrt(2),
        "-": np.array([1, -1]) / np.sqrt(2),
        "r": np.array([1, 1j]) / np.sqrt(2),
        "l": np.array([1, -1j]) / np.sqrt(2),
    }
    return reduce(np.kron, [basis[c].astype(complex) for c in labels])


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real
