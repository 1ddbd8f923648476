"""Dual-rail qubits with imperfectly matched wavepackets.

Each qubit gets a 4-dim single-photon space ordered [A, B, C, D]: A, B are the
rails matched to the CSIGN pump, C, D the orthogonal remainder. Index is
block * 2 + logical, so a 2x2 gate U acts as kron(I2, U) and the mismatch
rotation as kron(V, I2). Qubit 0 is the leftmost tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.integrate import quad

from .qcore import PAULI, standard_gate


class UnsupportedGate(ValueError):
    pass


# ---------------------------------------------------------------- Stokes operators

def pauli_from_modes(cutoff: int = 2) -> dict[str, np.ndarray]:
    """Stokes operators of two modes A, B projected onto {|10>, |01>}."""
    L = cutoff + 1
    a1 = np.diag(np.sqrt(np.arange(1, L)), 1)
    I = np.eye(L)
    A, B = np.kron(a1, I), np.kron(I, a1)
    Ad, Bd = A.conj().T, B.conj().T
    ops = {
        "I": Ad @ A + Bd @ B,
        "Z": Ad @ A - Bd @ B,
        "X": Ad @ B + Bd @ A,
        "Y": 1j * Bd @ A - 1j * Ad @ B,
    }
    k10, k01 = 1 * L + 0, 0 * L + 1
    idx = [k10, k01]
    return {k: v[np.ix_(idx, idx)] for k, v in ops.items()}


# ---------------------------------------------------------------- wavepacket overlaps

@dataclass(frozen=True)
class GaussianEnvelope:
    sigma: float  # momentum width, h(k) ~ exp(-(k - k0)^2 / sigma^2)
    k0: float
    x_center: float = 0.0
    v: float = 0.0  # velocity of the preparing frame towards the lab, c = 1

    def __post_init__(self):
        if self.sigma <= 0 or self.k0 <= 0:
            raise ValueError("sigma and k0 must be > 0")
        if not -1 < self.v < 1:
            raise ValueError("|v| must be < 1")

    @property
    def gamma(self) -> float:
        return 1 / np.sqrt(1 - self.v**2)

    @property
    def lab_sigma(self) -> float:
        """Width seen in the lab: sigma / (gamma (1 + v))."""
        return self.sigma / (self.gamma * (1 + self.v))


def lorentz_overlap(source: GaussianEnvelope, reference: GaussianEnvelope,
                    dx: float | None = None) -> complex:
    """Commutator [A_source, A_reference^dagger] of two Gaussian wavepackets in 1+1 d.

    ``dx`` is x_reference - x_source at the interaction time; by default it is
    taken from the envelopes' centres. The carrier phase uses reference.k0.
    """
    if dx is None:
        dx = reference.x_center - source.x_center
    s1, s2 = source.lab_sigma, reference.lab_sigma
    ssum = s1**2 + s2**2
    mag = np.sqrt(2 * s1 * s2 / ssum) * np.exp(-(s1**2) * s2**2 * dx**2 / (4 * ssum))
    return complex(mag * np.exp(1j * reference.k0 * dx))


def overlap_quadrature(source: GaussianEnvelope, reference: GaussianEnvelope,
                       dx: float | None = None) -> complex:
    """Numerical oracle: integrate g_s(k) h*(k) e^{i k dx} over k."""
    if dx is None:
        dx = reference.x_center - source.x_center
    s1, s2 = source.lab_sigma, reference.lab_sigma
    norm = np.sqrt(2 / np.pi) / np.sqrt(s1 * s2)
    a = 1 / s1**2 + 1 / s2**2

    def env(u):
        return np.exp(-a * u * u)

    U = np.sqrt(40.0 / a)  # env < 1e-17 beyond
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    re = quad(env, -U, U, weight="cos", wvar=dx, **opts)[0]
    im = quad(env, -U, U, weight="sin", wvar=dx, **opts)[0]
    return complex(norm * (re + 1j * im) * np.exp(1j * reference.k0 * dx))


# ---------------------------------------------------------------- extended circuits

def mismatch_rotation(zeta: complex) -> np.ndarray:
    """Unitary on the per-qubit [matched, orthogonal] block index."""
    if abs(zeta) > 1 + 1e-12:
        raise ValueError("|zeta| must be <= 1")
    s = np.sqrt(max(0.0, 1 - abs(zeta) ** 2))
    return np.array([[zeta, -s], [s, np.conj(zeta)]], dtype=complex)


@dataclass
class MismatchCircuit:
    n_qubits: int
    gates: list = field(default_factory=list)  # ("U", q, 2x2) | ("CSIGN", i, j)
    zetas: list | None = None

    def __post_init__(self):
        if self.zetas is None:
            self.zetas = [1.0] * self.n_qubits
        if len(self.zetas) != self.n_qubits:
            raise ValueError("one overlap per qubit")
        if any(abs(z) > 1 + 1e-12 for z in self.zetas):
            raise ValueError("|zeta| must be <= 1")

    def single(self, q: int, U) -> "MismatchCircuit":
        self.gates.append(("U", q, np.asarray(U, dtype=complex)))
        return self

    def csign(self, i: int, j: int) -> "MismatchCircuit":
        self.gates.append(("CSIGN", i, j))
        return self

    def cnot(self, control: int, target: int) -> "MismatchCircuit":
        H = standard_gate("H").data
        return self.single(target, H).csign(control, target).single(target, H)


def _embed_local(op4: np.ndarray, q: int, n: int) -> np.ndarray:
    return reduce(np.kron, [op4 if k == q else np.eye(4) for k in range(n)])


def _csign_diag(i: int, j: int, n: int) -> np.ndarray:
    digits = np.indices((4,) * n).reshape(n, -1)
    hit = (digits[i] == 1) & (digits[j] == 1)  # both in matched logical 1
    return np.where(hit, -1.0, 1.0)


def extended_unitary(circ: MismatchCircuit) -> np.ndarray:
    n = circ.n_qubits
    U = np.eye(4**n, dtype=complex)
    for g in circ.gates:
        if g[0] == "U":
            _, q, M = g
            if M.shape != (2, 2):
                raise UnsupportedGate("single-qubit gates must be 2x2")
            U = _embed_local(np.kron(np.eye(2), M), q, n) @ U
        elif g[0] == "CSIGN":
            _, i, j = g
            if i == j:
                raise UnsupportedGate("CSIGN needs two distinct qubits")
            U = _csign_diag(i, j, n)[:, None] * U
        else:
            raise UnsupportedGate(f"gate {g[0]!r} is outside the CSIGN + single-qubit set")
    return U


def _observable(observable, n: int) -> np.ndarray:
    if isinstance(observable, str):
        if len(observable) != n:
            raise ValueError("one Pauli label per qubit")
        mats = [PAULI[c] for c in observable.upper()]
    else:
        mats = [np.asarray(m, dtype=complex) for m in observable]
    # detectors respond to matched and orthogonal modes alike: J_AB + J_CD
    return reduce(np.kron, [np.kron(np.eye(2), m) for m in mats])


def extended_expectation(circ: MismatchCircuit, observable) -> float:
    """<psi_in| V^+ U^+ J U V |psi_in> on the doubled space, psi_in = matched |0...0>."""
    n = circ.n_qubits
    V = reduce(np.kron, [np.kron(mismatch_rotation(z), np.eye(2)) for z in circ.zetas])
    psi = np.zeros(4**n, dtype=complex)
    psi[0] = 1.0
    out = extended_unitary(circ) @ (V @ psi)
    return float(np.real(np.vdot(out, _observable(observable, n) @ out)))


def preparation(alpha: float) -> np.ndarray:
    c = np.sqrt(1 - alpha**2)
    return np.array([[c, -alpha], [alpha, c]])


def relativistic_cnot(alpha: float, v: float, dx: float, sigma: float = 1.0, k0: float = 10.0) -> float:
    """<I_1 Z_2> after a CNOT whose target photon is prepared in a frame moving at v
    and displaced by dx from the pump at the interaction time."""
    if abs(alpha) > 1:
        raise ValueError("|alpha| must be <= 1")
    zeta = lorentz_overlap(GaussianEnvelope(sigma, k0, v=v), GaussianEnvelope(sigma, k0), dx)
    circ = MismatchCircuit(2, zetas=[1.0, zeta]).single(0, preparation(alpha)).cnot(0, 1)
    return extended_expectation(circ, "IZ")
