"""Gaussian states through a beamsplitter CTC and through open timelike curves.

Quadratures are Q = A + A^dagger and P = i(A^dagger - A); vacuum covariance is
the identity and the uncertainty bound reads sigma_Q sigma_P >= 1. Phase-space
vectors are ordered (Q1, P1, Q2, P2, ...).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


class SingularCovariance(ValueError):
    pass


@dataclass(frozen=True)
class BsParams:
    eta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")

    @property
    def z(self) -> complex:
        """Loop amplitude per round trip, e^{i phi} sqrt(1 - eta)."""
        return np.exp(1j * self.phi) * np.sqrt(1.0 - self.eta)


@dataclass(frozen=True)
class GaussianPrep:
    """D(alpha) R(theta_R) S(r e^{2 i theta_S}) acting on vacuum."""

    alpha: complex = 0.0
    r: float = 0.0
    theta_R: float = 0.0
    theta_S: float = 0.0

    @property
    def c(self) -> complex:
        return np.exp(1j * self.theta_R) * np.cosh(self.r)

    @property
    def s(self) -> complex:
        return np.exp(1j * (self.theta_R - 2 * self.theta_S)) * np.sinh(self.r)

    @property
    def pq(self) -> complex:
        """<V V> for the undisplaced mode, V = c A + s A^dagger."""
        return self.c * self.s


@dataclass
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (self.mean.size, self.mean.size) or self.mean.size % 2:
            raise ValueError("mean and covariance shapes disagree")

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def validate(self) -> "GaussianState":
        if np.abs(self.cov - self.cov.T).max() > 1e-12:
            raise ValueError("covariance not symmetric")
        lam = np.linalg.eigvalsh(self.cov + 1j * omega(self.n_modes))
        if lam.min() < -1e-8:
            raise ValueError("covariance violates the uncertainty relation")
        return self

    def marginal(self, modes) -> "GaussianState":
        idx = np.ravel([[2 * m, 2 * m + 1] for m in modes])
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])


def omega(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


# ---------------------------------------------------------------- elementary states and gates

def coherent(alpha: complex) -> GaussianState:
    return GaussianState([2 * np.real(alpha), 2 * np.imag(alpha)], np.eye(2))


def squeezed(r: float, quadrature: str = "Q", alpha: complex = 0.0) -> GaussianState:
    """Squeezed state with variance e^{-2r} along the named quadrature."""
    v = np.diag([np.exp(-2 * r), np.exp(2 * r)])
    if quadrature.upper() == "P":
        v = v[::-1, ::-1]
    return GaussianState([2 * np.real(alpha), 2 * np.imag(alpha)], v)


def thermal(nbar: float) -> GaussianState:
    return GaussianState(np.zeros(2), (2 * nbar + 1) * np.eye(2))


def two_mode_squeezed(r: float) -> GaussianState:
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    Z = np.diag([1.0, -1.0])
    cov = np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])
    return GaussianState(np.zeros(4), cov)


def product(*states: GaussianState) -> GaussianState:
    mean = np.concatenate([s.mean for s in states])
    n = mean.size
    cov = np.zeros((n, n))
    k = 0
    for s in states:
        m = s.mean.size
        cov[k:k + m, k:k + m] = s.cov
        k += m
    return GaussianState(mean, cov)


def mode_transform(u: complex, v: complex = 0.0) -> np.ndarray:
    """Real 2x2 matrix for A -> u A + v A^dagger acting on (Q, P)."""
    return np.array([[np.real(u + v), np.imag(v - u)],
                     [np.imag(u + v), np.real(u - v)]])


def rotation(theta: float) -> np.ndarray:
    """Quadrature map for A -> e^{i theta} A."""
    return mode_transform(np.exp(1j * theta))


def beamsplitter(eta: float, phi: float = 0.0, n: int = 2, i: int = 0, j: int = 1) -> np.ndarray:
    """Symplectic matrix of T(i, j) in the Heisenberg picture:
    A_i -> sqrt(eta) A_i + e^{i phi} sqrt(1-eta) A_j,
    A_j -> sqrt(eta) A_j - e^{-i phi} sqrt(1-eta) A_i."""
    S = np.eye(2 * n)
    t = np.sqrt(1 - eta)
    si, sj = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
    S[si, si] = np.sqrt(eta) * np.eye(2)
    S[si, sj] = mode_transform(np.exp(1j * phi) * t)
    S[sj, sj] = np.sqrt(eta) * np.eye(2)
    S[sj, si] = mode_transform(-np.exp(-1j * phi) * t)
    return S


def apply_symplectic(state: GaussianState, S: np.ndarray) -> GaussianState:
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def otc_break_gaussian(state: GaussianState, modes) -> GaussianState:
    """Zero the covariance between ``modes`` and the rest; marginals kept."""
    idx = np.ravel([[2 * m, 2 * m + 1] for m in modes]).astype(int)
    rest = np.setdiff1d(np.arange(state.mean.size), idx)
    cov = state.cov.copy()
    cov[np.ix_(idx, rest)] = 0.0
    cov[np.ix_(rest, idx)] = 0.0
    return GaussianState(state.mean.copy(), cov)


def moments_to_state(mean_v: complex, vv: complex, vdv: complex) -> GaussianState:
    """Single-mode state from <V>, <V V>, <V^dagger V>."""
    m2 = vv - mean_v**2
    n = (vdv - abs(mean_v) ** 2).real
    var_q = 2 * m2.real + 2 * n + 1
    var_p = -2 * m2.real + 2 * n + 1
    cqp = 2 * m2.imag
    return GaussianState([2 * mean_v.real, 2 * mean_v.imag],
                         np.array([[var_q, cqp], [cqp, var_p]]))


# ---------------------------------------------------------------- CTC beamsplitter

def ctc_coefficients(bs: BsParams, N: int) -> np.ndarray:
    """Exact finite-N equivalent-circuit weights j_0..j_N of A'_1 = sum j_m A_m."""
    z = bs.z
    j = np.empty(N + 1, dtype=complex)
    j[0] = -np.conj(z)
    m = np.arange(1, N)
    j[1:N] = bs.eta * z ** (m - 1)
    j[N] = np.sqrt(bs.eta) * z ** (N - 1)
    return j


def feedback_phase(bs: BsParams) -> complex:
    """e^{i Phi}: the zero-delay loop amplitude (1 - conj z)/(1 - z); unit modulus."""
    z = bs.z
    if abs(1 - z) < 1e-300:
        return 1.0 + 0j
    return (1 - np.conj(z)) / (1 - z)


def sum_j_squared(bs: BsParams) -> complex:
    """sum_m j_m^2 in the N -> infinity limit."""
    z = bs.z
    if bs.eta == 0:
        return np.conj(z) ** 2
    return bs.eta**2 / (1 - z**2) + np.conj(z) ** 2


@dataclass
class CtcMoments:
    v: complex
    vv: complex
    vdv: complex
    phase: complex
    state: GaussianState


def ctc_beamsplitter_moments(bs: BsParams, prep: GaussianPrep) -> CtcMoments:
    """Closed-form N -> infinity moments of the CTC output mode."""
    ph = feedback_phase(bs)
    v = ph * prep.alpha
    vv = prep.pq * sum_j_squared(bs) + v**2
    vdv = abs(prep.s) ** 2 + abs(prep.alpha) ** 2
    return CtcMoments(v, vv, vdv, ph, moments_to_state(v, vv, vdv))


def ctc_series_moments(bs: BsParams, prep: GaussianPrep, N: int = 10_000) -> CtcMoments:
    """Finite-N oracle summing the equivalent circuit term by term.

    Truncation error of the neglected tail is bounded by (1 - eta)^{N/2}.
    """
    j = ctc_coefficients(bs, N)
    sj = j.sum()
    v = sj * prep.alpha
    vv = prep.pq * np.sum(j**2) + v**2
    vdv = abs(prep.s) ** 2 * np.sum(abs(j) ** 2) + abs(v) ** 2
    return CtcMoments(v, vv, vdv, sj, moments_to_state(v, vv, vdv))


def squeeze_constants(bs: BsParams) -> tuple[float, float]:
    """K1, K2 of the squeezed-vacuum output covariance."""
    eta, phi = bs.eta, bs.phi
    den = 2 + (eta - 2) * eta + 2 * (eta - 1) * np.cos(2 * phi)
    if abs(den) < 1e-300:  # eta = 0 with sin(phi) = 0: pure phase
        return float(np.cos(2 * phi)), 0.0
    k1 = np.cos(2 * phi) + 2 * eta * np.sin(phi) ** 2 * (2 * (eta - 1) * np.cos(2 * phi) + eta) / den
    k2 = -8 * (eta - 1) ** 2 * np.cos(phi) * np.sin(phi) ** 3 / den
    return float(k1), float(k2)


def ctc_squeezed_covariance(bs: BsParams, r: float) -> np.ndarray:
    """Output covariance for a squeezed vacuum sent around the beamsplitter CTC.

    Returned in (P, Q) order for an input squeezed along P, so that phi = 0
    gives diag(e^{-2r}, e^{2r}). Equals ``ctc_beamsplitter_moments`` with
    ``GaussianPrep(r=r)`` after reordering to (P, Q).
    """
    k1, k2 = squeeze_constants(bs)
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    return np.array([[c - k1 * s, k2 * s], [k2 * s, c + k1 * s]])


# ---------------------------------------------------------------- open timelike curves

def otc_variances(M: int, r: float) -> tuple[float, float]:
    """Closed-form (Var Q, Var P) after M OTC passes with Q-squeezed ancillas."""
    if M < 0:
        raise ValueError("M must be >= 0")
    R = 2 * r / LN2
    vq = (1 + 2.0 ** (M - R) - 2.0 ** (-R)) / 2.0**M
    vp = (1 + 2.0 ** (M + R) - 2.0**R) / 2.0**M
    return float(vq), float(vp)


_BS5050 = beamsplitter(0.5, 0.0)  # A -> (A+B)/sqrt2, B -> (B-A)/sqrt2


def otc_pass(state: GaussianState, r: float, quadrature: str = "Q") -> GaussianState:
    """One pass: 50:50 beamsplitter with a fresh squeezed ancilla, OTC on the
    signal arm, inverse beamsplitter; returns the signal marginal."""
    joint = product(state, squeezed(r, quadrature))
    joint = apply_symplectic(joint, _BS5050)
    joint = otc_break_gaussian(joint, [0])
    joint = apply_symplectic(joint, _BS5050.T)
    return joint.marginal([0])


def otc_circuit_simulate(M: int, r: float, alpha: complex = 0.0, quadrature: str = "Q") -> GaussianState:
    if M < 1:
        raise ValueError("M must be >= 1")
    st = coherent(complex(alpha))
    for _ in range(M):
        st = otc_pass(st, r, quadrature)
    return st


@dataclass
class HupResult:
    var_q_a: float
    var_p_c: float
    product_std: float
    mean_photons_ancilla: float  # per arm, summed over the M ancillas


def hup_demo(M: int, r: float, alpha: complex = 0.0) -> HupResult:
    """Split alpha on a 50:50 beamsplitter, squeeze arm A in Q and arm C in P
    through M OTC passes each, then read Q_A and P_C."""
    a = complex(alpha) / np.sqrt(2)
    A = otc_circuit_simulate(M, r, a, "Q")
    C = otc_circuit_simulate(M, r, a, "P")
    vq, vp = A.cov[0, 0], C.cov[1, 1]
    return HupResult(float(vq), float(vp), float(np.sqrt(vq * vp)), float(M * np.sinh(r) ** 2))


def hup_resource_scaling(N: int) -> tuple[float, float]:
    """(K, ancilla <n>) for R = N and M = N, where Var Q_A = K / 2^N."""
    r = N * LN2 / 2
    vq, _ = otc_variances(N, r)
    return float(vq * 2.0**N), float(N * np.sinh(r) ** 2)


# ---------------------------------------------------------------- Wigner function

def wigner_grid(state: GaussianState, extent: float = 6.0, resolution: int = 201):
    """W(q, p) = exp(-(x-mu)^T cov^{-1} (x-mu)) / (pi sqrt(det cov)) on a square grid.

    Returns (q, p, W) with W indexed [i_q, i_p].
    """
    if state.n_modes != 1:
        raise ValueError("wigner_grid needs a single mode")
    det = np.linalg.det(state.cov)
    if det < 1e-14:
        raise SingularCovariance(f"det = {det}")
    ax = np.linspace(-extent, extent, resolution)
    Qg, Pg = np.meshgrid(ax, ax, indexing="ij")
    d = np.stack([Qg - state.mean[0], Pg - state.mean[1]], axis=-1)
    inv = np.linalg.inv(state.cov)
    quad = np.einsum("...i,ij,...j->...", d, inv, d)
    return ax, ax.copy(), np.exp(-quad) / (np.pi * np.sqrt(det))
