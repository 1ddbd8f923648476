"""Single photons on a CTC beamsplitter and the multiplexed SPDC photon source.

SPDC pair counts follow the two-mode squeezed distribution
P(n) = tanh^{2n}(chi) / cosh^2(chi); the detector is a bucket detector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm

from ._parallel import chunk_streams, pmap
from .gaussianctc import BsParams, ctc_coefficients

MC_CHUNK = 10_000


@dataclass(frozen=True)
class EcCoefficients:
    eta: float
    phi: float
    j: np.ndarray
    tail_bound: float

    @property
    def total(self) -> complex:
        return complex(self.j.sum())


def ec_output_coefficients(eta: float, phi: float, N: int) -> EcCoefficients:
    """Weights j_0..j_N of the detected mode after N equivalent-circuit rails."""
    if N < 1:
        raise ValueError("N must be >= 1")
    bs = BsParams(eta, phi)
    j = ctc_coefficients(bs, N)
    return EcCoefficients(eta, phi, j, float((1 - eta) ** (N / 2)))


def photon_ctc_stats(eta: float, phi: float = 0.0) -> dict:
    """Closed-form mean photon number and g2 for a single photon on the CTC beamsplitter."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    return {"mean_n": 1.0, "g2": 8 * eta * (1 - eta) / (2 - eta)}


def _fock_identities(j: np.ndarray) -> tuple[float, float]:
    # <A_n^+ A_m> = delta; 4-point function from the single-photon delta identity
    w = np.abs(j) ** 2
    mean = float(w.sum())
    return mean, float(2 * mean**2 - 2 * np.sum(w**2))


def _fock_statevector(j_eta: float, phi: float, N: int, cutoff: int) -> tuple[float, float]:
    """Brute-force Fock evolution of |1>^{⊗(N+1)} through T(0,1)...T(N-1,N)."""
    n_modes = N + 1
    L = cutoff + 1
    a = np.diag(np.sqrt(np.arange(1, L)), 1)
    eye = np.eye(L)

    def op(k, m):
        return reduce(np.kron, [m if i == k else eye for i in range(n_modes)])

    A = [op(k, a) for k in range(n_modes)]
    theta = np.arccos(np.sqrt(j_eta))
    U = np.eye(L**n_modes, dtype=complex)
    for i in range(N):
        G = theta * (np.exp(1j * phi) * A[i].T @ A[i + 1] - np.exp(-1j * phi) * A[i + 1].T @ A[i])
        U = U @ expm(G)
    psi = np.zeros(L**n_modes, dtype=complex)
    psi[int(sum(L ** (n_modes - 1 - k) for k in range(n_modes)))] = 1.0
    out = U @ psi
    n1 = A[1].T @ A[1]
    mean = float(np.vdot(out, n1 @ out).real)
    a2 = A[1] @ A[1] @ out
    return mean, float(np.vdot(a2, a2).real) / mean**2


def fock_simulate(eta: float, phi: float, N_rails: int, cutoff: int | None = None,
                  method: str = "identities") -> dict:
    """Finite-N oracle for the single-photon CTC statistics.

    ``identities`` sums the delta identities over the exact coefficients;
    ``statevector`` evolves the full truncated Fock space (N_rails <= 3).
    """
    if method == "identities":
        mean, g2 = _fock_identities(ctc_coefficients(BsParams(eta, phi), N_rails))
    elif method == "statevector":
        if N_rails > 3:
            raise ValueError("statevector method limited to N_rails <= 3")
        mean, g2 = _fock_statevector(eta, phi, N_rails, cutoff or N_rails + 1)
    else:
        raise ValueError(method)
    return {"mean_n": mean, "g2": g2}


# ---------------------------------------------------------------- SPOD source

@dataclass(frozen=True)
class SpodParams:
    chi: float
    N: int
    mu: float = 1.5
    nu: float = 0.5

    def __post_init__(self):
        if not 0 < self.chi < 1:
            raise ValueError("chi must lie in (0, 1)")
        if self.N < 0:
            raise ValueError("N must be >= 0")
        if self.chi > 0.1:
            warnings.warn("chi > 0.1: the order-chi^4 closed forms lose accuracy", stacklevel=2)


def spod_stats(p: SpodParams) -> dict:
    """Order-chi^4 closed forms for the output mean photon number and g2."""
    x2 = p.chi**2
    F = (1 - x2) ** p.N
    a = 4 - 4 * x2 + 9 * x2**2
    b = 4 - 5 * x2**2
    mean = a * (F - 1) / (-b)
    g2 = -2 * x2 * b**2 / (a**2 * (F - 1)) if p.N > 0 else float("nan")
    return {"mean_n": float(mean), "g2": float(g2)}


def spod_exact_stats(p: SpodParams) -> dict:
    """Exact statistics of the switching source under the two-mode squeezed
    distribution: first click index is geometric in tanh^2 chi and the
    selected signal count is geometric on n >= 1."""
    lam = math.tanh(p.chi) ** 2
    p_click = -math.expm1(p.N * math.log1p(-lam))
    mean = p_click / (1 - lam)
    g2 = 2 * lam / p_click if p_click > 0 else float("nan")
    return {"mean_n": mean, "g2": g2, "p_click": p_click}


def spod_min_sources(chi: float, epsilon: float) -> int:
    """Smallest N with (1 - chi^2)^N < epsilon."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    if epsilon == 1:
        return 1
    n = math.log(epsilon) / math.log1p(-chi**2)
    N = max(1, math.ceil(n))
    while (1 - chi**2) ** N >= epsilon:
        N += 1
    while N > 1 and (1 - chi**2) ** (N - 1) < epsilon:
        N -= 1
    return N


def spod_f_values(chi: float, mu: float = 1.5, nu: float = 0.5, p: float = 1.0) -> np.ndarray:
    """Vacuum moments f1..f5 of the source's per-SPDC operators, computed in a
    two-mode Fock space truncated where the moments are exact.

    Uses u' = p v + q u^+, v' = p u + q v^+ with q = chi, d = (mu - nu n_u') n_u'.
    f4 carries (1 - d)^2, which is what the cross term actually contains.
    """
    q = chi
    L = 12
    a = np.diag(np.sqrt(np.arange(1, L)), 1)
    I = np.eye(L)
    u, v = np.kron(a, I), np.kron(I, a)
    up = p * v + q * u.T
    vp = p * u + q * v.T
    n = up.T @ up
    Id = np.eye(L * L)
    d = (mu * Id - nu * n) @ n
    od = Id - d
    vac = np.zeros(L * L)
    vac[0] = 1.0

    def ev(*ops):
        k = vac
        for O in reversed(ops):
            k = O @ k
        return float(vac @ k)

    return np.array([
        ev(vp.T, d, d, vp),
        ev(od, od),
        ev(od, od, od, od),
        ev(vp.T, d, d, vp, od, od),
        ev(vp.T, d, vp.T, d, d, vp, d, vp),
    ])


def spod_stats_polynomial(p: SpodParams) -> dict:
    """Mean and g2 from the f-polynomial sums, evaluated term by term."""
    f1, f2, f3, f4, f5 = spod_f_values(p.chi, p.mu, p.nu)
    k = np.arange(1, p.N + 1)
    mean = f1 * np.sum(f2 ** (k - 1))
    cross = np.sum(f3 ** (k - 1) * (1 - f2 ** (p.N - k)) / (1 - f2))
    aadaa = 4 * f1 * f4 * cross + f5 * np.sum(f3 ** (k - 1))
    return {"mean_n": float(mean), "g2": float(aadaa / mean**2)}


@dataclass
class SpodMC:
    mean_n: float
    g2: float
    stderr_mean: float
    stderr_g2: float
    trials: int
    rng: str = "numpy PCG64 via SeedSequence.spawn"


def _sample_geometric_shortcut(m: int, rng: np.random.Generator, lam: float, N: int) -> np.ndarray:
    first = rng.geometric(lam, size=m)
    n = rng.geometric(1 - lam, size=m)
    return np.where(first <= N, n, 0)


def _sample_explicit(m: int, rng: np.random.Generator, lam: float, N: int) -> np.ndarray:
    # pair count per SPDC: geometric on n >= 0 with P(n) = (1-lam) lam^n
    counts = rng.geometric(1 - lam, size=(m, N)) - 1
    click = counts >= 1
    first = np.argmax(click, axis=1)
    any_click = click.any(axis=1)
    return np.where(any_click, counts[np.arange(m), first], 0)


def spod_montecarlo(p: SpodParams, trials: int, seed: int = 0, method: str = "shortcut",
                    workers: int | None = None) -> SpodMC:
    """Monte-Carlo of the switching source; ``explicit`` samples every SPDC."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lam = math.tanh(p.chi) ** 2
    sampler = {"shortcut": _sample_geometric_shortcut, "explicit": _sample_explicit}[method]

    def run(job):
        m, rng = job
        n = sampler(m, rng, lam, p.N).astype(float)
        return n.sum(), (n * (n - 1)).sum(), (n * n).sum(), ((n * (n - 1)) ** 2).sum(), (n * n * (n - 1)).sum()

    parts = np.array(pmap(run, chunk_streams(seed, trials, MC_CHUNK), workers))
    s1, s2, sq, s22, s12 = parts.sum(axis=0)
    T = trials
    m1, m2 = s1 / T, s2 / T
    var1 = max(sq / T - m1**2, 0.0)
    var2 = max(s22 / T - m2**2, 0.0)
    cov12 = s12 / T - m1 * m2
    if m1 <= 0:
        return SpodMC(0.0, float("nan"), math.sqrt(var1 / T), float("nan"), T)
    g2 = m2 / m1**2
    # delta method on g2 = m2 / m1^2
    dg = np.array([-2 * m2 / m1**3, 1 / m1**2])
    C = np.array([[var1, cov12], [cov12, var2]]) / T
    return SpodMC(float(m1), float(g2), math.sqrt(var1 / T), float(np.sqrt(dg @ C @ dg)), T)
