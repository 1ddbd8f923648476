"""Finite-size CTCs: the equivalent circuit with overlapping rail modes.

Each rail m of the equivalent circuit carries a mode A_(m) whose commutator
with A_(n) is C_mn = exp(-kappa^2 (m - n)^2). kappa -> infinity recovers the
pointlike (Deutsch) circuit; kappa -> 0 collapses all rails onto one mode and
the CTC reduces to a zero-delay feedback loop.

Output modes are kept as coefficient lists indexed by rail, so every result
is of the form sum_m f_m(A_(m), A_(m)^dagger).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .gaussianctc import (BsParams, GaussianPrep, GaussianState, apply_symplectic, beamsplitter,
                          ctc_coefficients, feedback_phase, mode_transform, moments_to_state,
                          product, wigner_grid)

# physical constants (SI)
G_NEWTON = 6.67430e-11
M_EARTH = 5.9722e24
R_EARTH = 6.371e6
C_LIGHT = 299_792_458.0

TAIL_TOL = 1e-8
KERNEL_DROP = 1e-12
COEFF_DROP = 1e-12


class TruncationTooSmall(ValueError):
    pass


# ---------------------------------------------------------------- kernels

@dataclass(frozen=True)
class PhysicalCoupling:
    sigma_t: float  # detector temporal resolution, s
    delta_tau: float  # CTC size / path-length gain, s

    def __post_init__(self):
        if self.sigma_t <= 0 or self.delta_tau < 0:
            raise ValueError("sigma_t must be > 0 and delta_tau >= 0")


@dataclass(frozen=True, eq=False)
class CommutatorKernel:
    """Either a Gaussian kernel exp(-kappa^2 d^2) or an explicit (N+1)x(N+1) matrix."""

    kappa: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.kappa is None) == (self.matrix is None):
            raise ValueError("give exactly one of kappa or matrix")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.matrix is not None:
            C = np.asarray(self.matrix, dtype=float)
            if C.ndim != 2 or C.shape[0] != C.shape[1]:
                raise ValueError("kernel matrix must be square")
            if not np.allclose(np.diag(C), 1.0) or not np.allclose(C, C.T):
                raise ValueError("kernel matrix must be symmetric with unit diagonal")
            if C.min() < 0 or C.max() > 1 + 1e-12:
                raise ValueError("kernel entries must lie in [0, 1]")
            object.__setattr__(self, "matrix", C)

    @classmethod
    def gaussian(cls, kappa: float) -> "CommutatorKernel":
        return cls(kappa=float(kappa))

    @property
    def is_gaussian(self) -> bool:
        return self.kappa is not None

    @property
    def N(self) -> int | None:
        return None if self.matrix is None else self.matrix.shape[0] - 1

    def value(self, d) -> np.ndarray:
        if not self.is_gaussian:
            raise TypeError("value(d) needs a Gaussian kernel")
        return np.exp(-self.kappa**2 * np.asarray(d, dtype=float) ** 2)

    def lag_cutoff(self) -> int | None:
        """Largest |m - n| with C_mn >= KERNEL_DROP, None if unbounded."""
        if not self.is_gaussian or self.kappa == 0:
            return None
        L = math.sqrt(-math.log(KERNEL_DROP)) / self.kappa
        return int(math.ceil(L)) if L < 1e9 else None  # tiny kappa: treat as unbounded

    def as_matrix(self, N: int) -> np.ndarray:
        if self.matrix is not None:
            if N > self.N:
                raise ValueError(f"explicit kernel only covers N <= {self.N}")
            return self.matrix[: N + 1, : N + 1]
        idx = np.arange(N + 1)
        return self.value(idx[:, None] - idx[None, :])


def kernel_from_physical(p: PhysicalCoupling) -> CommutatorKernel:
    """kappa^2 = delta_tau^2 / (8 sigma_t^2), treating sigma_t as 1 / spectral width."""
    return CommutatorKernel.gaussian(p.delta_tau / (math.sqrt(8.0) * p.sigma_t))


@dataclass(frozen=True)
class TruncationSpec:
    X: int | None = None  # offset cutoff of the truncated sums; None picks ceil(5/kappa)
    direct_N: int = 60

    def __post_init__(self):
        if self.X is not None and self.X < 1:
            raise ValueError("X must be >= 1")
        if self.direct_N < 1:
            raise ValueError("direct_N must be >= 1")
        if self.X is not None and self.direct_N < 2 * self.X:
            raise ValueError("direct_N must be >= 2 X")

    def resolve_X(self, kernel: CommutatorKernel) -> int:
        if self.X is not None:
            return self.X
        if not kernel.is_gaussian or kernel.kappa == 0:
            raise TruncationTooSmall("kappa = 0 needs an explicit cutoff")
        return max(1, math.ceil(5.0 / kernel.kappa))


# ---------------------------------------------------------------- ordered output modes

@dataclass
class OrderedMode:
    """const + sum_m (u_m A_(m) + v_m A_(m)^dagger)."""

    const: complex
    u: np.ndarray
    v: np.ndarray
    tail_bound: float = 0.0

    def rails(self):
        return [(m, self.u[m], self.v[m]) for m in range(self.u.size)]


def auto_rails(bs: BsParams, tol: float = COEFF_DROP) -> int:
    """Smallest N with every dropped |j_m| below ``tol``."""
    if bs.eta == 1:
        return 1
    if bs.eta == 0:
        raise TruncationTooSmall("eta = 0 never decays; give N explicitly")
    return max(2, int(math.ceil(2 * math.log(tol) / math.log1p(-bs.eta))) + 2)


def output_mode(bs: BsParams, prep: GaussianPrep, N: int | None = None) -> OrderedMode:
    """A'_(1) = sum_m j_m (p A_(m) + q A_(m)^dagger + alpha) on N+1 rails."""
    N = N or auto_rails(bs)
    j = ctc_coefficients(bs, N)
    return OrderedMode(complex(j.sum() * prep.alpha), j * prep.c, j * prep.s,
                       float((1 - bs.eta) ** (N / 2)))


def toeplitz_form(a: np.ndarray, b: np.ndarray, kernel: CommutatorKernel) -> complex:
    """sum_{m,n} a_m b_n C_mn."""
    N = a.size - 1
    L = kernel.lag_cutoff() if kernel.is_gaussian else None
    if L is None or L >= N:
        return complex(a @ kernel.as_matrix(N) @ b)
    lags = np.arange(-L, L + 1)
    w = np.convolve(b, kernel.value(lags), mode="full")[L:L + N + 1]
    return complex(a @ w)


def ordered_moments(mode: OrderedMode, kernel: CommutatorKernel) -> tuple[complex, complex, complex]:
    """<A'>, <A'A'>, <A'^dagger A'> in the rail vacuum, <A_(m) A_(n)^dagger> = C_mn."""
    mean = mode.const
    vv = toeplitz_form(mode.u, mode.v, kernel) + mean**2
    vdv = toeplitz_form(np.conj(mode.v), mode.v, kernel) + abs(mean) ** 2
    return mean, vv, vdv


# ---------------------------------------------------------------- Gaussian moments

@dataclass
class EoMoments:
    mean: complex
    vv: complex
    vdv: complex
    state: GaussianState
    method: str
    tail_bound: float

    def wigner(self, extent: float = 6.0, resolution: int = 201):
        return wigner_grid(self.state, extent, resolution)


def _geom_tail(t: float, X: int) -> float:
    return t ** (X + 1) / (1 - t) if t < 1 else math.inf


def _truncated_sums(bs: BsParams, kernel: CommutatorKernel, X: int):
    """The truncated N -> infinity sums of sum_mn j_m j_n C_mn and sum_mn j*_m j_n C_mn
    at phi = pi/2, plus an upper bound on the neglected tail."""
    if not np.isclose(bs.phi, np.pi / 2):
        raise ValueError("truncated forms hold at phi = pi/2; use method='direct'")
    if not kernel.is_gaussian:
        raise TypeError("truncated forms need a Gaussian kernel")
    eta = bs.eta
    if eta == 0:
        raise TruncationTooSmall("eta = 0: the series does not converge")
    t = math.sqrt(1 - eta)
    it = 1j * t
    v = np.arange(-X, X + 1)
    Cv = kernel.value(v)
    m = np.arange(1, X + 1)
    Cm = kernel.value(m)
    jj = (eta**2 / (2 - eta) * np.sum(it ** np.abs(v) * Cv)
          + 2 * eta * np.sum(it**m * Cm) - (1 - eta))
    jdj = (eta * np.sum(1j ** v * t ** np.abs(v) * Cv)
           - eta * np.sum((-it) ** m * Cm) - eta * np.sum(it**m * Cm) + (1 - eta))
    tail = 4 * min(_geom_tail(t, X), float(kernel.value(X + 1)) / (1 - t) if t < 1 else math.inf)
    return complex(jj), complex(jdj), tail


def eo_gaussian_moments(bs: BsParams, prep: GaussianPrep, kernel: CommutatorKernel,
                        trunc: TruncationSpec | None = None, method: str = "direct") -> EoMoments:
    """Output moments for a Gaussian pure state sent around a finite-size CTC.

    ``direct`` sums the ordered output mode over enough rails for any phi;
    ``truncated`` uses the phi = pi/2 closed forms with the offset cutoff X.
    """
    trunc = trunc or TruncationSpec()
    if method == "direct":
        mode = output_mode(bs, prep)
        mean, vv, vdv = ordered_moments(mode, kernel)
        tail = mode.tail_bound
    elif method == "truncated":
        X = trunc.resolve_X(kernel)
        jj, jdj, tail = _truncated_sums(bs, kernel, X)
        mean = complex(feedback_phase(bs) * prep.alpha)
        vv = prep.pq * jj + mean**2
        vdv = abs(prep.s) ** 2 * jdj + abs(mean) ** 2
    else:
        raise ValueError(method)
    if tail > TAIL_TOL:
        raise TruncationTooSmall(f"tail estimate {tail:.2e} exceeds {TAIL_TOL}")
    return EoMoments(mean, vv, vdv, moments_to_state(mean, vv, vdv), method, tail)


# ---------------------------------------------------------------- single photons

def feedback_amplitude(bs: BsParams) -> complex:
    """Zero-delay feedback loop amplitude (1 - e^{-i phi} t)/(1 - e^{i phi} t)."""
    z = bs.z
    return complex((1 - np.conj(z)) / (1 - z))


def sum_j(bs: BsParams, N: int | None = None) -> complex:
    """sum_m j_m over the rails (the kappa -> 0 output amplitude)."""
    return complex(ctc_coefficients(bs, N or auto_rails(bs)).sum())


def eo_photon_number(bs: BsParams, kernel: CommutatorKernel,
                     trunc: TruncationSpec | None = None, method: str = "direct") -> dict:
    """Mean photon number for a single-photon input, with the X and Y factors of
    <A'^dagger A'> = X <V^dagger V> + Y |<V>|^2."""
    if method == "direct":
        j = ctc_coefficients(bs, auto_rails(bs))
        X = toeplitz_form(np.conj(j), j, kernel)
        tail = float((1 - bs.eta) ** ((j.size - 1) / 2))
    elif method == "truncated":
        _, X, tail = _truncated_sums(bs, kernel, (trunc or TruncationSpec()).resolve_X(kernel))
    else:
        raise ValueError(method)
    if tail > TAIL_TOL:
        raise TruncationTooSmall(f"tail estimate {tail:.2e} exceeds {TAIL_TOL}")
    Xr = float(X.real)
    Y = abs(feedback_amplitude(bs)) ** 2 - Xr
    return {"mean_n": Xr, "X_factor": Xr, "Y_factor": Y,
            "X_residual": abs(Xr - 1), "Y_residual": abs(Y), "tail_bound": tail}


@dataclass(frozen=True)
class Direct:
    """Literal quadruple sum over rails 0..N with the exact finite-N weights."""
    N: int = 60


@dataclass(frozen=True)
class Truncated:
    """Offsets truncated at X, sum over the smallest index taken to infinity."""
    X: int | None = None


@dataclass(frozen=True)
class Contracted:
    """g2 = 2 S^2 - 2 sum_m j*_m |w_m|^2 w_m with w = C j (no truncation beyond the rails)."""
    N: int | None = None


def _four_point_identity(C_m, C):
    # <A+_m A+_n A_r A_s> for single-photon rails at fixed m, as an (n, r, s) array
    return (C_m[None, :, None] * C[:, None, :] + C_m[None, None, :] * C[:, :, None]
            - 2 * C_m[:, None, None] * C_m[None, :, None] * C_m[None, None, :])


def _g2_direct(bs: BsParams, kernel: CommutatorKernel, N: int, workers) -> tuple[float, float]:
    j = ctc_coefficients(bs, N)
    jc = np.conj(j)
    C = kernel.as_matrix(N)

    def outer(m):
        F = _four_point_identity(C[m], C)
        return jc[m] * np.einsum("n,r,s,nrs->", jc, j, j, F)

    num = math.fsum(np.real(pmap(outer, list(range(N + 1)), workers)))
    den = float(np.real(jc @ C @ j))
    return num / den**2, float((1 - bs.eta) ** (N / 2))


def _g2_contracted(bs: BsParams, kernel: CommutatorKernel, N: int | None) -> tuple[float, float]:
    N = N or auto_rails(bs)
    j = ctc_coefficients(bs, N)
    S = toeplitz_form(np.conj(j), j, kernel).real
    L = kernel.lag_cutoff() if kernel.is_gaussian else None
    if L is None or L >= N:
        w = kernel.as_matrix(N) @ j
    else:
        w = np.convolve(j, kernel.value(np.arange(-L, L + 1)), mode="full")[L:L + N + 1]
    T = float(np.real(np.sum(np.conj(j) * np.abs(w) ** 2 * w)))
    return (2 * S**2 - 2 * T) / S**2, float((1 - bs.eta) ** (N / 2))


def _weak_orders(k: int):
    """Ordered set partitions of k labels as rank tuples (rank 0 = smallest)."""
    out = []
    for ranks in itertools.product(range(k), repeat=k):
        B = max(ranks) + 1
        if set(ranks) == set(range(B)):
            out.append(ranks)
    return out


_ORDERS2 = _weak_orders(2)
_ORDERS4 = _weak_orders(4)


def _g2_truncated(bs: BsParams, kernel: CommutatorKernel, X: int) -> tuple[float, float]:
    """Enumerate every ordering of the rail indices; the common shift k of the
    smallest index is summed to infinity in closed form, gaps are cut at X."""
    if not kernel.is_gaussian:
        raise TypeError("truncated g2 needs a Gaussian kernel")
    eta = bs.eta
    if eta == 0:
        raise TruncationTooSmall("eta = 0: the series does not converge")
    z = bs.z
    zc = np.conj(z)
    geo = 1 / (1 - (1 - eta) ** 2)  # sum_{k>=1} |z|^{4(k-1)}

    def jarr(o):
        o = np.asarray(o)
        return np.where(o == 0, -zc, eta * z ** np.maximum(o - 1, 0))

    def block(ranks, gaps, conj_mask, weight):
        offs = np.concatenate([np.zeros((len(gaps), 1), dtype=int), np.cumsum(gaps, axis=-1)], axis=-1)
        o = [offs[..., r] for r in ranks]
        p0 = np.ones(o[0].shape, dtype=complex)
        ph = np.ones(o[0].shape, dtype=complex)
        for oi, cj in zip(o, conj_mask):
            jv = jarr(oi)
            p0 = p0 * (np.conj(jv) if cj else jv)
            ph = ph * (zc**oi if cj else z**oi)
        shifted = eta ** len(o) * ph * (geo if len(o) == 4 else 1 / (1 - (1 - eta)))
        return np.sum(weight(o) * (p0 + shifted))

    def gap_grid(B):
        if B == 1:
            return np.zeros((1, 0), dtype=int)
        g = np.stack(np.meshgrid(*[np.arange(1, X + 1)] * (B - 1), indexing="ij"), axis=-1)
        return g.reshape(-1, B - 1)

    Cf = kernel.value
    S = 0j
    for ranks in _ORDERS2:
        S += block(ranks, gap_grid(max(ranks) + 1), (True, False), lambda o: Cf(o[0] - o[1]))
    T = 0j
    for ranks in _ORDERS4:
        B = max(ranks) + 1
        w = (lambda o: Cf(o[0] - o[1]) * Cf(o[0] - o[2]) * Cf(o[0] - o[3]))
        if B < 4:
            T += block(ranks, gap_grid(B), (True, True, False, False), w)
            continue
        g23 = gap_grid(3)
        for g1 in range(1, X + 1):  # chunk the cubic grid over the first gap
            g = np.column_stack([np.full(len(g23), g1), g23])
            T += block(ranks, g, (True, True, False, False), w)
    S = S.real
    t = math.sqrt(1 - eta)
    sj = t + (eta / (1 - t) if t < 1 else 0.0)
    tail = (2 * sj**4 + 4 * sj**2) * float(Cf(X + 1))
    return (2 * S**2 - 2 * T.real) / S**2, tail


def eo_g2(eta: float, kernel: CommutatorKernel, method=None, phi: float = np.pi / 2,
          workers: int | None = None, return_tail: bool = False):
    """Normalised g2 = <A'+A'+A'A'> / <A'+A'>^2 of a single photon around the CTC."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    if eta in (0.0, 1.0):  # decoupled: rail 1 or rail 0 carries the photon untouched
        return (0.0, 0.0) if return_tail else 0.0
    bs = BsParams(eta, phi)
    method = method or Contracted()
    if isinstance(method, Direct):
        g2, tail = _g2_direct(bs, kernel, method.N, workers)
    elif isinstance(method, Truncated):
        if not np.isclose(phi, np.pi / 2):
            raise ValueError("the truncated scheme is written for phi = pi/2")
        X = method.X or TruncationSpec().resolve_X(kernel)
        g2, tail = _g2_truncated(bs, kernel, X)
        if tail > TAIL_TOL:
            raise TruncationTooSmall(f"tail estimate {tail:.2e} exceeds {TAIL_TOL} at X = {X}")
    elif isinstance(method, Contracted):
        g2, tail = _g2_contracted(bs, kernel, method.N)
    else:
        raise TypeError(f"unknown method {method!r}")
    return (g2, tail) if return_tail else g2


# ---------------------------------------------------------------- OTC interpolation

@dataclass
class OtcInterpolation:
    C10: float
    state: GaussianState  # modes (A', B') or, if recombined, the two circuit inputs
    recombined: bool


def _prep_rows(prep: GaussianPrep) -> np.ndarray:
    return mode_transform(prep.c, prep.s)


def _ordered_gaussian(const: list, coeffs: list[list[tuple[complex, complex]]]) -> GaussianState:
    """State of output modes X_i = const_i + sum_k (u_ik a_k + v_ik a_k^+) over vacuum modes a_k."""
    n = len(const)
    K = len(coeffs[0])
    M = np.zeros((2 * n, 2 * K))
    for i, row in enumerate(coeffs):
        for k, (u, v) in enumerate(row):
            M[2 * i:2 * i + 2, 2 * k:2 * k + 2] = mode_transform(u, v)
    mean = np.ravel([[2 * np.real(c), 2 * np.imag(c)] for c in const])
    return GaussianState(mean, M @ M.T)


def eo_otc_interpolation(C10: float, prep_a: GaussianPrep, prep_b: GaussianPrep,
                         bs: BsParams = BsParams(0.5, 0.0), path: str = "generalized",
                         recombine: bool = True) -> OtcInterpolation:
    """Mode A passes an OTC of overlap C10 and then meets B on the beamsplitter.

    ``generalized`` writes A'_(1) and B'_(0) in the vacuum modes A_(0), B_(0) and
    the mismatch modes D, E. ``circuit`` simulates the extended equivalent
    circuit: two copies of the beamsplitter joined by a beamsplitter of
    reflectivity zeta = C10^2, with the copy displaced by (1 - sqrt zeta)/sqrt(1 - zeta).
    With ``recombine`` the inverse beamsplitter is applied to (A', B').
    """
    if not 0 <= C10 <= 1:
        raise ValueError("C10 must lie in [0, 1]")
    zeta = C10**2
    se, te = math.sqrt(bs.eta), math.sqrt(1 - bs.eta)
    w = np.exp(1j * bs.phi) * te
    if path == "generalized":
        h = [se * prep_a.c, se * prep_a.s, w * prep_b.c, w * prep_b.s]
        h0 = se * prep_a.alpha + w * prep_b.alpha
        k = [-np.conj(w) * prep_a.c, -np.conj(w) * prep_a.s, se * prep_b.c, se * prep_b.s]
        k0 = se * prep_b.alpha - np.conj(w) * prep_a.alpha
        mis = math.sqrt(1 - zeta)
        # vacuum modes: A_(0), B_(0), D, E
        a_row = [(C10 * h[0], C10 * h[1]), (C10 * h[2], C10 * h[3]),
                 (mis * h[0], mis * h[1]), (mis * h[2], mis * h[3])]
        b_row = [(k[0], k[1]), (k[2], k[3]), (0, 0), (0, 0)]
        state = _ordered_gaussian([h0, k0], [a_row, b_row])
    elif path == "circuit":
        fac = 0.0 if zeta == 1 else (1 - math.sqrt(zeta)) / math.sqrt(1 - zeta)
        preps = [prep_a, prep_b,
                 GaussianPrep(fac * prep_a.alpha, prep_a.r, prep_a.theta_R, prep_a.theta_S),
                 GaussianPrep(fac * prep_b.alpha, prep_b.r, prep_b.theta_R, prep_b.theta_S)]
        st = product(*[GaussianState([2 * np.real(p.alpha), 2 * np.imag(p.alpha)],
                                     _prep_rows(p) @ _prep_rows(p).T) for p in preps])
        S = (beamsplitter(zeta, 0.0, 4, 0, 2)
             @ beamsplitter(bs.eta, bs.phi, 4, 2, 3) @ beamsplitter(bs.eta, bs.phi, 4, 0, 1))
        state = apply_symplectic(st, S).marginal([0, 1])
    else:
        raise ValueError(path)
    if recombine:
        state = apply_symplectic(state, beamsplitter(bs.eta, bs.phi).T)
    return OtcInterpolation(float(C10), state, recombine)


# ---------------------------------------------------------------- gravity

def gravity_delay(h: float) -> float:
    """Schwarzschild round-trip gain (2GM/c^3) ln((r_e + h)/r_e), seconds."""
    if h < 0:
        raise ValueError("h must be >= 0")
    return 2 * G_NEWTON * M_EARTH / C_LIGHT**3 * math.log1p(h / R_EARTH)


def gravity_scenario(h: float, sigma_t: float = 2e-13) -> dict:
    dt = gravity_delay(h)
    k = kernel_from_physical(PhysicalCoupling(sigma_t, dt))
    return {"h": float(h), "delta_t": dt, "kappa": k.kappa, "C01": float(math.exp(-k.kappa**2))}
