import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctcsim.eventop import (C_LIGHT, G_NEWTON, M_EARTH, R_EARTH, CommutatorKernel, Contracted, Direct,
                            PhysicalCoupling, Truncated, TruncationSpec, TruncationTooSmall, auto_rails,
                            eo_g2, eo_gaussian_moments, eo_otc_interpolation, eo_photon_number,
                            feedback_amplitude, gravity_delay, gravity_scenario, kernel_from_physical,
                            ordered_moments, output_mode, sum_j, toeplitz_form)
from ctcsim.gaussianctc import BsParams, GaussianPrep, ctc_beamsplitter_moments


def deutsch_g2(eta):
    return 8 * eta * (1 - eta) / (2 - eta)


# ---------------------------------------------------------------- kernels

def test_kernel_validation():
    with pytest.raises(ValueError):
        CommutatorKernel()
    with pytest.raises(ValueError):
        CommutatorKernel(kappa=1.0, matrix=np.eye(2))
    with pytest.raises(ValueError):
        CommutatorKernel(matrix=np.array([[1, 0.5], [0.4, 1]]))
    with pytest.raises(ValueError):
        CommutatorKernel(matrix=np.array([[0.9, 0], [0, 1]]))


def test_gaussian_kernel_values():
    k = CommutatorKernel.gaussian(0.5)
    assert k.value(2) == pytest.approx(math.exp(-1))
    M = k.as_matrix(3)
    assert M.shape == (4, 4) and np.allclose(np.diag(M), 1)
    assert k.value(k.lag_cutoff()) < 1e-12


def test_kernel_from_physical():
    k = kernel_from_physical(PhysicalCoupling(1.0, math.sqrt(8.0)))
    assert k.kappa == pytest.approx(1.0)
    with pytest.raises(ValueError):
        PhysicalCoupling(0.0, 1.0)


def test_truncation_spec():
    assert TruncationSpec().resolve_X(CommutatorKernel.gaussian(0.5)) == 10
    with pytest.raises(ValueError):
        TruncationSpec(X=40, direct_N=60)
    with pytest.raises(TruncationTooSmall):
        TruncationSpec().resolve_X(CommutatorKernel.gaussian(0.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.integers(5, 80))
def test_toeplitz_matches_dense(kappa, N):
    rng = np.random.default_rng(N)
    a = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    b = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    K = CommutatorKernel.gaussian(kappa)
    dense = a @ K.as_matrix(N) @ b
    assert toeplitz_form(a, b, K) == pytest.approx(dense, abs=1e-10 * (1 + abs(dense)))


# ---------------------------------------------------------------- Gaussian moments

def test_deutsch_limit_reproduces_ctc_moments():
    bs, prep = BsParams(0.4, 1.1), GaussianPrep(0.3 - 0.2j, 0.6, 0.2, 0.5)
    eo = eo_gaussian_moments(bs, prep, CommutatorKernel(matrix=np.eye(auto_rails(bs) + 1)))
    ref = ctc_beamsplitter_moments(bs, prep)
    assert np.allclose(eo.state.cov, ref.state.cov, atol=1e-9)
    assert np.allclose(eo.state.mean, ref.state.mean, atol=1e-9)


def test_flat_kernel_gives_phase_rotated_input():
    # kappa = 0: every rail is the same mode, so the output is e^{i Phi} times the input
    bs, prep = BsParams(0.5, 0.8), GaussianPrep(0.5j, 0.7, 0.0, 0.3)
    eo = eo_gaussian_moments(bs, prep, CommutatorKernel.gaussian(0.0))
    ph = feedback_amplitude(bs)
    assert eo.mean == pytest.approx(ph * prep.alpha)
    assert eo.vv == pytest.approx(ph**2 * prep.pq + eo.mean**2)
    assert eo.vdv.real == pytest.approx(abs(prep.s) ** 2 + abs(eo.mean) ** 2)


@pytest.mark.parametrize("kappa", [0.2, 0.6, 1.5])
@pytest.mark.parametrize("eta", [0.3, 2 / 3])
def test_truncated_moments_match_direct(kappa, eta):
    bs, prep = BsParams(eta, np.pi / 2), GaussianPrep(0.2, 0.8)
    K = CommutatorKernel.gaussian(kappa)
    a = eo_gaussian_moments(bs, prep, K, method="direct")
    b = eo_gaussian_moments(bs, prep, K, method="truncated")
    assert np.allclose(a.state.cov, b.state.cov, atol=1e-8)


def test_truncation_guard():
    bs = BsParams(0.05, np.pi / 2)
    with pytest.raises(TruncationTooSmall):
        eo_gaussian_moments(bs, GaussianPrep(r=0.5), CommutatorKernel.gaussian(1.0), TruncationSpec(X=2, direct_N=60),
                            method="truncated")


def test_output_mode_rails_and_moments():
    bs, prep = BsParams(0.5, 0.0), GaussianPrep(r=0.0)
    mode = output_mode(bs, prep, 10)
    assert len(mode.rails()) == 11
    _, _, n = ordered_moments(mode, CommutatorKernel.gaussian(5.0))
    assert n == pytest.approx(0.0)  # vacuum in, vacuum out


# ---------------------------------------------------------------- single photons

@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0, 2 * np.pi))
def test_sum_j_is_loop_amplitude(eta, phi):
    bs = BsParams(eta, phi)
    assert sum_j(bs) == pytest.approx(feedback_amplitude(bs), abs=1e-10)
    assert abs(feedback_amplitude(bs)) == pytest.approx(1.0)


@pytest.mark.parametrize("kappa", [0.0, 0.05, 0.7, 4.0])
@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
def test_photon_number_conserved(kappa, eta):
    out = eo_photon_number(BsParams(eta, np.pi / 2), CommutatorKernel.gaussian(kappa))
    assert out["mean_n"] == pytest.approx(1.0, abs=1e-9)
    assert out["Y_residual"] < 1e-9


def test_photon_number_truncated_path():
    out = eo_photon_number(BsParams(0.6, np.pi / 2), CommutatorKernel.gaussian(0.8), method="truncated")
    assert out["mean_n"] == pytest.approx(1.0, abs=1e-9)


def test_g2_limits():
    for eta in (0.2, 0.5, 0.8):
        assert eo_g2(eta, CommutatorKernel.gaussian(10.0)) == pytest.approx(deutsch_g2(eta), abs=1e-9)
        assert eo_g2(eta, CommutatorKernel.gaussian(0.01)) < 1e-6
        assert eo_g2(eta, CommutatorKernel.gaussian(0.0)) == pytest.approx(0.0, abs=1e-12)
    assert eo_g2(0.0, CommutatorKernel.gaussian(1.0)) == 0.0
    assert eo_g2(1.0, CommutatorKernel.gaussian(1.0)) == 0.0


@pytest.mark.parametrize("eta", [0.5, 0.9])
def test_g2_methods_agree(eta):
    K = CommutatorKernel.gaussian(0.7)
    a = eo_g2(eta, K, Direct(60))
    b = eo_g2(eta, K, Truncated())
    c = eo_g2(eta, K, Contracted())
    assert a == pytest.approx(c, abs=1e-8)
    assert b == pytest.approx(c, abs=1e-8)


def test_g2_direct_parallel_matches_serial():
    K = CommutatorKernel.gaussian(1.0)
    assert eo_g2(0.6, K, Direct(20), workers=1) == pytest.approx(eo_g2(0.6, K, Direct(20), workers=3), abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 5.0))
def test_g2_between_limits(eta, kappa):
    g = eo_g2(eta, CommutatorKernel.gaussian(kappa))
    assert -1e-12 <= g <= deutsch_g2(eta) + 1e-9


def test_truncated_needs_half_pi():
    with pytest.raises(ValueError):
        eo_g2(0.5, CommutatorKernel.gaussian(1.0), Truncated(), phi=0.3)


# ---------------------------------------------------------------- OTC interpolation

def test_interpolation_endpoints():
    r = 0.7
    a, b = GaussianPrep(0.3, r), GaussianPrep(0.1j)
    full = eo_otc_interpolation(1.0, a, b).state
    assert np.allclose(full.cov, np.diag([np.exp(2 * r), np.exp(-2 * r), 1, 1]), atol=1e-12)
    assert np.allclose(full.mean, [0.6, 0, 0, 0.2], atol=1e-12)
    broken = eo_otc_interpolation(0.0, GaussianPrep(r=r), GaussianPrep()).state
    # an OTC on one arm of the interferometer halves the squeezing in log terms
    assert broken.cov[1, 1] == pytest.approx(np.exp(-r) * np.cosh(r))
    assert broken.cov[3, 3] == pytest.approx(np.exp(-r) * np.cosh(r))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0.05, 0.95), st.floats(0, 2 * np.pi), st.floats(0, 1.2))
def test_interpolation_paths_agree(C10, eta, phi, r):
    a, b = GaussianPrep(0.2 + 0.1j, r, 0.3, 0.1), GaussianPrep(-0.4, 0.5 * r, 0.0, 0.7)
    bs = BsParams(eta, phi)
    for rec in (True, False):
        g = eo_otc_interpolation(C10, a, b, bs, "generalized", rec).state
        c = eo_otc_interpolation(C10, a, b, bs, "circuit", rec).state
        assert np.allclose(g.cov, c.cov, atol=1e-9)
        assert np.allclose(g.mean, c.mean, atol=1e-9)
    g.validate()


# ---------------------------------------------------------------- gravity

def test_gravity_delay_formula():
    h = 100e3
    expect = 2 * G_NEWTON * M_EARTH / C_LIGHT**3 * math.log((R_EARTH + h) / R_EARTH)
    assert gravity_delay(h) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(ValueError):
        gravity_delay(-1.0)


def test_gravity_scenario():
    g = gravity_scenario(100e3)
    assert 4e-13 <= g["delta_t"] <= 6e-13
    assert 1 - g["C01"] > 0.1
    low = gravity_scenario(1.0)
    assert 0 < 1 - low["C01"] < 1e-10
