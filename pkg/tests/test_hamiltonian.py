import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from subrad.hamiltonian import (K0, CouplingParams, build_h_eff, build_m, coupling_matrices,
                                coupling_matrix_derivatives, free_space_kernel, fs_decay_kernel)
from subrad.lattice import InvalidConfigError, LatticeConfig, build_positions, uniform_positions

mp.mp.dps = 40


def mp_decay_kernel(x):
    x = mp.mpf(x)
    return 1.5 * (mp.sin(x) / x + mp.cos(x) / x**2 - mp.sin(x) / x**3)


def mp_element(zj, zl, gamma, gamma_1d=1):
    """Independent high-precision H_jl for j != l."""
    x = 2 * mp.pi * abs(mp.mpf(zj) - mp.mpf(zl))
    v = mp.mpf(3) / 4 * (-1j / x + 1 / x**2 + 1j / x**3)
    return -1j * (mp.mpf(gamma_1d) / 2 + gamma * v) * mp.expj(x)


def test_kernel_at_half_pi():
    x = np.pi / 2
    expected = 0.75 * (-1j * 2 / np.pi + 4 / np.pi**2 + 1j * 8 / np.pi**3)
    assert free_space_kernel(x) == pytest.approx(expected, rel=1e-15)


def test_kernel_vanishes_like_one_over_x():
    xs = np.array([1e2, 1e3, 1e4])
    np.testing.assert_allclose(np.abs(free_space_kernel(xs)) * xs, 0.75, rtol=1e-3)


@pytest.mark.parametrize("x", [1e-3, 1e-4, 1e-5, 1e-6])
def test_dissipative_self_limit(x):
    # the small-x real part of V e^{ix} is the gamma/2 on the diagonal
    xm = mp.mpf(x)
    val = mp.re(mp.mpf(3) / 4 * (-1j / xm + 1 / xm**2 + 1j / xm**3) * mp.expj(xm))
    assert float(val) == pytest.approx(0.5, abs=2 * x**2)


def test_decay_kernel_values():
    assert fs_decay_kernel(0.0) == 1.0
    assert fs_decay_kernel(np.pi) == pytest.approx(-3 / (2 * np.pi**2), rel=1e-14)
    assert float(mp_decay_kernel(mp.pi)) == pytest.approx(-3 / (2 * np.pi**2), rel=1e-30)
    assert abs(fs_decay_kernel(1e-4) - 1) < 1e-7


@given(st.floats(1e-6, 50.0))
def test_decay_kernel_matches_high_precision(x):
    assert fs_decay_kernel(x) == pytest.approx(float(mp_decay_kernel(x)), abs=1e-12)


def test_decay_kernel_continuous_at_series_switch():
    eps = 1e-12
    a, b = fs_decay_kernel(0.05 - eps), fs_decay_kernel(0.05 + eps)
    assert abs(a - b) < 1e-12


def test_single_atom():
    h = build_h_eff(uniform_positions(1, 0.2), CouplingParams(0.1)).matrix
    assert h.shape == (1, 1)
    assert h[0, 0] == pytest.approx(-0.55j)
    m = build_m(uniform_positions(1, 0.2), CouplingParams(0.1), 0.0).matrix
    assert m[0, 0] == pytest.approx(0.55)


def test_quarter_wave_pair_is_real_exchange():
    h = build_h_eff(uniform_positions(2, 0.25), CouplingParams(0.0)).matrix
    assert h[0, 1] == pytest.approx(0.5, abs=1e-15)


def test_deep_subwavelength_element_against_oracle():
    pos = uniform_positions(2, 0.02)
    h = build_h_eff(pos, CouplingParams(0.1)).matrix
    ref = complex(mp_element(0.02, 0.04, mp.mpf("0.1")))
    assert h[0, 1] == pytest.approx(ref, rel=1e-13)
    # 1/x^3 dominates
    x = K0 * 0.02
    assert 0.1 * 0.75 / x**3 > 5 * abs(0.5 + 0.1 * 0.75 * (-1j / x + 1 / x**2))


@given(st.integers(2, 8), st.floats(0.01, 0.45), st.floats(0, 0.3), st.integers(0, 10**6),
       st.floats(0, 0.5))
def test_matrix_elements_against_oracle(n, d, u, seed, gamma):
    pos = build_positions(LatticeConfig(n, d, u, seed))
    h = build_h_eff(pos, CouplingParams(gamma)).matrix
    np.testing.assert_array_equal(h, h.T)
    for j, l in [(0, n - 1), (n - 1, 0), (0, 1)]:
        ref = complex(mp_element(pos.z[j], pos.z[l], mp.mpf(gamma)))
        assert abs(h[j, l] - ref) <= 1e-11 * max(1.0, abs(ref))


@given(st.integers(1, 8), st.floats(0.01, 0.45), st.floats(0, 0.5), st.floats(-10, 10))
def test_markovian_coupling_matrix_consistency(n, d, gamma, w):
    pos = uniform_positions(n, d)
    params = CouplingParams(gamma)
    h = build_h_eff(pos, params).matrix
    m = build_m(pos, params, w).matrix
    np.testing.assert_allclose(m, 1j * (h - w * np.eye(n)), atol=1e-12)
    np.testing.assert_allclose(coupling_matrices(pos, params, [w])[0], m, atol=1e-14)


def test_far_detuned_inverse_vanishes():
    pos = uniform_positions(5, 0.2)
    for w in (1e6, -1e6):
        assert np.linalg.norm(np.linalg.inv(build_m(pos, CouplingParams(0.1), w).matrix)) < 1e-5


def test_finite_omega0_rescales_phase():
    pos = uniform_positions(3, 0.2)
    params = CouplingParams(0.1, omega0=50.0)
    w = 5.0
    m = build_m(pos, params, w).matrix
    x = K0 * 0.2
    ref = (0.5 + 0.1 * free_space_kernel(x)) * np.exp(1j * (1 + w / 50.0) * x)
    assert m[0, 1] == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("omega0", [None, 40.0])
def test_analytic_derivatives_match_differences(omega0):
    pos = build_positions(LatticeConfig(5, 0.1, 0.2, 4))
    params = CouplingParams(0.1, omega0=omega0)
    w, h = 0.3, 1e-6
    dd, dw = coupling_matrix_derivatives(pos, params, w)
    num_d = (build_m(pos.at_spacing(0.1 + h), params, w).matrix
             - build_m(pos.at_spacing(0.1 - h), params, w).matrix) / (2 * h)
    num_w = (build_m(pos, params, w + h).matrix - build_m(pos, params, w - h).matrix) / (2 * h)
    np.testing.assert_allclose(dd, num_d, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(dw, num_w, rtol=1e-6, atol=1e-8)


def test_rejects_bad_params():
    with pytest.raises(InvalidConfigError):
        CouplingParams(-0.1)
    with pytest.raises(InvalidConfigError):
        CouplingParams(0.1, gamma_1d=0)
    with pytest.raises(InvalidConfigError):
        CouplingParams(0.1, omega0=-1)
    with pytest.raises(ValueError):
        free_space_kernel(0.0)
