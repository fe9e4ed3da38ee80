import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from subrad.hamiltonian import CouplingParams, build_h_eff
from subrad.lattice import LatticeConfig, build_positions, uniform_positions
from subrad.scattering import (FeatureNotFoundError, ScatteringModel, SingularCouplingError,
                               SpectrumTrace, feature_mode, find_subradiant_feature,
                               measure_feature, spectral_shift, spectrum, transmission_amplitude)
from subrad.spectral import CollectiveMode, eigendecompose

LOSSY = CouplingParams(0.1)
IDEAL = CouplingParams(0.0)
mp.mp.dps = 30


def mp_amplitudes(pos, params, w):
    """t and r from an extended-precision solve of the coupling-matrix system."""
    n = pos.n_atoms
    k = 2 * mp.pi
    z = [mp.mpf(float(v)) for v in pos.z]
    m = mp.matrix(n, n)
    for j in range(n):
        for l in range(n):
            if j == l:
                m[j, l] = (1 + mp.mpf(params.gamma_fs)) / 2 - 1j * mp.mpf(w)
            else:
                x = k * abs(z[j] - z[l])
                v = mp.mpf(3) / 4 * (-1j / x + 1 / x**2 + 1j / x**3)
                m[j, l] = (mp.mpf(1) / 2 + mp.mpf(params.gamma_fs) * v) * mp.expj(x)
    a = mp.matrix([mp.expj(k * zj) for zj in z])
    b = mp.matrix([mp.expj(-k * zj) for zj in z])
    y = mp.lu_solve(m, a)
    t = 1 - sum(b[i] * y[i] for i in range(n)) / 2
    r = -sum(a[i] * y[i] for i in range(n)) / 2
    return complex(t), complex(r)


def test_single_atom_resonant_mirror():
    s = transmission_amplitude(uniform_positions(1, 0.2), IDEAL, 0.0)
    assert abs(s.t) < 1e-15
    assert s.reflection == pytest.approx(1.0)


def test_single_atom_lossy_closed_form():
    s = transmission_amplitude(uniform_positions(1, 0.2), LOSSY, 0.0)
    assert s.t == pytest.approx(1 / 11, rel=1e-14)
    assert s.transmission == pytest.approx(1 / 121, rel=1e-14)
    assert s.transmission == pytest.approx(8.264e-3, rel=1e-3)


@given(st.floats(-20, 20), st.floats(0, 1))
def test_single_atom_lineshape(w, gamma):
    s = transmission_amplitude(uniform_positions(1, 0.2), CouplingParams(gamma), w)
    den = (1 + gamma) / 2 - 1j * w
    assert s.t == pytest.approx(1 - 0.5 / den, abs=1e-14)
    # the reflected phase refers to the atom's position z = 0.2
    assert s.r == pytest.approx(-0.5 / den * np.exp(0.8j * np.pi), abs=1e-14)


@pytest.mark.parametrize("w", [1e3, -1e3])
def test_far_detuned_transparency(w):
    pos = build_positions(LatticeConfig(10, 0.1, 0.1, 5))
    assert abs(transmission_amplitude(pos, LOSSY, w).t) >= 0.999


@given(st.integers(1, 10), st.floats(0.01, 0.49), st.floats(-5, 5))
def test_lossless_unitarity(n, d, w):
    t, r = ScatteringModel(uniform_positions(n, d), IDEAL).amplitudes([w])
    assert abs(abs(t[0]) ** 2 + abs(r[0]) ** 2 - 1) <= 1e-10


@given(st.integers(1, 8), st.floats(0.01, 0.45), st.floats(0, 0.3), st.integers(0, 10**6),
       st.floats(0, 0.5), st.floats(-3, 3))
def test_amplitudes_against_extended_precision(n, d, u, seed, gamma, w):
    pos = build_positions(LatticeConfig(n, d, u, seed))
    params = CouplingParams(gamma)
    t, r = ScatteringModel(pos, params).amplitudes([w])
    tm, rm = mp_amplitudes(pos, params, w)
    assert abs(t[0] - tm) <= 1e-9 and abs(r[0] - rm) <= 1e-9


@given(st.integers(2, 12), st.floats(0.01, 0.45), st.floats(0, 0.4), st.integers(0, 10**6),
       st.floats(0, 0.5))
def test_mirror_symmetry_of_transmission(n, d, u, seed, gamma):
    pos = build_positions(LatticeConfig(n, d, u, seed))
    grid = np.linspace(-4, 4, 17)
    a = spectrum(pos, CouplingParams(gamma), grid)
    b = spectrum(pos.reversed(), CouplingParams(gamma), grid)
    np.testing.assert_allclose(a.transmission, b.transmission, atol=1e-10)


@given(st.integers(1, 10), st.floats(0.01, 0.45), st.floats(0, 0.5), st.floats(-4, 4))
def test_flux_balance(n, d, gamma, w):
    tr = spectrum(uniform_positions(n, d), CouplingParams(gamma), [w])
    assert tr.loss[0] >= -1e-12
    if gamma == 0:
        assert abs(tr.loss[0]) <= 1e-10


def test_gradients_match_differences():
    pos = build_positions(LatticeConfig(6, 0.1, 0.2, 8))
    w, h = np.array([-0.7, 0.1, 0.9]), 1e-6
    g = ScatteringModel(pos, LOSSY).gradients(w)
    tp, rp = ScatteringModel(pos.at_spacing(0.1 + h), LOSSY).amplitudes(w)
    tm, rm = ScatteringModel(pos.at_spacing(0.1 - h), LOSSY).amplitudes(w)
    np.testing.assert_allclose(g.dt_dd, (tp - tm) / (2 * h), rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(g.dr_dd, (rp - rm) / (2 * h), rtol=1e-6, atol=1e-7)
    model = ScatteringModel(pos, LOSSY)
    tp, rp = model.amplitudes(w + h)
    tm, rm = model.amplitudes(w - h)
    np.testing.assert_allclose(g.dt_dw, (tp - tm) / (2 * h), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(g.dr_dw, (rp - rm) / (2 * h), rtol=1e-6, atol=1e-8)


def test_dark_pair_is_not_singular_for_the_drive():
    # the exactly dark mode of a lossless half-wave pair is orthogonal to the incoming field
    s = transmission_amplitude(uniform_positions(2, 0.5), IDEAL, 0.0)
    assert abs(s.t) < 1e-12 and s.reflection == pytest.approx(1.0)


def test_singular_point_becomes_gap(monkeypatch):
    original = ScatteringModel.matrices

    def with_hole(self, detunings):
        m = original(self, detunings)
        m[np.asarray(detunings) == 0.0] = 0.0
        return m

    monkeypatch.setattr(ScatteringModel, "matrices", with_hole)
    pos = uniform_positions(3, 0.1)
    with pytest.raises(SingularCouplingError) as info:
        ScatteringModel(pos, LOSSY).amplitudes([0.0])
    assert info.value.detuning == 0.0
    tr = spectrum(pos, LOSSY, [-1.0, 0.0, 1.0])
    np.testing.assert_array_equal(tr.valid, [True, False, True])
    assert np.isnan(tr.transmission[1]) and np.isfinite(tr.transmission[0])


def test_spectrum_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        spectrum(uniform_positions(3, 0.1), LOSSY, [0.0, -1.0])


def lorentzian(center, width, depth, points=4001, span=30.0, sign=-1):
    grid = center + width * np.linspace(-span / 2, span / 2, points)
    y = 1 + sign * depth * (width / 2) ** 2 / ((grid - center) ** 2 + (width / 2) ** 2)
    zeros = np.zeros_like(grid)
    return SpectrumTrace(grid, y, zeros, zeros, np.ones(grid.size, dtype=bool))


@given(st.floats(-50, 50), st.floats(1e-4, 1.0), st.floats(0.1, 0.95), st.floats(-2, 2))
def test_synthetic_lorentzian_dip(center, width, depth, miss):
    hint = CollectiveMode(center + miss * width, width, np.zeros(1), 0.0)
    f = find_subradiant_feature(lorentzian(center, width, depth), hint)
    assert f.kind == "dip"
    assert abs(f.center - center) <= 1e-3 * width
    assert f.fwhm == pytest.approx(width, rel=0.01)


def test_synthetic_lorentzian_peak():
    hint = CollectiveMode(0.0, 0.01, np.zeros(1), 0.0)
    f = find_subradiant_feature(lorentzian(0.0, 0.01, 0.5, sign=-1), hint)
    g = find_subradiant_feature(
        SpectrumTrace(f.center + np.linspace(-0.15, 0.15, 4001),
                      0.2 + 0.5 * 0.005**2 / (np.linspace(-0.15, 0.15, 4001) ** 2 + 0.005**2),
                      *[np.zeros(4001)] * 2, np.ones(4001, dtype=bool)), hint)
    assert g.kind == "peak"
    assert g.fwhm == pytest.approx(0.01, rel=0.01)


def test_flat_trace_has_no_feature():
    grid = np.linspace(-1, 1, 4001)
    flat = SpectrumTrace(grid, np.ones_like(grid), *[np.zeros_like(grid)] * 2,
                         np.ones(grid.size, dtype=bool))
    with pytest.raises(FeatureNotFoundError):
        find_subradiant_feature(flat, CollectiveMode(0.0, 0.01, np.zeros(1), 0.0))


def test_quarter_wave_array_shows_peak():
    assert measure_feature(uniform_positions(10, 0.25), LOSSY).kind == "peak"


def test_deep_subwavelength_pair_shows_dip():
    assert measure_feature(uniform_positions(2, 0.02), LOSSY).kind == "dip"


def test_linewidth_narrows_with_n():
    f5 = measure_feature(uniform_positions(5, 0.25), LOSSY)
    f10 = measure_feature(uniform_positions(10, 0.25), LOSSY)
    assert f10.fwhm < 0.2 * f5.fwhm


def test_polished_feature_is_stationary():
    pos = uniform_positions(10, 0.25)
    f = measure_feature(pos, LOSSY)
    g = ScatteringModel(pos, LOSSY).gradients([f.center])
    dT = 2 * np.real(np.conj(g.t[0]) * g.dt_dw[0])
    assert abs(dT) * f.fwhm < 1e-8


def test_feature_hint_policies():
    modes = eigendecompose(build_h_eff(uniform_positions(20, 0.25), LOSSY))
    assert feature_mode(modes, "auto") is modes.most_subradiant
    assert feature_mode(modes, "min_shift") is modes.lowest_shift
    with pytest.raises(ValueError):
        feature_mode(modes, "nearest")


def test_zero_spacing_change_has_zero_shift():
    assert spectral_shift(uniform_positions(10, 0.25), LOSSY, 0.0).shift == 0.0


@pytest.mark.parametrize("n,expected", [(10, 0.0033), (20, 0.00306)])
def test_quarter_wave_reference_shifts(n, expected):
    # d' = d - delta_d as in the two-spectrum comparison
    res = spectral_shift(uniform_positions(n, 0.25), LOSSY, -1e-3)
    assert res.shift == pytest.approx(expected, rel=0.05)
