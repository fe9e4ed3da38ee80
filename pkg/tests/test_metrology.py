import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subrad import metrology as met
from subrad.hamiltonian import CouplingParams
from subrad.lattice import LatticeConfig, build_positions, uniform_positions
from subrad.scattering import ScatteringModel, SpectrumTrace, find_subradiant_feature
from subrad.spectral import CollectiveMode, gamma_deep_subwavelength

LOSSY = CouplingParams(0.1)
IDEAL = CouplingParams(0.0)


def lorentz_center(center, width=0.02, points=4001):
    grid = center + width * np.linspace(-15, 15, points)
    y = 1 - 0.6 * (width / 2) ** 2 / ((grid - center) ** 2 + (width / 2) ** 2)
    z = np.zeros_like(grid)
    return SpectrumTrace(grid, y, z, z, np.ones(grid.size, dtype=bool))


@given(st.floats(-10, 10), st.floats(-5, 5), st.floats(1e-6, 1e-2))
def test_central_slope_exact_for_linear(a, b, h):
    slope, ok = met.central_slope(lambda x: a * x + b, 0.3, h)
    assert slope == pytest.approx(a, rel=1e-6, abs=1e-7)
    assert ok


def test_central_slope_flags_nonconvergence():
    _, ok = met.central_slope(lambda x: np.sin(1e4 * x), 0.0, 1e-3)
    assert not ok


def test_synthetic_feature_fom():
    # omega_p(d) = 0.1 + 2.5 d with fixed FWHM: FOM = 2.5 / 0.02
    width, k = 0.02, 2.5
    hint = CollectiveMode(0.1, width, np.zeros(1), 0.0)

    def center(d):
        return find_subradiant_feature(lorentz_center(0.1 + k * d, width), hint).center

    slope, ok = met.central_slope(center, 0.0, 1e-4)
    fwhm = find_subradiant_feature(lorentz_center(0.1, width), hint).fwhm
    assert ok
    assert abs(slope) / width == pytest.approx(k / width, rel=1e-6)
    assert abs(slope) / fwhm == pytest.approx(k / width, rel=0.01)


def test_derivative_step_caps_feature_motion():
    for n, d in [(10, 0.25), (40, 0.25), (10, 0.02), (30, 0.02)]:
        pos = uniform_positions(n, d)
        h = met.derivative_step(pos, LOSSY)
        res = met.fom(pos, LOSSY, step=h)
        assert abs(res.slope) * h <= 0.0201 * res.feature.fwhm * 1.2 or h == met.default_step(d)
        assert h <= met.default_step(d)


def test_fom_converges_and_is_positive():
    res = met.fom(uniform_positions(10, 0.25), LOSSY)
    assert res.converged and res.value > 0
    assert res.value == pytest.approx(abs(res.slope) / res.fwhm)


def test_fom_independent_of_step_choice():
    pos = uniform_positions(8, 0.25)
    a = met.fom(pos, LOSSY, step=1e-6).value
    b = met.fom(pos, LOSSY, step=4e-7).value
    assert a == pytest.approx(b, rel=1e-4)


def test_single_atom_null():
    pos = uniform_positions(1, 0.2)
    w = np.linspace(-2, 2, 9)
    fd = met.fisher_profile(pos, IDEAL, w, 1e-6)
    an = met.fisher_profile(pos, IDEAL, w, route="analytic")
    assert np.nanmax(fd.f_mt) < 1e-15
    assert np.nanmax(an.f_mt) < 1e-25
    assert np.isnan(fd.f_mt[4])  # T = 0 on resonance is excluded, not divided by


def test_far_detuned_state_carries_no_information():
    pos = uniform_positions(10, 0.25)
    on = met.quantum_fi_max(pos, LOSSY).value
    off = met.quantum_fi(pos, LOSSY, 1e3).value
    assert off <= 1e-6 * on


@given(st.floats(-2, 2), st.floats(0.5, 40.0), st.floats(0.0, 6.0))
def test_global_phase_invariance(w, freq, phase0):
    pos = uniform_positions(6, 0.2)
    model_of = lambda dd: ScatteringModel(pos.at_spacing(dd), LOSSY)

    def plain(dd):
        return model_of(dd).amplitudes([w])

    def phased(dd):
        t, r = model_of(dd).amplitudes([w])
        ph = np.exp(1j * (phase0 + np.sin(freq * dd)))
        return t * ph, r * ph

    (a, _), (b, _) = met.fd_fisher(plain, 0.2, 1e-6), met.fd_fisher(phased, 0.2, 1e-6)
    assert b[1][0] == pytest.approx(a[1][0], rel=1e-5, abs=1e-9)
    assert b[0][0] == pytest.approx(a[0][0], rel=1e-8, abs=1e-12)


@given(st.integers(2, 9), st.floats(0.01, 0.45), st.floats(0, 0.3), st.integers(0, 10**6),
       st.floats(0, 0.4))
def test_finite_difference_matches_analytic_route(n, d, u, seed, gamma):
    pos = build_positions(LatticeConfig(n, d, u, seed))
    params = CouplingParams(gamma)
    w = np.linspace(-2, 2, 7)
    fd = met.fisher_profile(pos, params, w, met.default_step(d))
    an = met.fisher_profile(pos, params, w, route="analytic")
    ok = np.isfinite(fd.f_q) & (an.f_q > 1e-8 * np.nanmax(an.f_q))
    np.testing.assert_allclose(fd.f_q[ok], an.f_q[ok], rtol=1e-3)
    ok = np.isfinite(fd.f_mt) & (an.f_mt > 1e-8 * np.nanmax(an.f_mt))
    np.testing.assert_allclose(fd.f_mt[ok], an.f_mt[ok], rtol=1e-3)


@pytest.mark.parametrize("n", range(2, 11))
def test_max_quantum_fi_dual_route_deep(n):
    v = met.quantum_fi_max(uniform_positions(n, 0.02), LOSSY)
    assert v.value == pytest.approx(v.analytic, rel=0.10)
    assert v.routes_agree and v.converged


@pytest.mark.parametrize("d", [0.25, 0.02])
@pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 20])
def test_classical_below_quantum_at_optimum(n, d):
    pos = uniform_positions(n, d)
    grid = met.search_grid(pos, LOSSY)
    h = met.derivative_step(pos, LOSSY)
    mt = met.classical_fi_transmission(pos, LOSSY, grid, step=h)
    q = met.quantum_fi_max(pos, LOSSY, grid, step=h)
    assert mt.value <= q.value
    assert 0 < mt.value / q.value <= 1


def test_classical_can_exceed_quantum_pointwise():
    # F_MT counts the unnormalized transmitted flux; F_Q refers to the post-selected state
    pos = uniform_positions(3, 0.264)
    w = np.linspace(0.9, 1.4, 101)
    p = met.fisher_profile(pos, CouplingParams(0.4146), w, route="analytic")
    assert np.nanmax(p.f_mt / p.f_q) > 1


def test_cramer_rao():
    assert met.cramer_rao_min_dd(4e6, 100) == pytest.approx(0.5 * met.cramer_rao_min_dd(1e6, 100))
    assert met.cramer_rao_min_dd(1e10, 100) == pytest.approx(1e-6)
    for bad in [(0.0, 100), (-1.0, 100), (float("nan"), 100), (1.0, 0), (1.0, 2.5)]:
        with pytest.raises(ValueError):
            met.cramer_rao_min_dd(*bad)


def test_power_law_fit_exact():
    ns = np.arange(3, 30)
    f = met.fit_power_law(ns, 7 * ns**3.0)
    assert f.exponent == pytest.approx(3.0, abs=1e-12)
    assert f.prefactor == pytest.approx(7.0, rel=1e-10)
    assert f.r_squared == pytest.approx(1.0)
    assert met.fit_power_law(ns, 0.2 * ns**-3.0).exponent == pytest.approx(-3.0, abs=1e-12)
    np.testing.assert_allclose(f.predict([10]), [7000.0])


def test_power_law_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        met.fit_power_law([1, 2, 3, 4], [1, 2, 3, 4])
    with pytest.raises(ValueError):
        met.fit_power_law([1, 2, 3, 4, 5], [1, 2, 0, 4, 5])


def test_parity_fit_separates_branches():
    ns = np.arange(4, 41)
    v = np.where(ns % 2 == 0, 2.0 * ns**-3.0, 0.5 * ns**-2.0)
    fits = met.fit_power_law_by_parity(ns, v)
    assert fits["even"].exponent == pytest.approx(-3.0, abs=1e-12)
    assert fits["odd"].exponent == pytest.approx(-2.0, abs=1e-12)
    assert fits["even"].n_range == tuple(range(4, 41, 2))


@pytest.mark.xfail(strict=True, reason="the cos(theta) factor drifts with N at fixed d, so the "
                                       "branches fit to about -2.1 and -3.5")
def test_deep_formula_branch_exponents():
    ns = np.arange(4, 41)
    v = [gamma_deep_subwavelength(int(n), 0.02, 1, LOSSY) for n in ns]
    for fit in met.fit_power_law_by_parity(ns, v).values():
        assert fit.exponent == pytest.approx(-3.0, abs=0.1)


def test_fisher_report():
    rep = met.fisher_report(uniform_positions(6, 0.25), LOSSY, m_measurements=100)
    assert rep.f_mt <= rep.f_q
    assert rep.cramer_rao_dd == pytest.approx(1 / np.sqrt(100 * rep.f_q))
    assert rep.converged
