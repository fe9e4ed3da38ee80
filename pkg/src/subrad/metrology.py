"""Sensing figures of merit for the lattice spacing d.

FOM = |d omega_p/dd| / FWHM, the transmission-slope Fisher information
F_MT = max_omega (dT/dd)^2 / T, the quantum Fisher information of the guided
output state (r|R> + t|T>)/sqrt(p_g), and the Cramer-Rao bound 1/sqrt(M F).
Derivatives in d are central differences at steps h and h/2 with a Richardson
check; an analytic route through d(M^{-1}) = -M^{-1} (dM/dd) M^{-1} is kept
alongside as an independent cross-check.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .hamiltonian import CouplingParams, build_h_eff
from .lattice import AtomPositions
from .scattering import (ScatteringModel, SpectralFeature, feature_grid, feature_mode,
                         global_grid, measure_feature)
from .spectral import CollectiveMode, eigendecompose

log = logging.getLogger(__name__)

T_FLOOR = 1e-12
P_FLOOR = 1e-12
RICHARDSON_RTOL = 0.01


class DerivativeWarning(RuntimeWarning):
    """Step-h and step-h/2 derivative estimates disagree by more than 1%."""


def default_step(spacing: float) -> float:
    return 1e-6 if spacing >= 0.1 else 1e-8


def derivative_step(pos: AtomPositions, params: CouplingParams,
                    mode: Optional[CollectiveMode] = None, policy: str = "auto",
                    motion: float = 0.02) -> float:
    """Spacing step for d-derivatives.

    The default step is capped so the tracked resonance moves by at most
    ``motion`` of its linewidth, since subradiant lines narrow like N^-3.
    """
    h0 = default_step(pos.spacing)
    if mode is None:
        mode = feature_mode(eigendecompose(build_h_eff(pos, params)), policy)
    probe = 1e-3 * h0
    shifts = []
    for s in (+probe, -probe):
        modes = eigendecompose(build_h_eff(pos.at_spacing(pos.spacing + s), params))
        shifts.append(feature_mode(modes, policy).shift)
    slope = abs(shifts[0] - shifts[1]) / (2 * probe)
    if slope == 0:
        return h0
    return float(min(h0, motion * mode.decay / slope))


def _richardson(d_h, d_h2):
    return (4.0 * d_h2 - d_h) / 3.0


def _agree(a, b, rtol=RICHARDSON_RTOL) -> bool:
    return bool(abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300))


@dataclass(frozen=True)
class FomResult:
    value: float
    slope: float  # d omega_p / dd, Gamma_1D per lambda
    fwhm: float
    feature: SpectralFeature
    step: float
    converged: bool


def central_slope(fn, x: float, h: float):
    """Richardson-combined central difference of a scalar ``fn`` at ``x``.

    Returns (slope, converged) where converged means the step-h and step-h/2
    estimates agree to 1%.
    """
    d_h = (fn(x + h) - fn(x - h)) / (2 * h)
    d_h2 = (fn(x + h / 2) - fn(x - h / 2)) / h
    return float(_richardson(d_h, d_h2)), _agree(d_h, d_h2)


def fom(pos: AtomPositions, params: CouplingParams, policy: str = "auto",
        step: Optional[float] = None) -> FomResult:
    """|d omega_p/dd| / sigma_FWHM for the tracked subradiant feature, units 1/lambda."""
    modes = eigendecompose(build_h_eff(pos, params))
    mode = feature_mode(modes, policy)
    feat = measure_feature(pos, params, mode)
    h = derivative_step(pos, params, mode, policy) if step is None else step
    d = pos.spacing

    def center(dd):
        if dd == d:
            return feat.center
        return measure_feature(pos.at_spacing(dd), params, policy=policy).center

    slope, ok = central_slope(center, d, h)
    if not ok:
        warnings.warn(f"FOM slope unconverged at d = {d}", DerivativeWarning, stacklevel=2)
    return FomResult(abs(slope) / feat.fwhm, slope, feat.fwhm, feat, h, ok)


@dataclass(frozen=True)
class FisherProfile:
    """Pointwise Fisher informations over detuning at a fixed geometry."""

    detunings: np.ndarray
    f_mt: np.ndarray  # (dT/dd)^2 / T, NaN where T <= T_FLOOR
    f_q: np.ndarray
    f_three: np.ndarray  # classical FI of the T / |r|^2 / loss outcomes
    transmission: np.ndarray
    p_g: np.ndarray
    f_mt_coarse: Optional[np.ndarray] = field(default=None, repr=False)
    f_q_coarse: Optional[np.ndarray] = field(default=None, repr=False)


def _fi_from_derivs(t, r, dt, dr):
    T, R = np.abs(t) ** 2, np.abs(r) ** 2
    p = T + R
    dT = 2 * np.real(np.conj(t) * dt)
    dR = 2 * np.real(np.conj(r) * dr)
    with np.errstate(divide="ignore", invalid="ignore"):
        f_mt = np.where(T > T_FLOOR, dT**2 / T, np.nan)
        num = np.abs(dr) ** 2 + np.abs(dt) ** 2
        inner = np.conj(r) * dr + np.conj(t) * dt
        f_q = np.where(p > P_FLOOR, 4 * (num / p - np.abs(inner) ** 2 / p**2), np.nan)
        loss = 1 - p
        dL = -(dT + dR)
        f3 = (np.where(T > T_FLOOR, dT**2 / T, 0) + np.where(R > T_FLOOR, dR**2 / R, 0)
              + np.where(loss > T_FLOOR, dL**2 / loss, 0))
    return f_mt, np.maximum(f_q, 0.0), f3, T, p


def _normalized_state(t, r):
    v = np.stack([r, t], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def fd_fisher(amplitudes, d: float, h: float):
    """Finite-difference Fisher informations from an amplitude map ``d -> (t, r)``.

    Returns (f_mt, f_q, f_three, T, p_g) from the Richardson-combined derivatives
    and (f_mt, f_q) from the step-h/2 derivatives alone, for the convergence check.
    F_Q differentiates the normalized state (r, t)/sqrt(p_g) directly.
    """
    t0, r0 = (np.asarray(v) for v in amplitudes(d))
    amps = {s: tuple(np.asarray(v) for v in amplitudes(d + s)) for s in (h, -h, h / 2, -h / 2)}

    def diff(k, s):
        return (amps[s][k] - amps[-s][k]) / (2 * s)

    dt = _richardson(diff(0, h), diff(0, h / 2))
    dr = _richardson(diff(1, h), diff(1, h / 2))
    f_mt, _, f3, T, p = _fi_from_derivs(t0, r0, dt, dr)
    f_mt_c = _fi_from_derivs(t0, r0, diff(0, h / 2), diff(1, h / 2))[0]

    psi0 = _normalized_state(t0, r0)

    def dpsi(s):
        return (_normalized_state(*amps[s]) - _normalized_state(*amps[-s])) / (2 * s)

    def fq(dv):
        val = 4 * (np.sum(np.abs(dv) ** 2, -1) - np.abs(np.sum(np.conj(psi0) * dv, -1)) ** 2)
        return np.where(p > P_FLOOR, np.maximum(val, 0.0), np.nan)

    d_h2 = dpsi(h / 2)
    f_q = fq(_richardson(dpsi(h), d_h2))
    return (f_mt, f_q, f3, T, p), (f_mt_c, fq(d_h2))


def fisher_profile(pos: AtomPositions, params: CouplingParams, detunings,
                   step: Optional[float] = None, route: str = "fd") -> FisherProfile:
    """F_MT, F_Q and the three-outcome classical FI at every detuning.

    ``route="fd"`` differentiates in d by central differences; ``route="analytic"``
    uses the exact matrix derivative.
    """
    w = np.atleast_1d(np.asarray(detunings, dtype=float))
    if route == "analytic":
        g = ScatteringModel(pos, params).gradients(w)
        f_mt, f_q, f3, T, p = _fi_from_derivs(g.t, g.r, g.dt_dd, g.dr_dd)
        return FisherProfile(w, f_mt, f_q, f3, T, p)
    if route != "fd":
        raise ValueError(f"unknown route {route!r}")
    h = default_step(pos.spacing) if step is None else step
    d = pos.spacing

    def amplitudes(dd):
        geom = pos if dd == d else pos.at_spacing(dd)
        return ScatteringModel(geom, params).amplitudes(w)

    (f_mt, f_q, f3, T, p), (f_mt_c, f_q_c) = fd_fisher(amplitudes, d, h)
    return FisherProfile(w, f_mt, f_q, f3, T, p, f_mt_c, f_q_c)


@dataclass(frozen=True)
class FisherValue:
    value: float
    detuning: float
    analytic: float  # same quantity via the matrix-derivative route
    converged: bool
    step: float

    @property
    def routes_agree(self) -> bool:
        return _agree(self.value, self.analytic)


def search_grid(pos: AtomPositions, params: CouplingParams, policy: str = "auto",
                points: int = 961, coarse_points: int = 2001) -> np.ndarray:
    """Refined window around the tracked feature merged with a coarse global scan."""
    modes = eigendecompose(build_h_eff(pos, params))
    mode = feature_mode(modes, policy)
    return np.unique(np.concatenate([feature_grid(mode, points=points),
                                     global_grid(modes, coarse_points)]))


def _maximize(pos, params, kind, grid, policy, step):
    if grid is None:
        grid = search_grid(pos, params, policy)
    grid = np.asarray(grid, dtype=float)
    h = derivative_step(pos, params, policy=policy) if step is None else step
    prof = fisher_profile(pos, params, grid, h)
    vals = getattr(prof, kind)
    if not np.any(np.isfinite(vals)):
        raise ValueError(f"{kind} undefined everywhere on the grid (T or p_g below floor)")
    k = int(np.nanargmax(vals))  # first index wins ties

    def neg(w):
        v = getattr(fisher_profile(pos, params, [w], h), kind)[0]
        return -v if np.isfinite(v) else 0.0

    best_w, best = grid[k], vals[k]
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi > lo:
        opt = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6 * (hi - lo)})
        if -opt.fun > best:
            best_w, best = float(opt.x), -float(opt.fun)
    at = fisher_profile(pos, params, [best_w], h)
    coarse = getattr(at, kind + "_coarse")[0]
    ok = _agree(best, coarse)
    if not ok:
        warnings.warn(f"{kind} derivative unconverged: {best:.6g} vs {coarse:.6g}",
                      DerivativeWarning, stacklevel=3)
    analytic = float(getattr(fisher_profile(pos, params, [best_w], route="analytic"), kind)[0])
    return FisherValue(float(best), float(best_w), analytic, ok, h)


def classical_fi_transmission(pos: AtomPositions, params: CouplingParams, grid=None,
                              policy: str = "auto", step: Optional[float] = None) -> FisherValue:
    """max over detuning of (dT/dd)^2 / T, skipping points with T <= 1e-12."""
    return _maximize(pos, params, "f_mt", grid, policy, step)


def quantum_fi(pos: AtomPositions, params: CouplingParams, detuning: float,
               step: Optional[float] = None) -> FisherValue:
    """QFI of the normalized guided output state at a single detuning."""
    h = default_step(pos.spacing) if step is None else step
    prof = fisher_profile(pos, params, [detuning], h)
    if not np.isfinite(prof.f_q[0]):
        raise ValueError(f"p_g underflow at detuning {detuning!r}")
    ok = _agree(prof.f_q[0], prof.f_q_coarse[0])
    analytic = fisher_profile(pos, params, [detuning], route="analytic").f_q[0]
    return FisherValue(float(prof.f_q[0]), float(detuning), float(analytic), ok, h)


def quantum_fi_max(pos: AtomPositions, params: CouplingParams, grid=None,
                   policy: str = "auto", step: Optional[float] = None) -> FisherValue:
    return _maximize(pos, params, "f_q", grid, policy, step)


def cramer_rao_min_dd(fisher: float, m_measurements: int) -> float:
    """Smallest resolvable spacing change 1/sqrt(M F) for shot-noise-limited detection."""
    if not fisher > 0:
        raise ValueError(f"Fisher information must be positive, got {fisher!r}")
    if int(m_measurements) != m_measurements or m_measurements < 1:
        raise ValueError(f"measurement count must be a positive integer, got {m_measurements!r}")
    return float(1.0 / np.sqrt(m_measurements * fisher))


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r_squared: float
    n_range: tuple

    def predict(self, n):
        return self.prefactor * np.asarray(n, dtype=float) ** self.exponent


def fit_power_law(ns: Sequence[float], values: Sequence[float]) -> ScalingFit:
    """Least-squares line through (log N, log value): value ~ prefactor * N^exponent."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < 5:
        raise ValueError("need at least 5 (N, value) pairs")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise ValueError("power-law fit needs strictly positive N and values")
    x, y = np.log(ns), np.log(values)
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else float(max(0.0, 1.0 - np.sum(resid**2) / ss_tot))
    return ScalingFit(float(slope), float(np.exp(icept)), r2, tuple(int(n) for n in ns))


def fit_power_law_by_parity(ns, values) -> dict:
    """Separate fits for even and odd N (keys ``"even"``, ``"odd"``)."""
    ns = np.asarray(ns)
    values = np.asarray(values, dtype=float)
    return {name: fit_power_law(ns[ns % 2 == r], values[ns % 2 == r])
            for name, r in (("even", 0), ("odd", 1))}


@dataclass(frozen=True)
class FisherReport:
    fom: float
    f_mt: float
    f_mt_detuning: float
    f_q: float
    f_q_detuning: float
    cramer_rao_dd: float
    m_measurements: int
    converged: bool


def fisher_report(pos: AtomPositions, params: CouplingParams, m_measurements: int = 100,
                  policy: str = "auto") -> FisherReport:
    f = fom(pos, params, policy)
    grid = search_grid(pos, params, policy)
    step = derivative_step(pos, params, policy=policy)
    mt = classical_fi_transmission(pos, params, grid, policy, step)
    q = quantum_fi_max(pos, params, grid, policy, step)
    return FisherReport(f.value, mt.value, mt.detuning, q.value, q.detuning,
                        cramer_rao_min_dd(q.value, m_measurements), m_measurements,
                        f.converged and mt.converged and q.converged)
