"""Single-photon transmission and reflection of the array, spectra, and
extraction of the narrow subradiant feature (centre, FWHM) and its shift.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .hamiltonian import (K0, CouplingParams, _free_space_kernel_dx, _phases,
                          free_space_kernel)
from .lattice import AtomPositions
from .spectral import CollectiveMode, ModeSet, eigendecompose
from .hamiltonian import build_h_eff

SOLVE_RESIDUAL = 1e-10
COND_LIMIT = 1e13
_CHUNK_BYTES = 64 * 2**20


class SingularCouplingError(np.linalg.LinAlgError):
    def __init__(self, detuning: float, condition: float):
        super().__init__(f"coupling matrix singular at detuning {detuning!r} (cond ~ {condition:.3e})")
        self.detuning = detuning
        self.condition = condition


class FeatureNotFoundError(RuntimeError):
    pass


class GridTooNarrowError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScatterAmplitudes:
    t: complex
    r: complex

    @property
    def transmission(self) -> float:
        return abs(self.t) ** 2

    @property
    def reflection(self) -> float:
        return abs(self.r) ** 2

    @property
    def p_g(self) -> float:
        return self.transmission + self.reflection


@dataclass(frozen=True)
class AmplitudeGradients:
    """Amplitudes with analytic derivatives along the spacing d and the detuning."""

    t: np.ndarray
    r: np.ndarray
    dt_dd: np.ndarray
    dr_dd: np.ndarray
    dt_dw: np.ndarray
    dr_dw: np.ndarray


class ScatteringModel:
    """Coupling-matrix solver for one fixed geometry.

    t = 1 - (Gamma_1D/2) b^T M^{-1} a and r = -(Gamma_1D/2) a^T M^{-1} a with
    a_l = e^{i omega z_l/c}, b_j = e^{-i omega z_j/c}. M is complex symmetric, which
    the gradient formulas use.
    """

    def __init__(self, pos: AtomPositions, params: CouplingParams):
        self.pos = pos
        self.params = params
        self._x = _phases(pos)
        n = pos.n_atoms
        self._off = ~np.eye(n, dtype=bool)
        xo = self._x[self._off]
        self._xo = xo
        self._shape = 0.5 * params.gamma_1d + params.gamma_fs * (free_space_kernel(xo) if xo.size else 0)
        self._dshape = params.gamma_fs * (_free_space_kernel_dx(xo) if xo.size else 0)
        self._diag = 0.5 * (params.gamma_1d + params.gamma_fs)
        self._markov = params.omega0 is None
        if self._markov:
            self._m0 = self._pair(1.0)
            self._dm_dd0 = self._pair_dd(1.0)

    @property
    def n_atoms(self) -> int:
        return self.pos.n_atoms

    def _pair(self, q):
        n = self.n_atoms
        m = np.zeros((n, n), dtype=complex)
        m[self._off] = self._shape * np.exp(1j * q * self._xo)
        m[np.diag_indices(n)] = self._diag
        return m

    def _pair_dd(self, q):
        n = self.n_atoms
        e = np.exp(1j * q * self._xo)
        out = np.zeros((n, n), dtype=complex)
        out[self._off] = (self._dshape * e + 1j * q * self._shape * e) * self._xo / self.pos.spacing
        return out

    def matrices(self, detunings: np.ndarray) -> np.ndarray:
        n = self.n_atoms
        if self._markov:
            m = np.broadcast_to(self._m0, (detunings.size, n, n)).copy()
        else:
            m = np.stack([self._pair(q) for q in self.params.phase_scale(detunings)])
        idx = np.arange(n)
        m[:, idx, idx] -= 1j * detunings[:, None]
        return m

    def _solve(self, m, rhs, detunings):
        try:
            sol = np.linalg.solve(m, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            for k, dk in enumerate(detunings):
                if not np.all(np.isfinite(np.linalg.cond(m[k]))) or np.linalg.cond(m[k]) > 1e15:
                    raise SingularCouplingError(float(dk), float(np.linalg.cond(m[k])))
            raise
        res = np.linalg.norm(np.einsum("kij,kj->ki", m, sol) - rhs, axis=1)
        scale = np.linalg.norm(m, axis=(1, 2)) * np.linalg.norm(sol, axis=1) + np.linalg.norm(rhs, axis=1)
        rhs_norm = np.linalg.norm(rhs, axis=1)
        # ||M|| ||x|| / ||b|| bounds cond(M) from below and flags near-exact dark modes
        bad = (res > SOLVE_RESIDUAL * scale) | (
            np.linalg.norm(m, axis=(1, 2)) * np.linalg.norm(sol, axis=1) > COND_LIMIT * rhs_norm)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise SingularCouplingError(float(detunings[k]), float(np.linalg.cond(m[k])))
        return sol

    def _chunks(self, detunings):
        per = max(1, _CHUNK_BYTES // (16 * self.n_atoms**2 * 2))
        for s in range(0, detunings.size, per):
            yield slice(s, s + per)

    def amplitudes(self, detunings):
        """(t, r) arrays over a detuning array."""
        detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
        t = np.empty(detunings.size, dtype=complex)
        r = np.empty(detunings.size, dtype=complex)
        g = 0.5 * self.params.gamma_1d
        z = self.pos.z
        for sl in self._chunks(detunings):
            dk = detunings[sl]
            q = self.params.phase_scale(dk)
            a = np.exp(1j * K0 * q[:, None] * z[None, :])
            x = self._solve(self.matrices(dk), a, dk)
            t[sl] = 1.0 - g * np.sum(np.conj(a) * x, axis=1)
            r[sl] = -g * np.sum(a * x, axis=1)
        return t, r

    def gradients(self, detunings) -> AmplitudeGradients:
        """Analytic d/dd and d/dDelta of t and r: d(M^{-1}) = -M^{-1} (dM) M^{-1}."""
        detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
        n_pts, n = detunings.size, self.n_atoms
        out = {k: np.empty(n_pts, dtype=complex) for k in ("t", "r", "tdd", "rdd", "tdw", "rdw")}
        g = 0.5 * self.params.gamma_1d
        z = self.pos.z
        zd = z / self.pos.spacing
        idx = np.arange(n)
        for sl in self._chunks(detunings):
            dk = detunings[sl]
            q = self.params.phase_scale(dk)
            m = self.matrices(dk)
            a = np.exp(1j * K0 * q[:, None] * z[None, :])
            b = np.conj(a)
            x = self._solve(m, a, dk)
            y = self._solve(m, b, dk)
            if self._markov:
                dm_dd = np.broadcast_to(self._dm_dd0, m.shape)
                dm_dw = np.zeros_like(m)
                da_dw = np.zeros_like(a)
            else:
                dm_dd = np.stack([self._pair_dd(qq) for qq in q])
                dm_dw = np.zeros_like(m)
                for k, qq in enumerate(q):
                    dm_dw[k][self._off] = 1j * self._xo * self._shape * np.exp(1j * qq * self._xo) / self.params.omega0
                da_dw = 1j * K0 * z[None, :] / self.params.omega0 * a
            dm_dw[:, idx, idx] -= 1j
            da_dd = 1j * K0 * q[:, None] * zd[None, :] * a
            db_dd, db_dw = np.conj(da_dd / a) * b, np.conj(da_dw / np.where(a == 0, 1, a)) * b
            ydmx_dd = np.einsum("ki,kij,kj->k", y, dm_dd, x)
            xdmx_dd = np.einsum("ki,kij,kj->k", x, dm_dd, x)
            ydmx_dw = np.einsum("ki,kij,kj->k", y, dm_dw, x)
            xdmx_dw = np.einsum("ki,kij,kj->k", x, dm_dw, x)
            out["t"][sl] = 1.0 - g * np.sum(b * x, axis=1)
            out["r"][sl] = -g * np.sum(a * x, axis=1)
            out["tdd"][sl] = -g * (np.sum(db_dd * x, 1) + np.sum(y * da_dd, 1) - ydmx_dd)
            out["rdd"][sl] = -g * (2 * np.sum(da_dd * x, 1) - xdmx_dd)
            out["tdw"][sl] = -g * (np.sum(db_dw * x, 1) + np.sum(y * da_dw, 1) - ydmx_dw)
            out["rdw"][sl] = -g * (2 * np.sum(da_dw * x, 1) - xdmx_dw)
        return AmplitudeGradients(out["t"], out["r"], out["tdd"], out["rdd"], out["tdw"], out["rdw"])


def transmission_amplitude(pos: AtomPositions, params: CouplingParams, detuning: float) -> ScatterAmplitudes:
    t, r = ScatteringModel(pos, params).amplitudes([detuning])
    return ScatterAmplitudes(complex(t[0]), complex(r[0]))


@dataclass(frozen=True)
class SpectrumTrace:
    grid: np.ndarray
    transmission: np.ndarray
    reflection: np.ndarray  # |r|^2
    loss: np.ndarray  # 1 - |r|^2 - |t|^2
    valid: np.ndarray

    @property
    def one_minus_t(self) -> np.ndarray:
        return 1.0 - self.transmission


def spectrum(pos: AtomPositions, params: CouplingParams, grid) -> SpectrumTrace:
    """T, |r|^2 and loss on a grid; singular points become NaN gaps flagged in ``valid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty strictly increasing 1-D array")
    model = ScatteringModel(pos, params)
    try:
        t, r = model.amplitudes(grid)
        valid = np.ones(grid.size, dtype=bool)
    except SingularCouplingError:
        t = np.full(grid.size, np.nan, dtype=complex)
        r = np.full(grid.size, np.nan, dtype=complex)
        valid = np.zeros(grid.size, dtype=bool)
        for k, w in enumerate(grid):
            try:
                t[k], r[k] = (v[0] for v in model.amplitudes([w]))
                valid[k] = True
            except SingularCouplingError:
                pass
    tt, rr = np.abs(t) ** 2, np.abs(r) ** 2
    return SpectrumTrace(grid, tt, rr, 1.0 - tt - rr, valid)


@dataclass(frozen=True)
class SpectralFeature:
    kind: str  # "peak" or "dip"
    center: float
    fwhm: float
    value: float  # T at the centre
    baseline: float


def feature_mode(modes: ModeSet, policy: str = "auto") -> CollectiveMode:
    """Mode whose resonance is tracked.

    ``min_decay`` is the most subradiant mode, ``min_shift`` the leftmost one.
    ``auto`` uses the leftmost mode for d < 0.1 lambda, where the two coincide
    and the leftmost is the one that stays isolated.
    """
    if policy == "min_decay":
        return modes.most_subradiant
    if policy == "min_shift":
        return modes.lowest_shift
    if policy == "auto":
        spacing = modes.hamiltonian.positions.spacing
        return modes.lowest_shift if spacing < 0.1 else modes.most_subradiant
    raise ValueError(f"unknown feature policy {policy!r}")


def feature_grid(mode: CollectiveMode, window: float = 12.0, points: int = 961) -> np.ndarray:
    return mode.shift + mode.decay * np.linspace(-window, window, points)


def global_grid(modes: ModeSet, points: int = 2001, margin: float = 3.0) -> np.ndarray:
    j = modes.shifts
    return np.linspace(j.min() - margin, j.max() + margin, points)


def _local_extrema(y: np.ndarray, valid: np.ndarray, floor: float):
    inner = np.arange(1, y.size - 1)
    ok = valid[inner] & valid[inner - 1] & valid[inner + 1]
    left, mid, right = y[inner - 1], y[inner], y[inner + 1]
    peak = ok & (mid > left) & (mid >= right) & (mid - np.minimum(left, right) > floor)
    dip = ok & (mid < left) & (mid <= right) & (np.maximum(left, right) - mid > floor)
    return inner[peak], inner[dip]


def _quadratic_vertex(x, y):
    h0, h2 = x[0] - x[1], x[2] - x[1]
    s0, s2 = (y[0] - y[1]) / h0, (y[2] - y[1]) / h2
    a = (s2 - s0) / (h2 - h0)
    b = s0 - a * h0
    if a == 0:
        return x[1], y[1]
    u = -b / (2 * a)
    if not h0 <= u <= h2:
        return x[1], y[1]
    return x[1] + u, y[1] - b * b / (4 * a)


def _crossing(grid, y, start, step, level, above):
    k = start
    while 0 <= k + step < grid.size:
        nxt = k + step
        if (y[nxt] < level) if above else (y[nxt] > level):
            frac = (level - y[k]) / (y[nxt] - y[k])
            return grid[k] + frac * (grid[nxt] - grid[k]), k, nxt
        k = nxt
    raise GridTooNarrowError("half-height crossing not bracketed inside the grid")


def find_subradiant_feature(trace: SpectrumTrace, hint: CollectiveMode,
                            min_points: int = 200) -> SpectralFeature:
    """Extremum of T nearest the hinted mode, its centre and FWHM.

    The centre comes from a parabola through the three samples around the discrete
    extremum; the baseline is the mean of T at centre +/- 10 Gamma_hint; the FWHM
    from linear interpolation of the two half-height crossings.
    """
    grid, y = trace.grid, trace.transmission
    lo, hi = hint.shift - 10 * hint.decay, hint.shift + 10 * hint.decay
    inside = (grid >= lo) & (grid <= hi)
    if grid[0] > lo or grid[-1] < hi or np.count_nonzero(inside) < min_points:
        raise GridTooNarrowError(
            f"trace must cover [{lo:.6g}, {hi:.6g}] with >= {min_points} points")
    peaks, dips = _local_extrema(y, trace.valid, 1e-12)
    cand = np.concatenate([peaks, dips])
    kinds = np.array(["peak"] * peaks.size + ["dip"] * dips.size)
    near = np.abs(grid[cand] - hint.shift) <= 3 * hint.decay
    if not np.any(near):
        raise FeatureNotFoundError(f"no extremum within 3 Gamma of J = {hint.shift:.6g}")
    cand, kinds = cand[near], kinds[near]
    pick = int(np.argmin(np.abs(grid[cand] - hint.shift)))
    i, kind = int(cand[pick]), str(kinds[pick])
    center, value = _quadratic_vertex(grid[i - 1:i + 2], y[i - 1:i + 2])
    offs = np.array([center - 10 * hint.decay, center + 10 * hint.decay])
    if offs[0] < grid[0] or offs[1] > grid[-1]:
        raise GridTooNarrowError("baseline points fall outside the grid")
    good = trace.valid
    baseline = float(np.mean(np.interp(offs, grid[good], y[good])))
    half = 0.5 * (value + baseline)
    above = kind == "peak"
    if (value > half) != above:
        raise FeatureNotFoundError("extremum does not stand out from the local baseline")
    left, _, _ = _crossing(grid, y, i, -1, half, above)
    right, _, _ = _crossing(grid, y, i, +1, half, above)
    return SpectralFeature(kind, float(center), float(right - left), float(value), baseline)


def measure_feature(pos: AtomPositions, params: CouplingParams, hint: Optional[CollectiveMode] = None,
                    policy: str = "auto", points: int = 961, window: float = 12.0) -> SpectralFeature:
    """Feature from a windowed scan, then polished on the exact lineshape.

    The centre is refined as the root of dT/dDelta and the half-height crossings
    as roots of T - half, each bracketed by neighbouring grid samples.
    """
    if hint is None:
        hint = feature_mode(eigendecompose(build_h_eff(pos, params)), policy)
    grid = feature_grid(hint, window, points)
    trace = spectrum(pos, params, grid)
    rough = find_subradiant_feature(trace, hint)
    model = ScatteringModel(pos, params)

    def T(w):
        t, _ = model.amplitudes([w])
        return abs(t[0]) ** 2

    def dT(w):
        gr = model.gradients([w])
        return 2.0 * np.real(np.conj(gr.t[0]) * gr.dt_dw[0])

    i = int(np.argmin(np.abs(grid - rough.center)))
    center = rough.center
    for lo_k, hi_k in ((i - 1, i + 1), (i - 2, i + 2)):
        lo_k, hi_k = max(lo_k, 0), min(hi_k, grid.size - 1)
        a, b = dT(grid[lo_k]), dT(grid[hi_k])
        if a * b < 0:
            center = brentq(dT, grid[lo_k], grid[hi_k], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            break
    value = T(center)
    baseline = 0.5 * (T(center - 10 * hint.decay) + T(center + 10 * hint.decay))
    half = 0.5 * (value + baseline)
    above = rough.kind == "peak"
    ic = int(np.searchsorted(grid, center))
    edges = []
    for step, start in ((-1, ic), (+1, ic - 1)):
        _, k0, k1 = _crossing(grid, trace.transmission, min(max(start, 0), grid.size - 1), step, half, above)
        a, b = sorted((grid[k0], grid[k1]))
        fa, fb = T(a) - half, T(b) - half
        edges.append(brentq(lambda w: T(w) - half, a, b, xtol=1e-15) if fa * fb < 0 else 0.5 * (a + b))
    return SpectralFeature(rough.kind, float(center), float(edges[1] - edges[0]), float(value), float(baseline))


@dataclass(frozen=True)
class ShiftResult:
    shift: float  # |centre(d + dd) - centre(d)|
    signed_shift: float
    fwhm: tuple
    centers: tuple


def spectral_shift(pos: AtomPositions, params: CouplingParams, delta_d: float,
                   policy: str = "auto", points: int = 961) -> ShiftResult:
    """Displacement of the tracked feature when the spacing changes by ``delta_d``."""
    f0 = measure_feature(pos, params, policy=policy, points=points)
    if delta_d == 0:
        return ShiftResult(0.0, 0.0, (f0.fwhm, f0.fwhm), (f0.center, f0.center))
    f1 = measure_feature(pos.at_spacing(pos.spacing + delta_d), params, policy=policy, points=points)
    moved = f1.center - f0.center
    if abs(moved) > 3 * min(f0.fwhm, f1.fwhm):
        warnings.warn(f"feature moved {abs(moved) / f0.fwhm:.1f} linewidths; identity relies on "
                      f"the '{policy}' mode policy", stacklevel=2)
    return ShiftResult(abs(moved), moved, (f0.fwhm, f1.fwhm), (f0.center, f1.center))
