"""Dipole-dipole kernels, the effective non-Hermitian Hamiltonian and the
frequency-dependent coupling matrix of a waveguide-coupled emitter array.

Internal units: lengths in lambda, rates and detunings in Gamma_1D
(``gamma_1d`` defaults to 1), so ``k0 = 2*pi``. Dipoles are perpendicular to
the waveguide axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import AtomPositions, InvalidConfigError, pairwise_separations

K0 = 2.0 * np.pi

# below this phase the singular closed form of the decay kernel is replaced by its series
_SERIES_CUTOFF = 0.05


@dataclass(frozen=True)
class CouplingParams:
    """Decay rates and the optional finite transition frequency.

    ``omega0`` is omega_0/Gamma_1D. ``None`` is the Markovian limit, where the
    propagation phase in the coupling matrix is evaluated at k0 for every probe
    frequency.
    """

    gamma_fs: float = 0.0
    gamma_1d: float = 1.0
    omega0: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.gamma_1d) or self.gamma_1d <= 0:
            raise InvalidConfigError(f"gamma_1d must be > 0, got {self.gamma_1d!r}")
        if not np.isfinite(self.gamma_fs) or self.gamma_fs < 0:
            raise InvalidConfigError(f"gamma_fs must be >= 0, got {self.gamma_fs!r}")
        if self.omega0 is not None and not self.omega0 > 0:
            raise InvalidConfigError(f"omega0 must be > 0 when given, got {self.omega0!r}")

    @staticmethod
    def k0d(spacing: float) -> float:
        return K0 * spacing

    def phase_scale(self, detuning):
        """omega/omega_0 for the probe, i.e. 1 + Delta/omega_0 (exactly 1 if Markovian)."""
        if self.omega0 is None:
            return np.ones_like(np.asarray(detuning, dtype=float))
        return 1.0 + np.asarray(detuning, dtype=float) / self.omega0


def free_space_kernel(x):
    """Dimensionless nonguided coupling (3/4)(-i/x + 1/x^2 + i/x^3), without gamma or e^{ix}."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("free_space_kernel needs x > 0; the j = l term is handled by the builders")
    out = 0.75 * (-1j / x + 1.0 / x**2 + 1j / x**3)
    return out[()] if out.ndim == 0 else out


def _free_space_kernel_dx(x):
    return 0.75 * (1j / x**2 - 2.0 / x**3 - 3j / x**4)


def fs_decay_kernel(x):
    """(3/2)[sin x/x + cos x/x^2 - sin x/x^3], continuous through x = 0 where it equals 1."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    xs = x[small]
    x2 = xs * xs
    out[small] = 1.0 - x2 / 5.0 + 3.0 * x2**2 / 280.0 - x2**3 / 3780.0
    xl = x[~small]
    s, c = np.sin(xl), np.cos(xl)
    out[~small] = 1.5 * (s / xl + c / xl**2 - s / xl**3)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: np.ndarray
    params: CouplingParams
    positions: AtomPositions

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class CouplingMatrix:
    matrix: np.ndarray
    detuning: float


def _phases(pos: AtomPositions) -> np.ndarray:
    x = K0 * pairwise_separations(pos)
    n = pos.n_atoms
    if n > 1 and np.min(x[~np.eye(n, dtype=bool)]) <= 0:
        raise InvalidConfigError("coincident atom positions")
    return x


def _pair_terms(x: np.ndarray, params: CouplingParams, q=1.0) -> np.ndarray:
    """(Gamma_1D/2 + gamma*V(x)) e^{i q x} off the diagonal, zero on it."""
    n = x.shape[0]
    off = ~np.eye(n, dtype=bool)
    f = np.zeros((n, n), dtype=complex)
    xo = x[off]
    f[off] = (0.5 * params.gamma_1d + params.gamma_fs * free_space_kernel(xo)) * np.exp(1j * q * xo)
    return f


def build_h_eff(pos: AtomPositions, params: CouplingParams) -> EffectiveHamiltonian:
    """H_jl = -i(Gamma_1D/2 + gamma V_jl) e^{i k0 z_jl}; H_jj = -i(Gamma_1D + gamma)/2.

    The divergent real part of the self-interaction is a Lamb shift absorbed into
    omega_0; its finite dissipative part is gamma/2.
    """
    x = _phases(pos)
    h = -1j * _pair_terms(x, params)
    h[np.diag_indices_from(h)] = -0.5j * (params.gamma_1d + params.gamma_fs)
    h = 0.5 * (h + h.T)  # exact symmetry against rounding in the pair table
    return EffectiveHamiltonian(h, params, pos)


def build_m(pos: AtomPositions, params: CouplingParams, detuning: float) -> CouplingMatrix:
    """M_jl = (Gamma_1D/2 + gamma V_jl) e^{i omega z_jl/c} - i Delta delta_jl."""
    x = _phases(pos)
    q = float(params.phase_scale(detuning))
    m = _pair_terms(x, params, q)
    m[np.diag_indices_from(m)] = 0.5 * (params.gamma_1d + params.gamma_fs) - 1j * detuning
    return CouplingMatrix(m, float(detuning))


def coupling_matrices(pos: AtomPositions, params: CouplingParams, detunings) -> np.ndarray:
    """Stack of M(Delta) for many detunings, shape (len(detunings), N, N)."""
    detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
    x = _phases(pos)
    n = pos.n_atoms
    diag = 0.5 * (params.gamma_1d + params.gamma_fs)
    if params.omega0 is None:
        base = _pair_terms(x, params)
        base[np.diag_indices(n)] = diag
        out = np.broadcast_to(base, (detunings.size, n, n)).copy()
    else:
        out = np.empty((detunings.size, n, n), dtype=complex)
        for k, q in enumerate(params.phase_scale(detunings)):
            out[k] = _pair_terms(x, params, q)
            out[k][np.diag_indices(n)] = diag
    idx = np.arange(n)
    out[:, idx, idx] -= 1j * detunings[:, None]
    return out


def coupling_matrix_derivatives(pos: AtomPositions, params: CouplingParams, detuning: float):
    """Analytic (dM/dd, dM/dDelta) at fixed geometry shape; z_j scales as z_j/d."""
    x = _phases(pos)
    n = pos.n_atoms
    q = float(params.phase_scale(detuning))
    off = ~np.eye(n, dtype=bool)
    xo = x[off]
    f = (0.5 * params.gamma_1d + params.gamma_fs * free_space_kernel(xo)) * np.exp(1j * q * xo)
    dfdx = params.gamma_fs * _free_space_kernel_dx(xo) * np.exp(1j * q * xo) + 1j * q * f
    dm_dd = np.zeros((n, n), dtype=complex)
    dm_dd[off] = dfdx * xo / pos.spacing
    dm_ddelta = -1j * np.eye(n, dtype=complex)
    if params.omega0 is not None:
        dm_ddelta[off] = 1j * xo * f / params.omega0
    return dm_dd, dm_ddelta
