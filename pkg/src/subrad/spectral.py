"""Collective modes of the effective Hamiltonian and closed-form decay-rate scalings."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.linalg

from .hamiltonian import K0, CouplingParams, EffectiveHamiltonian, build_h_eff, fs_decay_kernel
from .lattice import AtomPositions, pairwise_separations

RESIDUAL_GATE = 1e-10
_TIE_RTOL = 1e-9


class EigensolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class CollectiveMode:
    shift: float  # J = Re(lambda)
    decay: float  # Gamma = -2 Im(lambda)
    vector: np.ndarray
    residual: float

    @property
    def eigenvalue(self) -> complex:
        return complex(self.shift, -0.5 * self.decay)


@dataclass(frozen=True)
class ModeSet:
    """All N modes, ordered by decay rate (ties broken by frequency shift)."""

    modes: List[CollectiveMode]
    hamiltonian: EffectiveHamiltonian

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def most_subradiant(self) -> CollectiveMode:
        return self.modes[0]

    @property
    def lowest_shift(self) -> CollectiveMode:
        return min(self.modes, key=lambda m: m.shift)

    @property
    def shifts(self) -> np.ndarray:
        return np.array([m.shift for m in self.modes])

    @property
    def decays(self) -> np.ndarray:
        return np.array([m.decay for m in self.modes])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m.eigenvalue for m in self.modes])


@dataclass(frozen=True)
class DecaySplit:
    guided: float
    free_space: float
    total: float


def _order(shift: np.ndarray, decay: np.ndarray) -> np.ndarray:
    order = list(np.lexsort((shift, decay)))
    tol = _TIE_RTOL * max(float(np.max(np.abs(decay))), 1e-300)
    changed = True
    while changed:
        changed = False
        for a in range(len(order) - 1):
            i, j = order[a], order[a + 1]
            if abs(decay[i] - decay[j]) <= tol and shift[j] < shift[i]:
                order[a], order[a + 1] = j, i
                changed = True
    return np.array(order)


def eigendecompose(h: EffectiveHamiltonian) -> ModeSet:
    """Right eigenpairs of the complex-symmetric (non-Hermitian) H_eff via LAPACK zgeev."""
    mat = h.matrix
    vals, vecs = scipy.linalg.eig(mat, check_finite=True)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    residuals = np.linalg.norm(mat @ vecs - vecs * vals, axis=0)
    gate = RESIDUAL_GATE * max(h.norm(), 1e-300)
    worst = int(np.argmax(residuals))
    if residuals[worst] > gate:
        raise EigensolverError(
            f"eigenpair {worst} residual {residuals[worst]:.3e} exceeds {gate:.3e}",
            float(residuals[worst]))
    shift, decay = vals.real, -2.0 * vals.imag
    modes = [CollectiveMode(float(shift[k]), float(decay[k]), vecs[:, k].copy(), float(residuals[k]))
             for k in _order(shift, decay)]
    return ModeSet(modes, h)


def decay_split(mode: CollectiveMode, pos: AtomPositions, params: CouplingParams) -> DecaySplit:
    """Guided part Gamma_1D |sum_j c_j e^{i k0 z_j}|^2 and nonguided part gamma sum c_j* c_l K_fs.

    ``total`` is -2 Im<phi|H|phi>. The two parts add up to it whenever the mode is
    mirror-symmetric up to a phase (every eigenmode of a uniform array); for
    disordered arrays the guided part counts forward emission only.
    """
    c = np.asarray(mode.vector)
    guided = params.gamma_1d * abs(np.sum(c * np.exp(1j * K0 * pos.z))) ** 2
    kern = fs_decay_kernel(K0 * pairwise_separations(pos))
    free = params.gamma_fs * float(np.real(np.conj(c) @ kern @ c))
    h = build_h_eff(pos, params).matrix
    total = -2.0 * float(np.imag(np.conj(c) @ h @ c))
    return DecaySplit(float(guided), free, float(total))


def gamma_ideal(n_atoms: int, spacing: float, xi: int = 1, gamma_1d: float = 1.0) -> float:
    """Band-edge decay rate of mode ``xi`` in a lossless waveguide.

    (Gamma_1D/2) (pi xi)^2 / N^3 * sin^2(k0 d/2) / cos^4(k0 d/2), valid for xi << N.
    """
    if n_atoms < 2:
        raise ValueError("needs at least two atoms")
    if not 0 < spacing < 0.5:
        raise ValueError(f"spacing must lie in (0, lambda/2), got {spacing!r}")
    if xi < 1:
        raise ValueError("mode index starts at 1")
    half = 0.5 * K0 * spacing
    return 0.5 * gamma_1d * (np.pi * xi) ** 2 / n_atoms**3 * np.sin(half) ** 2 / np.cos(half) ** 4


def parity_phase(n_atoms: int, spacing: float) -> float:
    """theta_{N+1} = (N+1) k0 d."""
    return (n_atoms + 1) * K0 * spacing


def gamma_deep_subwavelength(n_atoms: int, spacing: float, xi: int = 1,
                             params: CouplingParams = CouplingParams(0.1)) -> float:
    """Deep-subwavelength band-edge decay rate, split into even/odd-N branches.

    pi^2 xi^2/(N+1)^3 * {Gamma_1D/4 [1 + (-1)^{N+1} cos th] + gamma/4 [1 + (-1)^{N+1} K_fs(th)]}
    with th = (N+1) k0 d.
    """
    if n_atoms < 2:
        raise ValueError("needs at least two atoms")
    if not 0 < spacing <= 0.1:
        raise ValueError(f"deep-subwavelength formula needs 0 < d <= 0.1 lambda, got {spacing!r}")
    if spacing > 0.05:
        warnings.warn(f"d = {spacing} lambda is outside d <= 0.05 lambda; expect poor accuracy",
                      stacklevel=2)
    th = parity_phase(n_atoms, spacing)
    sign = (-1.0) ** (n_atoms + 1)
    pref = (np.pi * xi) ** 2 / (n_atoms + 1) ** 3
    return float(pref * (0.25 * params.gamma_1d * (1 + sign * np.cos(th))
                         + 0.25 * params.gamma_fs * (1 + sign * fs_decay_kernel(th))))


@dataclass(frozen=True)
class SubradiantLocation:
    has_lowest_shift: bool
    shift_rank: int  # 0 = lowest J
    n_modes: int

    @property
    def at_band_edge(self) -> bool:
        return self.shift_rank in (0, self.n_modes - 1)


def most_subradiant_location(modes: ModeSet) -> SubradiantLocation:
    """Where the minimum-decay mode sits in the frequency ordering of all modes."""
    if len(modes) < 3:
        raise ValueError("location diagnostic needs N >= 3")
    target = modes.most_subradiant.shift
    rank = int(np.sum(modes.shifts < target))
    return SubradiantLocation(rank == 0, rank, len(modes))


def ansatz_vector(pos: AtomPositions, xi: int = 1, wavevector: float | None = None) -> np.ndarray:
    """sqrt(2/(N+1)) sin(pi xi j/(N+1)) e^{i k z_j}; ``wavevector`` defaults to pi/d."""
    n = pos.n_atoms
    k = np.pi / pos.spacing if wavevector is None else wavevector
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * xi * j / (n + 1)) * np.exp(1j * k * pos.z)


def ansatz_overlap(mode: CollectiveMode, pos: AtomPositions, xi: int = 1) -> float:
    """Best |<ansatz|mode>| over the two Brillouin-zone edges k = 0 and k = pi/d."""
    return max(abs(np.vdot(ansatz_vector(pos, xi, k), mode.vector))
               for k in (0.0, np.pi / pos.spacing))
