"""Geometry of a one-dimensional emitter array along the waveguide axis.

Lengths are in units of the transition wavelength (lambda = 1). Atom j sits
at ``z_j = j*d + u*xi_j`` with ``xi_j ~ U[-1, 1]`` i.i.d.; ``u`` is given as a
fraction of ``d`` so the whole geometry scales rigidly with the spacing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidConfigError(ValueError):
    """Raised for geometry or coupling parameters that violate their invariants."""


@dataclass(frozen=True)
class LatticeConfig:
    n_atoms: int
    spacing: float
    disorder_amplitude: float = 0.0  # fraction of spacing
    seed: int = 0

    def validate(self) -> None:
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise InvalidConfigError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise InvalidConfigError(f"spacing must be > 0, got {self.spacing!r}")
        if not np.isfinite(self.disorder_amplitude) or self.disorder_amplitude < 0:
            raise InvalidConfigError(
                f"disorder_amplitude must be >= 0, got {self.disorder_amplitude!r}")
        if self.disorder_amplitude >= 0.5:
            raise InvalidConfigError(
                "disorder_amplitude must be < 0.5 (in units of spacing) to keep atoms ordered, "
                f"got {self.disorder_amplitude!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


@dataclass(frozen=True)
class AtomPositions:
    """Ordered atom coordinates ``z`` (units of lambda) at nominal spacing ``spacing``.

    ``offsets`` holds the dimensionless displacements ``u*xi_j / d`` so that
    :meth:`at_spacing` can rescale a disordered realization without redrawing it.
    """

    z: np.ndarray
    spacing: float
    offsets: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        z = np.ascontiguousarray(self.z, dtype=float)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        if self.offsets is None:
            off = z / self.spacing - np.arange(1, z.size + 1)
        else:
            off = np.asarray(self.offsets, dtype=float)
        off = np.ascontiguousarray(off)
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)
        if z.ndim != 1 or z.size == 0:
            raise InvalidConfigError("positions must be a non-empty 1-D array")
        if np.any(np.diff(z) <= 0):
            raise InvalidConfigError("positions must be strictly increasing")

    @property
    def n_atoms(self) -> int:
        return self.z.size

    def at_spacing(self, spacing: float) -> "AtomPositions":
        """Same realization with every coordinate scaled to a new nominal spacing."""
        j = np.arange(1, self.n_atoms + 1)
        return AtomPositions(spacing * (j + self.offsets), spacing, self.offsets)

    def reversed(self) -> "AtomPositions":
        """Mirror image ``z -> z_1 + z_N - z``, reindexed so it stays increasing."""
        z = (self.z[0] + self.z[-1]) - self.z[::-1]
        return AtomPositions(z, self.spacing)


def build_positions(config: LatticeConfig) -> AtomPositions:
    config.validate()
    n, d = int(config.n_atoms), float(config.spacing)
    j = np.arange(1, n + 1, dtype=float)
    if config.disorder_amplitude == 0:
        return AtomPositions(j * d, d, np.zeros(n))
    rng = np.random.default_rng(int(config.seed))
    xi = rng.uniform(-1.0, 1.0, size=n)
    offsets = config.disorder_amplitude * xi
    return AtomPositions(d * (j + offsets), d, offsets)


def uniform_positions(n_atoms: int, spacing: float) -> AtomPositions:
    return build_positions(LatticeConfig(n_atoms, spacing))


def pairwise_separations(pos: AtomPositions) -> np.ndarray:
    z = pos.z
    return np.abs(z[:, None] - z[None, :])
