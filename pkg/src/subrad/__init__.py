"""Subradiant waveguide-QED arrays: modes, single-photon spectra and sensing bounds."""
from .lattice import (AtomPositions, InvalidConfigError, LatticeConfig, build_positions,
                      pairwise_separations, uniform_positions)
from .hamiltonian import (CouplingMatrix, CouplingParams, EffectiveHamiltonian, build_h_eff,
                          build_m, free_space_kernel, fs_decay_kernel)
from .spectral import (CollectiveMode, DecaySplit, EigensolverError, ModeSet, decay_split,
                       eigendecompose, gamma_deep_subwavelength, gamma_ideal,
                       most_subradiant_location)
from .scattering import (FeatureNotFoundError, GridTooNarrowError, ScatterAmplitudes,
                         ScatteringModel, SpectralFeature, SpectrumTrace, find_subradiant_feature,
                         measure_feature, spectral_shift, spectrum, transmission_amplitude)

__version__ = "0.1.0"
