"""
Transmission features and the figure of merit
==============================================

The subradiant mode shows up in the single-photon transmission spectrum as a
narrow peak (d = lambda/4) or dip (d = lambda/50). Its centre moves when the
spacing changes; the figure of merit divides that motion by the linewidth.
"""

import numpy as np

from subrad import CouplingParams, measure_feature, spectral_shift, spectrum, uniform_positions
from subrad.metrology import fit_power_law, fom
from subrad.scattering import feature_grid, feature_mode
from subrad import build_h_eff, eigendecompose

params = CouplingParams(gamma_fs=0.1)

# A coarse look at one spectrum around the tracked mode.
pos = uniform_positions(10, 0.25)
mode = feature_mode(eigendecompose(build_h_eff(pos, params)))
trace = spectrum(pos, params, feature_grid(mode, window=12, points=25))
for w, t in zip(trace.grid, trace.transmission):
    print(f"{w:+.4f}  {'#' * int(60 * t)}")

# %%
for n, d, dd in [(10, 0.25, 1e-3), (20, 0.25, 1e-3), (2, 0.02, 1e-5), (10, 0.02, 1e-5)]:
    f = measure_feature(uniform_positions(n, d), params)
    s = spectral_shift(uniform_positions(n, d), params, -dd)
    print(f"N={n:2d} d={d}: {f.kind} at {f.center:+.5f}, FWHM {f.fwhm:.3e}, "
          f"shift for d-{dd:g}: {s.shift:.5f}")

# %%
# FOM against N. Narrowing wins over the slowly varying slope.
ns = np.arange(5, 41, 5)
vals = [fom(uniform_positions(int(n), 0.25), params).value for n in ns]
for n, v in zip(ns, vals):
    print(f"N={n:2d}  FOM = {v:.4e} per lambda")
print("exponent:", round(fit_power_law(ns, vals).exponent, 2))
