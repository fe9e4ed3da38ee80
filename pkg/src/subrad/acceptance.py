"""Executable acceptance criteria for the waveguide-QED sensing model.

Each ``criterion_*`` function runs one gate at its pinned tolerance and returns a
:class:`CriterionResult`; ``run_all`` drives them for the CLI ``check`` command
and the test suite.
"""
from __future__ import annotations

import functools
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import metrology as met
from .hamiltonian import CouplingParams, build_h_eff
from .lattice import LatticeConfig, build_positions, uniform_positions
from .scattering import (ScatteringModel, SpectrumTrace, find_subradiant_feature,
                         spectral_shift)
from .spectral import CollectiveMode, eigendecompose, gamma_deep_subwavelength, gamma_ideal

LOSSY = CouplingParams(gamma_fs=0.1)
LOSSLESS = CouplingParams(gamma_fs=0.0)

# criterion 1
IDEAL_N = tuple(range(8, 101))
IDEAL_TOL_N10 = 0.10
IDEAL_TOL_N50 = 0.02
IDEAL_EXPONENT = (-3.0, 0.05)
# criterion 2
PARITY_N = tuple(range(4, 41))
PARITY_MAG_TOL = 0.15
# criterion 3: (N, d, delta_d, reference shift); the perturbed spacing is d - delta_d
REFERENCE_SHIFTS = ((10, 0.25, 1e-3, 0.0033), (20, 0.25, 1e-3, 0.00306),
                 (2, 0.02, 1e-5, 0.18233), (10, 0.02, 1e-5, 0.37318))
SHIFT_RTOL = 0.05
# criterion 4
FOM_N = tuple(range(5, 41))
FOM_EXPONENT_WIDE = (3.0, 0.2)
FOM_EXPONENT_DEEP = (3.0, 0.3)
FOM_RATIO_LOG10 = (3.3, 4.7)
FOM_RATIO_N = 10
# criterion 5
FISHER_N = tuple(range(4, 21))
FISHER_EXPONENT = (6.0, 0.3)
FISHER_RATIO_LOG10 = (5.3, 6.7)
FISHER_RATIO_N = 10
# criterion 6
CR_CASES = ((100, 0.25), (10, 0.02))
CR_MEASUREMENTS = 100
CR_BOUND = 1e-12
# criterion 7
DISORDER_N = (5, 6, 8, 10, 12, 16, 20, 25, 32, 40)
DISORDER_U = 0.05
DISORDER_REALIZATIONS = 20
DISORDER_EXPONENT = (3.0, 0.4)
DISORDER_BASE_SEED = 1000
# criterion 8
UNITARITY_SAMPLES = 1000
UNITARITY_TOL = 1e-10
TRACE_RTOL = 1e-9
CLOSED_FORM_TOL = 1e-12
DUAL_ROUTE_RTOL = 0.01
LORENTZ_FWHM_RTOL = 0.01
MIRROR_TOL = 1e-10


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    checks: Dict[str, bool] = field(default_factory=dict)
    metrics: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [k for k, ok in self.checks.items() if not ok]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"{status} {self.key} {self.title} [{self.seconds:.1f}s]{tail}"


def _within(value, target):
    centre, tol = target
    return bool(abs(value - centre) <= tol)


def _finish(key, title, checks, metrics, t0):
    return CriterionResult(key, title, all(checks.values()), checks, metrics, time.perf_counter() - t0)


def gamma_min(n, d, params):
    return eigendecompose(build_h_eff(uniform_positions(n, d), params)).most_subradiant.decay


def ideal_tolerance(n: int) -> float:
    """10% at N = 10 tightening log-linearly to 2% at N >= 50."""
    if n >= 50:
        return IDEAL_TOL_N50
    if n <= 10:
        return IDEAL_TOL_N10
    w = np.log(n / 10) / np.log(5)
    return float(np.exp((1 - w) * np.log(IDEAL_TOL_N10) + w * np.log(IDEAL_TOL_N50)))


def criterion_1() -> CriterionResult:
    t0 = time.perf_counter()
    num = np.array([gamma_min(n, 0.25, LOSSLESS) for n in IDEAL_N])
    ana = np.array([gamma_ideal(n, 0.25) for n in IDEAL_N])
    dev = np.abs(num / ana - 1)
    gated = [(n, e) for n, e in zip(IDEAL_N, dev) if n >= 10]
    fit = met.fit_power_law(IDEAL_N, num)
    elapsed = time.perf_counter() - t0
    checks = {
        "closed-form agreement": all(e <= ideal_tolerance(n) for n, e in gated),
        "exponent": _within(fit.exponent, IDEAL_EXPONENT),
        "runtime < 60 s": elapsed < 60,
    }
    metrics = {"deviation_N10": float(dev[IDEAL_N.index(10)]),
               "max_deviation_N>=50": float(max(e for n, e in gated if n >= 50)),
               "exponent": fit.exponent}
    return _finish("C1", "ideal-waveguide N^-3 scaling", checks, metrics, t0)


def parity_data(params=LOSSY, d=0.02, ns=PARITY_N):
    num = np.array([gamma_min(n, d, params) for n in ns])
    ana = np.array([gamma_deep_subwavelength(n, d, 1, params) for n in ns])
    return num, ana


def criterion_2() -> CriterionResult:
    t0 = time.perf_counter()
    num, ana = parity_data()
    sign_ok = np.sign(np.diff(num)) == np.sign(np.diff(ana))
    rel = np.abs(num / ana - 1)
    elapsed = time.perf_counter() - t0
    checks = {
        "jump signs": bool(np.all(sign_ok)),
        f"magnitudes within {PARITY_MAG_TOL:.0%}": bool(np.all(rel <= PARITY_MAG_TOL)),
        "runtime < 60 s": elapsed < 60,
    }
    metrics = {"sign_mismatch_at_N": [int(n) for n, ok in zip(PARITY_N[:-1], sign_ok) if not ok],
               "max_relative_deviation": float(rel.max()),
               "median_ratio_numeric_over_formula": float(np.median(num / ana))}
    return _finish("C2", "even/odd parity branches", checks, metrics, t0)


def criterion_3() -> CriterionResult:
    t0 = time.perf_counter()
    checks, metrics = {}, {}
    for n, d, dd, ref in REFERENCE_SHIFTS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            got = spectral_shift(uniform_positions(n, d), LOSSY, -dd).shift
        key = f"N={n} d={d}"
        checks[key] = bool(abs(got / ref - 1) <= SHIFT_RTOL)
        metrics[key] = {"computed": got, "reference": ref}
    checks["runtime < 120 s"] = time.perf_counter() - t0 < 120
    return _finish("C3", "reference spectral shifts", checks, metrics, t0)


@functools.lru_cache(maxsize=None)
def fom_sweep(d: float, ns=FOM_N):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return tuple(met.fom(uniform_positions(n, d), LOSSY) for n in ns)


def criterion_4() -> CriterionResult:
    t0 = time.perf_counter()
    wide = np.array([f.value for f in fom_sweep(0.25)])
    deep = np.array([f.value for f in fom_sweep(0.02)])
    fit_w = met.fit_power_law(FOM_N, wide)
    fit_d = met.fit_power_law_by_parity(FOM_N, deep)
    i = FOM_N.index(FOM_RATIO_N)
    ratio = float(np.log10(deep[i] / wide[i]))
    checks = {"exponent d=0.25": _within(fit_w.exponent, FOM_EXPONENT_WIDE),
              "even-branch exponent d=0.02": _within(fit_d["even"].exponent, FOM_EXPONENT_DEEP),
              "odd-branch exponent d=0.02": _within(fit_d["odd"].exponent, FOM_EXPONENT_DEEP),
              "log10 FOM ratio at N=10": FOM_RATIO_LOG10[0] <= ratio <= FOM_RATIO_LOG10[1]}
    metrics = {"exponent_d0.25": fit_w.exponent, "exponent_even_d0.02": fit_d["even"].exponent,
               "exponent_odd_d0.02": fit_d["odd"].exponent, "log10_ratio_N10": ratio}
    return _finish("C4", "FOM N^3 scaling", checks, metrics, t0)


@functools.lru_cache(maxsize=None)
def fisher_sweep(d: float, ns=FISHER_N):
    out = []
    for n in ns:
        pos = uniform_positions(n, d)
        grid = met.search_grid(pos, LOSSY)
        h = met.derivative_step(pos, LOSSY)
        out.append((met.classical_fi_transmission(pos, LOSSY, grid, step=h),
                    met.quantum_fi_max(pos, LOSSY, grid, step=h)))
    return tuple(out)


def criterion_5() -> CriterionResult:
    t0 = time.perf_counter()
    checks, metrics = {}, {}
    vals = {}
    for d in (0.25, 0.02):
        mt = np.array([a.value for a, _ in fisher_sweep(d)])
        q = np.array([b.value for _, b in fisher_sweep(d)])
        vals[d] = (mt, q)
        for name, v in (("F_MT", mt), ("F_Q", q)):
            fit = met.fit_power_law(FISHER_N, v)
            checks[f"{name} exponent d={d}"] = _within(fit.exponent, FISHER_EXPONENT)
            metrics[f"{name} exponent d={d}"] = fit.exponent
            # reported only: the staggering at small d makes branch fits more informative
            for branch, bfit in met.fit_power_law_by_parity(FISHER_N, v).items():
                metrics[f"{name} exponent d={d} ({branch})"] = bfit.exponent
        checks[f"F_MT <= F_Q d={d}"] = bool(np.all(mt <= q * (1 + 1e-6)))
        metrics[f"F_MT/F_Q d={d}"] = [float(x) for x in mt / q]
    i = FISHER_N.index(FISHER_RATIO_N)
    for k, name in ((0, "F_MT"), (1, "F_Q")):
        ratio = float(np.log10(vals[0.02][k][i] / vals[0.25][k][i]))
        checks[f"log10 {name} ratio at N=10"] = FISHER_RATIO_LOG10[0] <= ratio <= FISHER_RATIO_LOG10[1]
        metrics[f"log10 {name} ratio at N=10"] = ratio
    return _finish("C5", "Fisher-information N^6 scaling", checks, metrics, t0)


def criterion_6() -> CriterionResult:
    t0 = time.perf_counter()
    checks, metrics = {}, {}
    for n, d in CR_CASES:
        pos = uniform_positions(n, d)
        grid = met.search_grid(pos, LOSSY)
        h = met.derivative_step(pos, LOSSY)
        fq = met.quantum_fi_max(pos, LOSSY, grid, step=h).value
        fmt = met.classical_fi_transmission(pos, LOSSY, grid, step=h).value
        dd_q = met.cramer_rao_min_dd(fq, CR_MEASUREMENTS)
        key = f"N={n} d={d}"
        checks[key] = dd_q < CR_BOUND
        metrics[key] = {"F_Q": fq, "F_MT": fmt, "dd_min(F_Q)": dd_q,
                        "dd_min(F_MT)": met.cramer_rao_min_dd(fmt, CR_MEASUREMENTS)}
    checks["runtime < 300 s"] = time.perf_counter() - t0 < 300
    return _finish("C6", "Cramer-Rao resolution table", checks, metrics, t0)


def disorder_ensemble(d: float, ns=DISORDER_N, u=DISORDER_U, count=DISORDER_REALIZATIONS,
                      base_seed=DISORDER_BASE_SEED):
    """FOM of every realization, shape (len(ns), count); NaN marks a lost feature."""
    out = np.full((len(ns), count), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for a, n in enumerate(ns):
            for k in range(count):
                pos = build_positions(LatticeConfig(n, d, u, base_seed + k))
                try:
                    out[a, k] = met.fom(pos, LOSSY).value
                except (RuntimeError, ValueError):
                    pass
    return out


def criterion_7() -> CriterionResult:
    t0 = time.perf_counter()
    wide, deep = disorder_ensemble(0.25), disorder_ensemble(0.02)
    mean_w = np.nanmean(wide, axis=1)
    fit = met.fit_power_law(DISORDER_N, mean_w)
    spread_w = np.nanstd(wide, axis=1) / mean_w
    spread_d = np.nanstd(deep, axis=1) / np.nanmean(deep, axis=1)
    elapsed = time.perf_counter() - t0
    checks = {"ensemble-mean exponent d=0.25": _within(fit.exponent, DISORDER_EXPONENT),
              "spread d=0.02 > d=0.25 at every N": bool(np.all(spread_d > spread_w)),
              "runtime < 600 s": elapsed < 600}
    metrics = {"exponent": fit.exponent,
               "censored": int(np.isnan(wide).sum() + np.isnan(deep).sum()),
               "relative_spread_d0.25": [float(x) for x in spread_w],
               "relative_spread_d0.02": [float(x) for x in spread_d]}
    return _finish("C7", "disorder robustness", checks, metrics, t0)


def lorentzian_trace(center=0.3, width=0.02, depth=0.8, points=4001, span=30.0):
    grid = center + width * np.linspace(-span / 2, span / 2, points)
    y = 1 - depth * (width / 2) ** 2 / ((grid - center) ** 2 + (width / 2) ** 2)
    zeros = np.zeros_like(grid)
    return SpectrumTrace(grid, y, zeros, zeros, np.ones(grid.size, dtype=bool))


def criterion_8(seed: int = 12345) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_unit = worst_res = worst_trace = worst_mirror = 0.0
    for _ in range(UNITARITY_SAMPLES):
        n = int(rng.integers(1, 11))
        d = float(rng.uniform(0.01, 0.45))
        w = float(rng.uniform(-5, 5))
        pos = uniform_positions(n, d)
        t, r = ScatteringModel(pos, LOSSLESS).amplitudes([w])
        worst_unit = max(worst_unit, abs(abs(t[0]) ** 2 + abs(r[0]) ** 2 - 1))
    for _ in range(100):
        n = int(rng.integers(1, 16))
        d = float(rng.uniform(0.01, 0.45))
        params = CouplingParams(float(rng.uniform(0, 0.5)))
        pos = build_positions(LatticeConfig(n, d, float(rng.uniform(0, 0.2)), int(rng.integers(2**32))))
        h = build_h_eff(pos, params)
        modes = eigendecompose(h)
        worst_res = max(worst_res, max(m.residual for m in modes) / h.norm())
        tr = np.trace(h.matrix)
        worst_trace = max(worst_trace, abs(np.sum(modes.eigenvalues) - tr) / abs(tr))
        grid = np.linspace(-5, 5, 41)
        t1, _ = ScatteringModel(pos, params).amplitudes(grid)
        t2, _ = ScatteringModel(pos.reversed(), params).amplitudes(grid)
        worst_mirror = max(worst_mirror, float(np.max(np.abs(np.abs(t1) ** 2 - np.abs(t2) ** 2))))
    vals = np.sort_complex(np.linalg.eigvals(build_h_eff(uniform_positions(2, 0.25), LOSSLESS).matrix))
    closed = np.sort_complex(np.array([-0.5 - 0.5j, 0.5 - 0.5j]))
    closed_err = float(np.max(np.abs(vals - closed)))
    modes2 = eigendecompose(build_h_eff(uniform_positions(2, 0.25), LOSSLESS))
    closed_err = max(closed_err, float(np.max(np.abs(np.sort_complex(modes2.eigenvalues) - closed))))
    route_dev = 0.0
    for d in (0.25, 0.02):
        for a, b in fisher_sweep(d):
            for fv in (a, b):
                route_dev = max(route_dev, abs(fv.value - fv.analytic) / fv.analytic)
    feat = find_subradiant_feature(lorentzian_trace(), CollectiveMode(0.3, 0.02, np.zeros(1), 0.0))
    lor_err = abs(feat.fwhm / 0.02 - 1)
    checks = {"unitarity": worst_unit <= UNITARITY_TOL,
              "eigen residuals": worst_res <= 1e-10,
              "trace identity": worst_trace <= TRACE_RTOL,
              "mirror symmetry": worst_mirror <= MIRROR_TOL,
              "dual-route FI": route_dev <= DUAL_ROUTE_RTOL,
              "N=2 closed form": closed_err <= CLOSED_FORM_TOL,
              "Lorentzian FWHM": lor_err <= LORENTZ_FWHM_RTOL}
    metrics = {"unitarity": worst_unit, "residual/|H|": worst_res, "trace": worst_trace,
               "mirror": worst_mirror, "dual_route": route_dev, "closed_form": closed_err,
               "lorentzian_fwhm": lor_err}
    return _finish("C8", "property suite", checks, metrics, t0)


CRITERIA: Dict[str, Callable[[], CriterionResult]] = {
    "C1": criterion_1, "C2": criterion_2, "C3": criterion_3, "C4": criterion_4,
    "C5": criterion_5, "C6": criterion_6, "C7": criterion_7, "C8": criterion_8,
}


def run_all(keys=None, echo=print) -> List[CriterionResult]:
    results = []
    for key in keys or CRITERIA:
        res = CRITERIA[key]()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
