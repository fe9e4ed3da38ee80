"""Experiment runners: one row task per (spacing, N, ...) merged in a fixed order."""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence

import numpy as np

from .. import metrology as met
from ..hamiltonian import CouplingParams, build_h_eff
from ..lattice import LatticeConfig, build_positions, uniform_positions
from ..scattering import (FeatureNotFoundError, GridTooNarrowError, feature_grid, feature_mode,
                          measure_feature, spectrum)
from ..spectral import EigensolverError, eigendecompose, gamma_deep_subwavelength, gamma_ideal
from .config import ExperimentConfig
from .table import ResultTable

log = logging.getLogger(__name__)

NAN = float("nan")
LOST_FEATURE = (FeatureNotFoundError, GridTooNarrowError)


@dataclass
class ExperimentResult:
    kind: str
    tables: Dict[str, ResultTable]  # file stem -> table
    summary: Dict[str, Any] = field(default_factory=dict)


def _star(job):
    fn, args = job
    return fn(*args)


def parallel_map(fn: Callable, tasks: Sequence[tuple], jobs: int = 1) -> list:
    """``[fn(*t) for t in tasks]``, optionally across processes; order is always kept."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) < 2:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_star, [(fn, t) for t in tasks], chunksize=1))


def _params(cfg: ExperimentConfig, gamma_fs: float) -> CouplingParams:
    return CouplingParams(gamma_fs, cfg.physics.gamma_1d, cfg.physics.omega0)


def _fits(ns, values) -> Dict[str, Any]:
    ns = np.asarray(ns)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values) & (values > 0)
    out: Dict[str, Any] = {}
    for name, mask in (("all", ok), ("even", ok & (ns % 2 == 0)), ("odd", ok & (ns % 2 == 1))):
        if mask.sum() >= 5:
            f = met.fit_power_law(ns[mask], values[mask])
            out[name] = {"exponent": f.exponent, "prefactor": f.prefactor, "r_squared": f.r_squared}
    return out


# --- decay scaling ---------------------------------------------------------

DECAY_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("n_atoms", "count"),
                 ("gamma_min", "Gamma_1D"), ("shift_min", "Gamma_1D"),
                 ("gamma_eq_ideal", "Gamma_1D"), ("gamma_eq_deep", "Gamma_1D"),
                 ("rel_dev_ideal", "1"), ("rel_dev_deep", "1"), ("status", "text"))


def decay_row(n: int, spacing: float, params: CouplingParams) -> Dict[str, Any]:
    row = {"gamma_fs": params.gamma_fs, "spacing": spacing, "n_atoms": n,
           "gamma_min": NAN, "shift_min": NAN, "gamma_eq_ideal": NAN, "gamma_eq_deep": NAN,
           "rel_dev_ideal": NAN, "rel_dev_deep": NAN, "status": "ok"}
    try:
        mode = eigendecompose(build_h_eff(uniform_positions(n, spacing), params)).most_subradiant
        row["gamma_min"], row["shift_min"] = mode.decay, mode.shift
    except EigensolverError as exc:
        row["status"] = "eigensolver_error"
        log.warning("N=%d d=%g: %s", n, spacing, exc)
    if n >= 2:
        row["gamma_eq_ideal"] = gamma_ideal(n, spacing, gamma_1d=params.gamma_1d)
        if spacing <= 0.1:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                row["gamma_eq_deep"] = gamma_deep_subwavelength(n, spacing, 1, params)
    for key, ref in (("rel_dev_ideal", "gamma_eq_ideal"), ("rel_dev_deep", "gamma_eq_deep")):
        row[key] = row["gamma_min"] / row[ref] - 1 if row[ref] > 0 else NAN
    return row


def decay_stem(gamma_fs: float, nonzero: Sequence[float]) -> str:
    if gamma_fs == 0:
        return "fig1b"
    return "fig1c" if len(nonzero) == 1 else f"fig1c_gamma{gamma_fs:g}"


def run_decay_scaling(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Numeric Gamma_min against both closed forms; one table per free-space rate."""
    tasks = [(n, d, _params(cfg, g)) for g in cfg.physics.gamma_fs
             for d in cfg.physics.spacing for n in cfg.sweep.n_atoms]
    rows = parallel_map(decay_row, tasks, jobs)
    nonzero = [g for g in cfg.physics.gamma_fs if g != 0]
    tables: Dict[str, ResultTable] = {}
    summary: Dict[str, Any] = {"fits": {}, "failed_rows": 0}
    for g in cfg.physics.gamma_fs:
        stem = decay_stem(g, nonzero)
        table = tables.setdefault(stem, ResultTable(DECAY_COLUMNS))
        for d in cfg.physics.spacing:
            sel = [r for r in rows if r["gamma_fs"] == g and r["spacing"] == d]
            table.extend(sel)
            good = [r for r in sel if r["status"] == "ok"]
            summary["failed_rows"] += len(sel) - len(good)
            fit = _fits([r["n_atoms"] for r in good], [r["gamma_min"] for r in good])
            dev = {k: float(np.nanmedian(np.abs([r[k] for r in good])))
                   if any(np.isfinite(r[k]) for r in good) else None
                   for k in ("rel_dev_ideal", "rel_dev_deep")}
            summary["fits"][f"gamma_fs={g:g} spacing={d:g}"] = {"gamma_min": fit,
                                                                 "median_abs_rel_dev": dev}
    return ExperimentResult(cfg.kind, tables, summary)


# --- spectra and shifts ----------------------------------------------------

SPECTRUM_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("n_atoms", "count"),
                    ("detuning", "Gamma_1D"), ("transmission", "1"), ("reflection", "1"),
                    ("loss", "1"), ("valid", "bool"))


def _trace_rows(trace, n, spacing, gamma_fs) -> List[Dict[str, Any]]:
    return [{"gamma_fs": gamma_fs, "spacing": spacing, "n_atoms": n, "detuning": w,
             "transmission": t, "reflection": r, "loss": l, "valid": bool(v)}
            for w, t, r, l, v in zip(trace.grid, trace.transmission, trace.reflection,
                                     trace.loss, trace.valid)]


def spectrum_rows(n: int, spacing: float, params: CouplingParams, grid_spec, policy: str,
                  window: float, points: int) -> List[Dict[str, Any]]:
    pos = uniform_positions(n, spacing)
    if grid_spec is None:
        mode = feature_mode(eigendecompose(build_h_eff(pos, params)), policy)
        grid = feature_grid(mode, window, points)
    else:
        grid = np.linspace(grid_spec.start, grid_spec.stop, grid_spec.points)
    return _trace_rows(spectrum(pos, params, grid), n, spacing, params.gamma_fs)


def run_spectrum(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    sw = cfg.sweep
    tasks = [(n, d, _params(cfg, g), sw.detuning, sw.policy, sw.window, sw.points)
             for g in cfg.physics.gamma_fs for d in cfg.physics.spacing for n in sw.n_atoms]
    table = ResultTable(SPECTRUM_COLUMNS)
    for rows in parallel_map(spectrum_rows, tasks, jobs):
        table.extend(rows)
    return ExperimentResult(cfg.kind, {"spectrum": table})


SHIFT_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("delta_d", "lambda"),
                 ("n_atoms", "count"), ("kind", "text"), ("center", "Gamma_1D"),
                 ("center_perturbed", "Gamma_1D"), ("shift", "Gamma_1D"),
                 ("fwhm", "Gamma_1D"), ("fwhm_perturbed", "Gamma_1D"))
PAIRED_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("n_atoms", "count"),
                  ("detuning", "Gamma_1D"), ("transmission", "1"),
                  ("transmission_perturbed", "1"))


def shift_rows(n: int, spacing: float, delta_d: float, params: CouplingParams, policy: str,
               window: float, points: int):
    """Feature shift for d -> d - delta_d plus both spectra on the unperturbed window."""
    pos = uniform_positions(n, spacing)
    moved = pos.at_spacing(spacing - delta_d)
    mode = feature_mode(eigendecompose(build_h_eff(pos, params)), policy)
    f0 = measure_feature(pos, params, mode, policy, points, window)
    f1 = measure_feature(moved, params, policy=policy, points=points, window=window)
    row = {"gamma_fs": params.gamma_fs, "spacing": spacing, "delta_d": delta_d, "n_atoms": n,
           "kind": f0.kind, "center": f0.center, "center_perturbed": f1.center,
           "shift": abs(f1.center - f0.center), "fwhm": f0.fwhm, "fwhm_perturbed": f1.fwhm}
    grid = feature_grid(mode, window, points)
    a, b = spectrum(pos, params, grid), spectrum(moved, params, grid)
    paired = [{"gamma_fs": params.gamma_fs, "spacing": spacing, "n_atoms": n, "detuning": w,
               "transmission": t0, "transmission_perturbed": t1}
              for w, t0, t1 in zip(grid, a.transmission, b.transmission)]
    return row, paired


def run_shift_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    sw = cfg.sweep
    tasks = [(n, d, dd, _params(cfg, g), sw.policy, sw.window, sw.points)
             for g in cfg.physics.gamma_fs
             for d, dd in zip(cfg.physics.spacing, sw.delta_d) for n in sw.n_atoms]
    shifts, paired = ResultTable(SHIFT_COLUMNS), ResultTable(PAIRED_COLUMNS)
    for row, trace in parallel_map(shift_rows, tasks, jobs):
        shifts.append(row)
        paired.extend(trace)
    return ExperimentResult(cfg.kind, {"shifts": shifts, "shift_spectra": paired})


# --- figure of merit and disorder -----------------------------------------

FOM_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("n_atoms", "count"),
               ("kind", "text"), ("center", "Gamma_1D"), ("fwhm", "Gamma_1D"),
               ("slope", "Gamma_1D/lambda"), ("fom", "1/lambda"), ("step", "lambda"),
               ("converged", "bool"))


def _fom_fields(res) -> Dict[str, Any]:
    return {"kind": res.feature.kind, "center": res.feature.center, "fwhm": res.fwhm,
            "slope": res.slope, "fom": res.value, "step": res.step, "converged": res.converged}


def fom_row(n: int, spacing: float, params: CouplingParams, policy: str) -> Dict[str, Any]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", met.DerivativeWarning)
        res = met.fom(uniform_positions(n, spacing), params, policy)
    return {"gamma_fs": params.gamma_fs, "spacing": spacing, "n_atoms": n, **_fom_fields(res)}


def run_fom_sweep(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    tasks = [(n, d, _params(cfg, g), cfg.sweep.policy) for g in cfg.physics.gamma_fs
             for d in cfg.physics.spacing for n in cfg.sweep.n_atoms]
    table = ResultTable(FOM_COLUMNS)
    table.extend(parallel_map(fom_row, tasks, jobs))
    summary = {"fits": {}, "unconverged_rows": sum(1 for c in table.column("converged") if not c)}
    for g in cfg.physics.gamma_fs:
        for d in cfg.physics.spacing:
            sel = [r for r in table.rows if r[0] == g and r[1] == d]
            summary["fits"][f"gamma_fs={g:g} spacing={d:g}"] = _fits(
                [r[2] for r in sel], [r[table.names.index("fom")] for r in sel])
    return ExperimentResult(cfg.kind, {"fom": table}, summary)


REALIZATION_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"),
                       ("disorder_amplitude", "spacing"), ("n_atoms", "count"),
                       ("realization", "index"), ("seed", "u64"), ("status", "text"),
                       ("kind", "text"), ("center", "Gamma_1D"), ("fwhm", "Gamma_1D"),
                       ("slope", "Gamma_1D/lambda"), ("fom", "1/lambda"), ("step", "lambda"),
                       ("converged", "bool"))
ENSEMBLE_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"),
                    ("disorder_amplitude", "spacing"), ("n_atoms", "count"),
                    ("realizations", "count"), ("censored", "count"), ("fom_mean", "1/lambda"),
                    ("fom_std", "1/lambda"), ("fom_min", "1/lambda"), ("fom_max", "1/lambda"),
                    ("relative_spread", "1"))


def disorder_row(n: int, spacing: float, amplitude: float, index: int, seed: int,
                 params: CouplingParams, policy: str) -> Dict[str, Any]:
    row = {"gamma_fs": params.gamma_fs, "spacing": spacing, "disorder_amplitude": amplitude,
           "n_atoms": n, "realization": index, "seed": seed, "status": "ok", "kind": "",
           "center": NAN, "fwhm": NAN, "slope": NAN, "fom": NAN, "step": NAN, "converged": False}
    pos = build_positions(LatticeConfig(n, spacing, amplitude, seed))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", met.DerivativeWarning)
            row.update(_fom_fields(met.fom(pos, params, policy)))
    except LOST_FEATURE as exc:
        row["status"] = "censored"
        log.info("N=%d d=%g seed=%d censored: %s", n, spacing, seed, exc)
    return row


def ensemble_stats(foms: Sequence[float]) -> Dict[str, float]:
    v = np.asarray(foms, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"fom_mean": NAN, "fom_std": NAN, "fom_min": NAN, "fom_max": NAN,
                "relative_spread": NAN}
    mean, std = float(v.mean()), float(v.std())
    return {"fom_mean": mean, "fom_std": std, "fom_min": float(v.min()), "fom_max": float(v.max()),
            "relative_spread": std / mean}


def run_disorder_ensemble(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """FOM for seeds base_seed + k; lost features are kept as censored rows."""
    dis = cfg.disorder
    tasks = [(n, d, dis.amplitude, k, dis.base_seed + k, _params(cfg, g), cfg.sweep.policy)
             for g in cfg.physics.gamma_fs for d in cfg.physics.spacing
             for n in cfg.sweep.n_atoms for k in range(dis.realizations)]
    rows = parallel_map(disorder_row, tasks, jobs)
    per_real = ResultTable(REALIZATION_COLUMNS)
    per_real.extend(rows)
    ensemble = ResultTable(ENSEMBLE_COLUMNS)
    summary: Dict[str, Any] = {"censored": sum(r["status"] != "ok" for r in rows), "fits": {}}
    for g in cfg.physics.gamma_fs:
        for d in cfg.physics.spacing:
            means = []
            for n in cfg.sweep.n_atoms:
                sel = [r for r in rows if r["gamma_fs"] == g and r["spacing"] == d and r["n_atoms"] == n]
                stats = ensemble_stats([r["fom"] for r in sel])
                means.append(stats["fom_mean"])
                ensemble.append({"gamma_fs": g, "spacing": d, "disorder_amplitude": dis.amplitude,
                                 "n_atoms": n, "realizations": len(sel),
                                 "censored": sum(r["status"] != "ok" for r in sel), **stats})
            summary["fits"][f"gamma_fs={g:g} spacing={d:g}"] = _fits(cfg.sweep.n_atoms, means)
    return ExperimentResult(cfg.kind, {"disorder_realizations": per_real,
                                       "disorder_ensemble": ensemble}, summary)


# --- Fisher information ----------------------------------------------------

FISHER_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("n_atoms", "count"),
                  ("f_mt", "1/lambda^2"), ("f_mt_detuning", "Gamma_1D"),
                  ("f_mt_analytic", "1/lambda^2"), ("f_q", "1/lambda^2"),
                  ("f_q_detuning", "Gamma_1D"), ("f_q_analytic", "1/lambda^2"),
                  ("f_mt_over_f_q", "1"), ("step", "lambda"), ("converged", "bool"))


def fisher_row(n: int, spacing: float, params: CouplingParams, policy: str, points: int,
               coarse_points: int) -> Dict[str, Any]:
    pos = uniform_positions(n, spacing)
    grid = met.search_grid(pos, params, policy, points, coarse_points)
    h = met.derivative_step(pos, params, policy=policy)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", met.DerivativeWarning)
        mt = met.classical_fi_transmission(pos, params, grid, policy, h)
        q = met.quantum_fi_max(pos, params, grid, policy, h)
    return {"gamma_fs": params.gamma_fs, "spacing": spacing, "n_atoms": n,
            "f_mt": mt.value, "f_mt_detuning": mt.detuning, "f_mt_analytic": mt.analytic,
            "f_q": q.value, "f_q_detuning": q.detuning, "f_q_analytic": q.analytic,
            "f_mt_over_f_q": mt.value / q.value, "step": h,
            "converged": mt.converged and q.converged}


def _fisher_tasks(cfg: ExperimentConfig, ns):
    sw = cfg.sweep
    return [(n, d, _params(cfg, g), sw.policy, sw.points, sw.coarse_points)
            for g in cfg.physics.gamma_fs for d in cfg.physics.spacing for n in ns]


def run_fisher_sweep(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    table = ResultTable(FISHER_COLUMNS)
    table.extend(parallel_map(fisher_row, _fisher_tasks(cfg, cfg.sweep.n_atoms), jobs))
    summary: Dict[str, Any] = {"fits": {}}
    names = table.names
    for g in cfg.physics.gamma_fs:
        for d in cfg.physics.spacing:
            sel = [r for r in table.rows if r[0] == g and r[1] == d]
            ns = [r[2] for r in sel]
            summary["fits"][f"gamma_fs={g:g} spacing={d:g}"] = {
                k: _fits(ns, [r[names.index(k)] for r in sel]) for k in ("f_mt", "f_q")}
    return ExperimentResult(cfg.kind, {"fisher": table}, summary)


RESOLVE_COLUMNS = (("gamma_fs", "Gamma_1D"), ("spacing", "lambda"), ("n_atoms", "count"),
                   ("m_measurements", "count"), ("f_q", "1/lambda^2"), ("f_mt", "1/lambda^2"),
                   ("dd_min_quantum", "lambda"), ("dd_min_transmission", "lambda"),
                   ("converged", "bool"))


def run_resolve_dd(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Cramer-Rao bound 1/sqrt(M F) from both Fisher informations."""
    m = cfg.sweep.m_measurements
    table = ResultTable(RESOLVE_COLUMNS)
    for r in parallel_map(fisher_row, _fisher_tasks(cfg, cfg.sweep.n_atoms), jobs):
        table.append({"gamma_fs": r["gamma_fs"], "spacing": r["spacing"], "n_atoms": r["n_atoms"],
                      "m_measurements": m, "f_q": r["f_q"], "f_mt": r["f_mt"],
                      "dd_min_quantum": met.cramer_rao_min_dd(r["f_q"], m),
                      "dd_min_transmission": met.cramer_rao_min_dd(r["f_mt"], m),
                      "converged": r["converged"]})
    return ExperimentResult(cfg.kind, {"resolve_dd": table})


RUNNERS: Dict[str, Callable[..., ExperimentResult]] = {
    "decay_scaling": run_decay_scaling,
    "spectrum": run_spectrum,
    "shift": run_shift_experiment,
    "fom_sweep": run_fom_sweep,
    "fisher_sweep": run_fisher_sweep,
    "disorder_ensemble": run_disorder_ensemble,
    "resolve_dd": run_resolve_dd,
}


def run(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg, jobs)
