"""Simulation pipeline, validation checks and CSV/JSON emission."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (SystemParams, correlation_after_pulse,
                       flux_after_pulse, n_tls_one_photon, n_tls_two_photon,
                       propagate_one_photon_sector)
from .config import ExperimentConfig, NumericsConfig, dump_config
from .mps import (CollisionConfig, EvolutionResult, build_input_mps, evolve,
                  save_checkpoint)
from .observables import (CorrelationMatrix, correlation_matrix,
                          spectral_intensity, stationary_spectrum,
                          time_dependent_spectrum)
from .pulse import (PulseShape, PulseSpec, TimeGrid, discrete_envelope_spectrum,
                    discretize, envelope_spectrum)

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

# Tolerances of the validation checks.
POPULATION_TOL = 5e-3
CONSERVATION_TOL = 1e-8
NORM_DRIFT_TOL = 1e-6
FLUX_SUM_TOL = 1e-4
CANCELLATION_TOL = 1e-2
IDENTITY_TOL = 1e-6
CORRELATION_TOL = 2e-2
EXCESS_FWHM_RANGE = (0.5, 2.0)


@dataclass
class Check:
    name: str
    passed: bool
    oracle: float | None = None
    simulated: float | None = None
    tolerance: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        logger.info("%s %s", "PASS" if check.passed else "FAIL", check.name)
        return check

    def extend(self, other: "ValidationReport") -> None:
        self.checks.extend(other.checks)

    def to_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA_VERSION,
                "passed": self.passed,
                "checks": [_jsonable(asdict(c)) for c in self.checks],
                "metadata": _jsonable(self.metadata)}

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class CaseRun:
    """One simulated pulse: engine output plus derived correlations."""

    spec: PulseSpec
    system: SystemParams
    grid: TimeGrid
    f_k: np.ndarray
    collision: CollisionConfig
    evolution: EvolutionResult
    correlation: CorrelationMatrix | None
    wall_time: float
    coupled: bool = True

    @property
    def label(self) -> str:
        return case_label(self.spec)


def case_label(spec: PulseSpec) -> str:
    shape = "" if spec.shape is PulseShape.RECTANGULAR else "gauss_"
    return f"{shape}n{spec.photon_number}_tp{spec.t_p:g}"


def simulate_case(spec: PulseSpec, system: SystemParams,
                  numerics: NumericsConfig | None = None, coupled: bool = True,
                  correlations: bool = True) -> CaseRun:
    """Build the input state, scatter it and (optionally) form the output
    correlation matrix.

    With ``coupled=False`` the emitter coupling is switched off while the
    grid and pulse are left unchanged, giving the free-propagation
    reference.
    """
    numerics = numerics or NumericsConfig()
    start = time.perf_counter()
    grid = TimeGrid.for_pulse(spec, numerics.dt, numerics.tail, system.gamma)
    f_k = discretize(spec, grid)
    cfg = CollisionConfig.from_grid(
        grid, chi_max=numerics.chi_max, svd_tol=numerics.svd_tol,
        bin_cutoff=numerics.cutoff_for(spec.photon_number),
        truncation_budget=numerics.truncation_budget)
    state = build_input_mps(f_k, spec.photon_number, cfg)
    params = system if coupled else replace(system, gamma=0.0)
    evo = evolve(state, params, cfg)
    cm = (correlation_matrix(evo.state, grid.dt, spec.carrier_detuning)
          if correlations else None)
    return CaseRun(spec=spec, system=system, grid=grid, f_k=f_k,
                   collision=cfg, evolution=evo, correlation=cm,
                   wall_time=time.perf_counter() - start, coupled=coupled)


def has_closed_form(spec: PulseSpec, system: SystemParams) -> bool:
    return (spec.shape is PulseShape.RECTANGULAR and system.delta == 0
            and spec.carrier_detuning == 0)


def oracle_population(spec: PulseSpec, system: SystemParams,
                      grid: TimeGrid) -> np.ndarray | None:
    """Independent population reference at the grid edges: the closed form
    where one exists, else the one-photon RK4 propagator, else None."""
    if has_closed_form(spec, system):
        fn = n_tls_one_photon if spec.photon_number == 1 else n_tls_two_photon
        return fn(system, spec.t_p, grid.edges)
    if spec.photon_number == 1:
        return propagate_one_photon_sector(spec, system, grid).population.values
    return None


# -- metrics shared by run() and the acceptance suite -----------------------

def spectral_identity_error(cm: CorrelationMatrix, omega) -> float:
    """Largest relative mismatch among ``int I dt``, ``S(w)`` and
    ``S(w, t_end)`` over the grid."""
    s = stationary_spectrum(cm, omega).values
    s_t = time_dependent_spectrum(cm, omega).values[:, -1]
    i_int = spectral_intensity(cm, omega).values.sum(axis=1) * cm.dt
    scale = np.abs(s) + 1e-12 * np.abs(s).max()
    return float(max(np.max(np.abs(i_int - s) / scale),
                     np.max(np.abs(s_t - s) / scale)))


def cancellation_error(run: CaseRun, omega) -> float:
    """``max |S(w) - |f(w)|^2|`` relative to the input peak."""
    s = stationary_spectrum(run.correlation, omega).values
    ref = envelope_spectrum(run.spec, omega)
    return float(np.max(np.abs(s - ref)) / ref.max())


def post_pulse_correlation_errors(run: CaseRun) -> tuple[float, float]:
    """Maximum relative deviation of the post-pulse correlation block and
    of its diagonal from the closed forms (one photon, rectangular)."""
    cm = run.correlation
    t = cm.times
    idx = np.flatnonzero(t > run.spec.t_p)
    j, k = np.meshgrid(idx, idx, indexing="ij")
    upper = k >= j
    j, k = j[upper], k[upper]
    ana = correlation_after_pulse(run.system, run.spec.t_p, t[j], t[k] - t[j])
    block = float(np.max(np.abs(cm.g[j, k] - ana) / np.abs(ana)))
    flux = flux_after_pulse(run.system, run.spec.t_p, t[idx])
    diag = float(np.max(np.abs(cm.flux[idx] - flux) / flux))
    return block, diag


def central_excess(run: CaseRun, omega) -> tuple[float, float, float]:
    """Transmitted minus input spectrum around the carrier.

    Returns:
        ``(S(w_p), n |f(w_p)|^2, FWHM of the excess peak)``. The FWHM is
        measured on the contiguous region around ``w_p`` where the excess
        exceeds half its central value, with linear interpolation at the
        crossings; it is nan when there is no positive excess.
    """
    omega = np.asarray(omega, dtype=float)
    s = stationary_spectrum(run.correlation, omega).values
    inp = run.spec.photon_number * envelope_spectrum(run.spec, omega)
    i0 = int(np.argmin(np.abs(omega)))
    excess = s - inp
    if excess[i0] <= 0:
        return float(s[i0]), float(inp[i0]), math.nan
    half = excess[i0] / 2

    def crossing(step):
        i = i0
        while 0 <= i + step < len(omega) and excess[i + step] >= half:
            i += step
        if not 0 <= i + step < len(omega):
            return omega[i]
        a, b = excess[i], excess[i + step]
        return omega[i] + (omega[i + step] - omega[i]) * (a - half) / (a - b)

    return float(s[i0]), float(inp[i0]), float(crossing(1) - crossing(-1))


def conservation_metrics(run: CaseRun) -> dict:
    evo = run.evolution
    n = run.spec.photon_number
    return {
        "excitation_spread": float(np.ptp(evo.excitation)),
        "excitation_offset": float(np.max(np.abs(evo.excitation - n))),
        "norm_drift": evo.metadata["norm_drift"],
        "flux_sum": float(evo.output_flux.sum() * evo.dt),
    }


# -- CSV output ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path, columns, rows, config_text: str = "") -> None:
    """Long-form CSV preceded by a ``#`` comment block echoing the config."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# fockwave {__version__}\n")
        for line in config_text.splitlines():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def omega_grid(config: ExperimentConfig) -> np.ndarray:
    obs = config.observables
    return np.linspace(obs.omega_min, obs.omega_max, obs.n_omega)


def _case_cols(spec):
    return (case_label(spec), spec.photon_number, spec.t_p)


def _population_rows(run: CaseRun, oracle):
    evo = run.evolution
    for i, t in enumerate(evo.times):
        ref = oracle[i] if oracle is not None else math.nan
        yield (*_case_cols(run.spec), float(t), float(evo.tls_population[i]),
               float(ref))


def _flux_rows(run: CaseRun):
    evo = run.evolution
    mid = run.grid.midpoints
    closed = (has_closed_form(run.spec, run.system)
              and run.spec.photon_number == 1 and run.coupled)
    for k, t in enumerate(mid):
        ref = (flux_after_pulse(run.system, run.spec.t_p, t)
               if closed and t > run.spec.t_p else math.nan)
        yield (*_case_cols(run.spec), float(t), float(evo.output_flux[k]),
               float(ref))


def _spectrum_rows(run: CaseRun, omega, values):
    inp = run.spec.photon_number * envelope_spectrum(run.spec, omega)
    for w, v, r in zip(omega, values, inp):
        yield (*_case_cols(run.spec), float(w), float(v), float(r))


def _dynamical_rows(run: CaseRun, surfaces):
    for surf in surfaces:
        for it, t in enumerate(surf.times):
            for iw, w in enumerate(surf.omega):
                yield (*_case_cols(run.spec), float(w), float(t),
                       float(surf.values[iw, it]), surf.kind.value)


CASE_COLUMNS = ["case", "photon_number", "t_p"]


def case_checks(run: CaseRun, omega, oracle) -> ValidationReport:
    """Validation checks applicable to one coupled case."""
    rep = ValidationReport()
    lab = run.label
    spec, evo = run.spec, run.evolution
    n = spec.photon_number
    if oracle is not None:
        err = float(np.max(np.abs(evo.tls_population - oracle)))
        rep.add(Check(f"{lab}/population_vs_oracle", err < POPULATION_TOL,
                      oracle=float(oracle.max()),
                      simulated=float(evo.tls_population.max()),
                      tolerance=POPULATION_TOL,
                      detail=f"max abs error {err:.3e}"))
    m = conservation_metrics(run)
    rep.add(Check(f"{lab}/excitation_conservation",
                  m["excitation_offset"] < CONSERVATION_TOL, oracle=float(n),
                  simulated=float(evo.excitation[-1]),
                  tolerance=CONSERVATION_TOL,
                  detail=f"max |N - n| {m['excitation_offset']:.3e}"))
    rep.add(Check(f"{lab}/norm_drift", m["norm_drift"] < NORM_DRIFT_TOL,
                  oracle=0.0, simulated=m["norm_drift"],
                  tolerance=NORM_DRIFT_TOL))
    rep.add(Check(f"{lab}/flux_sum_rule",
                  abs(m["flux_sum"] - n) < FLUX_SUM_TOL, oracle=float(n),
                  simulated=m["flux_sum"], tolerance=FLUX_SUM_TOL))
    rep.add(Check(f"{lab}/truncation_budget", evo.within_budget,
                  oracle=run.collision.truncation_budget,
                  simulated=evo.truncation_error))
    if run.correlation is None:
        return rep
    ident = spectral_identity_error(run.correlation, omega)
    rep.add(Check(f"{lab}/spectral_identity", ident < IDENTITY_TOL,
                  oracle=0.0, simulated=ident, tolerance=IDENTITY_TOL,
                  detail="int I dt = S(w) = S(w, t_end), relative"))
    if n == 1:
        err = cancellation_error(run, omega)
        rep.add(Check(f"{lab}/one_photon_cancellation",
                      err < CANCELLATION_TOL, oracle=0.0, simulated=err,
                      tolerance=CANCELLATION_TOL,
                      detail="max |S - |f|^2| / max |f|^2"))
        if has_closed_form(spec, run.system):
            block, diag = post_pulse_correlation_errors(run)
            rep.add(Check(f"{lab}/two_time_correlation",
                          block < CORRELATION_TOL and diag < CORRELATION_TOL,
                          oracle=0.0, simulated=max(block, diag),
                          tolerance=CORRELATION_TOL,
                          detail=f"block {block:.3e}, diagonal {diag:.3e}"))
    else:
        s0, in0, fwhm = central_excess(run, omega)
        lo, hi = EXCESS_FWHM_RANGE
        ok = s0 > in0 and lo <= fwhm <= hi
        rep.add(Check(f"{lab}/two_photon_central_excess", ok, oracle=in0,
                      simulated=s0, tolerance=None,
                      detail=f"excess FWHM {fwhm:.3f} (need [{lo}, {hi}])"))
    return rep


@dataclass
class RunOutcome:
    report: ValidationReport
    files: list
    runs: list


def run(config: ExperimentConfig, out_dir=None) -> RunOutcome:
    """Simulate every case of ``config``, write artifacts and a report.

    The report is written even when checks fail.
    """
    out = Path(out_dir or config.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    wanted = set(config.outputs.artifacts)
    text = dump_config(config)
    omega = omega_grid(config)
    stride = config.observables.time_stride
    report = ValidationReport(metadata=_run_metadata(config))
    rows = {name: [] for name in ("population", "flux", "input_spectrum",
                                  "stationary_spectrum", "dynamical_spectrum")}
    runs = []
    for spec in config.cases():
        logger.info("simulating %s", case_label(spec))
        need_corr = bool(wanted & {"stationary_spectrum",
                                   "dynamical_spectrum", "report"})
        r = simulate_case(spec, config.system, config.numerics,
                          correlations=need_corr)
        runs.append(r)
        oracle = oracle_population(spec, config.system, r.grid)
        report.extend(case_checks(r, omega, oracle))
        report.metadata["cases"][r.label] = {
            "n_bins": r.grid.n_bins, "dt": r.grid.dt,
            "max_bond": r.evolution.max_bond,
            "truncation_error": r.evolution.truncation_error,
            "wall_time_s": r.wall_time,
            "tail_ratio": (r.correlation.tail_ratio()
                           if r.correlation is not None else None)}
        rows["population"] += _population_rows(r, oracle)
        rows["flux"] += _flux_rows(r)
        env = envelope_spectrum(spec, omega)
        rows["input_spectrum"] += [
            (*_case_cols(spec), float(w), float(e),
             float(spec.photon_number * e)) for w, e in zip(omega, env)]
        if r.correlation is not None:
            s = stationary_spectrum(r.correlation, omega)
            rows["stationary_spectrum"] += _spectrum_rows(r, omega, s.values)
            if "dynamical_spectrum" in wanted:
                surfaces = (time_dependent_spectrum(r.correlation, omega,
                                                    stride),
                            spectral_intensity(r.correlation, omega, stride))
                rows["dynamical_spectrum"] += _dynamical_rows(r, surfaces)
        if config.outputs.checkpoint:
            save_checkpoint(r.evolution.state, out / f"state_{r.label}.mps")

    columns = {
        "population": CASE_COLUMNS + ["t", "n_mps", "n_analytic"],
        "flux": CASE_COLUMNS + ["t", "flux_mps", "flux_analytic"],
        "input_spectrum": CASE_COLUMNS + ["omega", "envelope_spectrum",
                                          "input_spectrum"],
        "stationary_spectrum": CASE_COLUMNS + ["omega", "S", "input_spectrum"],
        "dynamical_spectrum": CASE_COLUMNS + ["omega", "t", "value", "kind"],
    }
    files = []
    for name, cols in columns.items():
        if name in wanted:
            path = out / f"{name}.csv"
            write_csv(path, cols, rows[name], text)
            files.append(path)
    path = out / "report.json"
    report.write(path)
    files.append(path)
    return RunOutcome(report=report, files=files, runs=runs)


def _run_metadata(config: ExperimentConfig) -> dict:
    meta = {"version": __version__, "config": dump_config(config),
            "cases": {},
            "notes": {
                "omega_window": "default +-10 gamma window is a desk choice",
                "spectra_normalization": "two-sided, S = 2 Re[...]"}}
    if any(s.shape is PulseShape.GAUSSIAN for s in config.cases()):
        meta["notes"]["gaussian_width"] = (
            "t_p is the amplitude standard deviation sigma; centre 5 sigma, "
            "window [0, 10 sigma] (desk convention)")
    return meta


SWEEP_AXES = {"dt": "dt", "chi": "chi_max", "chi_max": "chi_max",
              "cutoff": "bin_cutoff", "bin_cutoff": "bin_cutoff"}


def sweep_convergence(config: ExperimentConfig, axis: str, values,
                      out_dir=None) -> list[dict]:
    """Rerun the first case of ``config`` for each setting along ``axis``.

    The error metric is the maximum absolute deviation of the emitter
    population from the independent oracle.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    field_name = SWEEP_AXES[axis]
    values = list(values)
    diffs = np.diff(values)
    if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("sweep values must be strictly monotone")
    spec = config.cases()[0]
    rows = []
    for v in values:
        v = float(v) if field_name == "dt" else int(v)
        numerics = replace(config.numerics, **{field_name: v})
        r = simulate_case(spec, config.system, numerics, correlations=False)
        oracle = oracle_population(spec, config.system, r.grid)
        if oracle is None:
            raise ValueError(f"no population oracle for {case_label(spec)}")
        err = float(np.max(np.abs(r.evolution.tls_population - oracle)))
        rows.append({"setting": v, "error": err,
                     "max_bond": r.evolution.max_bond,
                     "truncation_error": r.evolution.truncation_error,
                     "wall_time": r.wall_time})
        logger.info("%s=%s error=%.3e", field_name, v, err)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        # wall time is kept out of the CSV so reruns are byte-identical
        write_csv(out / f"sweep_{field_name}.csv",
                  [field_name, "error", "max_bond", "truncation_error"],
                  [(r["setting"], r["error"], r["max_bond"],
                    r["truncation_error"]) for r in rows],
                  dump_config(config))
    return rows


def no_tls_checks(ref: CaseRun, omega) -> ValidationReport:
    """Sanity checks on a decoupled reference run."""
    rep = ValidationReport()
    lab = f"{ref.label}/no_tls"
    pop = float(np.max(np.abs(ref.evolution.tls_population)))
    rep.add(Check(f"{lab}/population_zero", pop == 0.0, oracle=0.0,
                  simulated=pop, tolerance=0.0))
    s = stationary_spectrum(ref.correlation, omega).values
    exact = ref.spec.photon_number * discrete_envelope_spectrum(
        ref.f_k, ref.grid.dt, omega, ref.spec.carrier_detuning)
    err = float(np.max(np.abs(s - exact)) / exact.max())
    rep.add(Check(f"{lab}/input_spectrum", err < IDENTITY_TOL, oracle=0.0,
                  simulated=err, tolerance=IDENTITY_TOL,
                  detail="max |S - input| / max input, binned pulse"))
    surf = time_dependent_spectrum(ref.correlation, omega).values
    smin, smax = float(surf.min()), float(surf.max())
    rep.add(Check(f"{lab}/negative_time_dependent_spectrum",
                  smin < -1e-10 * smax, oracle=None, simulated=smin,
                  tolerance=-1e-10 * smax,
                  detail=f"min S(w,t) = {smin:.3e}, max = {smax:.3e}"))
    return rep


def compare_no_tls(config: ExperimentConfig, out_dir=None) -> RunOutcome:
    """Run every case with and without the emitter and write side-by-side
    CSVs for the reference panels."""
    out = Path(out_dir or config.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    text = dump_config(config)
    omega = omega_grid(config)
    stride = config.observables.time_stride
    report = ValidationReport(metadata=_run_metadata(config))
    pop_rows, spec_rows, dyn_rows = [], [], []
    runs = []
    for spec in config.cases():
        with_tls = simulate_case(spec, config.system, config.numerics)
        ref = simulate_case(spec, config.system, config.numerics,
                            coupled=False)
        runs += [with_tls, ref]
        report.extend(no_tls_checks(ref, omega))
        cols = _case_cols(spec)
        for t, a, b in zip(with_tls.evolution.times,
                           with_tls.evolution.tls_population,
                           ref.evolution.tls_population):
            pop_rows.append((*cols, float(t), float(a), float(b)))
        s_a = stationary_spectrum(with_tls.correlation, omega).values
        s_b = stationary_spectrum(ref.correlation, omega).values
        inp = spec.photon_number * envelope_spectrum(spec, omega)
        for row in zip(omega, s_a, s_b, inp):
            spec_rows.append((*cols, *map(float, row)))
        for fn in (time_dependent_spectrum, spectral_intensity):
            a = fn(with_tls.correlation, omega, stride)
            b = fn(ref.correlation, omega, stride)
            for it, t in enumerate(a.times):
                for iw, w in enumerate(omega):
                    dyn_rows.append((*cols, float(w), float(t),
                                     float(a.values[iw, it]),
                                     float(b.values[iw, it]), a.kind.value))
    files = [out / "population_no_tls.csv", out / "stationary_spectrum_no_tls.csv",
             out / "dynamical_spectrum_no_tls.csv"]
    write_csv(files[0], CASE_COLUMNS + ["t", "n_tls", "n_no_tls"], pop_rows,
              text)
    write_csv(files[1], CASE_COLUMNS + ["omega", "S_tls", "S_no_tls",
                                        "input_spectrum"], spec_rows, text)
    write_csv(files[2], CASE_COLUMNS + ["omega", "t", "value_tls",
                                        "value_no_tls", "kind"], dyn_rows,
              text)
    path = out / "report_no_tls.json"
    report.write(path)
    files.append(path)
    return RunOutcome(report=report, files=files, runs=runs)
