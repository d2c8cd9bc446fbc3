"""Scripted experiments: each writes its CSVs, a report JSON and returns a verdict."""

from __future__ import annotations

import json
import logging
import math
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .. import data
from ..degiorgi import DeGiorgiConfig, iterate, t_star_scaling, trajectory_c0
from ..functionals import moment
from ..grid import GridSpec, write_snapshot
from ..inequalities import TestFamily, estimate_C_of_eps
from ..solver import SolverConfig, SolverError, config_dict, format_float, run, transport_coefficients, write_diagnostics_csv
from ..coefficients import estimate_K0
from .config import ExperimentConfig, SCENARIOS
from .fits import fit_appearance_rate, fit_moment_growth, plateau_bound, series_M
from .selftest import lorentz_selftest, write_selftest_csv

log = logging.getLogger(__name__)


class ScenarioError(RuntimeError):
    pass


@dataclass
class ScenarioResult:
    scenario: str
    out_dir: str
    passed: bool
    report: Dict[str, Any] = field(default_factory=dict)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_csv(path, header: List[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# shared pieces


def grid_of(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(**cfg.block("grid"))


def solver_of(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(**cfg.block("solver"))


def datum_of(cfg: ExperimentConfig, spec: GridSpec) -> np.ndarray:
    ini = cfg.block("initial")
    params = {k: (tuple(v) if isinstance(v, list) else v) for k, v in ini.get("params", {}).items()}
    try:
        return data.make_datum(spec, ini["name"], **params)
    except TypeError as exc:
        raise ScenarioError(f"initial.params: {exc}") from exc


def initial_K0(spec: GridSpec, f, gamma: float) -> float:
    return estimate_K0(spec, transport_coefficients(spec, f, gamma), gamma)


CHECKPOINT = "checkpoint.pkl"


def _fingerprint(cfg: ExperimentConfig) -> Dict[str, Any]:
    raw = {k: v for k, v in cfg.raw.items() if k not in ("restart_from", "output", "checkpoint_every", "save_snapshots")}
    return json.loads(json.dumps(raw, sort_keys=True))


def solve(cfg: ExperimentConfig, out: Path):
    """Run the solver with checkpointing; resume when the config names a checkpoint."""
    spec, scfg = grid_of(cfg), solver_of(cfg)
    every = int(cfg.raw.get("checkpoint_every", 0))
    resume = None
    if cfg.raw.get("restart_from"):
        path = Path(cfg.raw["restart_from"])
        if not path.exists():
            raise ScenarioError(f"restart_from: {path} does not exist")
        with open(path, "rb") as fh:
            saved = pickle.load(fh)
        if saved["config"] != _fingerprint(cfg):
            raise ScenarioError("restart_from: checkpoint was written by a different config")
        resume = (saved["trajectory"], saved["state"])
        f_in = saved["trajectory"].snapshots[0]
    else:
        f_in = datum_of(cfg, spec)

    def checkpoint(traj, state):
        tmp = out / (CHECKPOINT + ".tmp")
        with open(tmp, "wb") as fh:
            pickle.dump({"config": _fingerprint(cfg), "trajectory": traj, "state": state}, fh, protocol=4)
        os.replace(tmp, out / CHECKPOINT)

    try:
        traj = run(spec, f_in, scfg, resume=resume, checkpoint=checkpoint if every else None, checkpoint_every=every)
    except SolverError as exc:
        if exc.trajectory is not None:
            with open(out / CHECKPOINT, "wb") as fh:
                pickle.dump({"config": _fingerprint(cfg), "trajectory": exc.trajectory, "state": None}, fh, protocol=4)
        raise
    write_diagnostics_csv(traj, out / "diagnostics.csv")
    if cfg.raw.get("save_snapshots", True):
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for k, (t, f) in enumerate(zip(traj.times, traj.snapshots)):
            write_snapshot(snap / f"f_{k:05d}.bin", spec, f, time=t)
    return traj


def _c0_or_none(traj) -> Optional[float]:
    try:
        return trajectory_c0(traj)
    except ValueError:
        return None


def _base_report(cfg: ExperimentConfig, K0, c0) -> Dict[str, Any]:
    return {"scenario": cfg.scenario, "config": cfg.raw, "K0": K0, "c0": c0, "seed": cfg.seed}


# ---------------------------------------------------------------------------
# scenarios


def scenario_run(cfg, out, strict: bool = False) -> ScenarioResult:
    traj = solve(cfg, out)
    drift = traj.drift_report()
    rep = _base_report(cfg, float(np.min(traj.column("k0"))), _c0_or_none(traj))
    rep["solver"] = config_dict(traj.config)
    rep["drift"] = drift
    passed = True
    if strict:
        tol = {"mass_tol": 1e-12, "momentum_energy_tol": 1e-4, "entropy_rate_tol": 1e-6, **cfg.block("conservation")}
        checks = {
            "mass": drift["mass_drift"] <= tol["mass_tol"],
            "momentum": drift["momentum_drift"] <= tol["momentum_energy_tol"],
            "energy": drift["energy_drift"] <= tol["momentum_energy_tol"],
            "entropy": drift["max_entropy_increase_rate"] <= tol["entropy_rate_tol"],
        }
        rep["tolerances"] = tol
        rep["checks"] = checks
        passed = all(checks.values())
    rep["pass"] = passed
    return ScenarioResult(cfg.scenario, str(out), passed, rep)


def poincare_family(spec: GridSpec, pc: Dict[str, Any]) -> TestFamily:
    L = spec.half_width
    focus = pc.get("focus")
    count = int(pc.get("focus_count", 48 if focus is not None else 0))
    widths = tuple(float(w) for w in np.geomspace(2 * spec.spacing, L, count)) if focus is not None and count else ()
    return TestFamily(
        seed=int(pc.get("family_seed", 0)),
        lattice_step=float(pc.get("lattice_step", L / 2)),
        widths=tuple(pc.get("widths", (L / 8, L / 4, L / 2))),
        n_random=int(pc.get("n_random", 64)),
        focus=tuple(float(x) for x in focus) if focus is not None else None,
        focus_widths=widths,
    )


def slope_stability(window_slopes, window, rel: float = 0.25) -> Dict[str, Any]:
    """A power law is stable when every one-decade slope inside the fit window is within ``rel`` of the median.

    Windows reaching outside the fit window see the grid floor or the box and say nothing about the exponent.
    """
    lo, hi = window
    inside = [w for w in window_slopes if np.isfinite(lo) and w[0] >= lo * (1 - 1e-9) and w[1] <= hi * (1 + 1e-9)]
    s = np.array([w[2] for w in inside], dtype=float)
    if s.size == 0:
        return {"stable": False, "median": math.nan, "min": math.nan, "max": math.nan, "count": 0}
    med = float(np.median(s))
    stable = bool(med != 0 and np.all(np.abs(s - med) <= rel * abs(med)))
    return {"stable": stable, "median": med, "min": float(s.min()), "max": float(s.max()), "count": int(s.size)}


def scenario_poincare(cfg, out) -> ScenarioResult:
    spec = grid_of(cfg)
    pc = cfg.block("poincare")
    gamma = float(pc.get("gamma", cfg.block("solver")["gamma"]))
    f = datum_of(cfg, spec)
    fam = poincare_family(spec, pc)
    lo, hi = pc.get("eps_decades", [-7, 0])
    per = int(pc.get("eps_per_decade", 10))
    eps = np.logspace(lo, hi, int(round((hi - lo) * per)) + 1)
    lam = {"gamma": gamma, "gamma+1": gamma + 1}[pc.get("lambda", "gamma")]
    report = estimate_C_of_eps(spec, f, gamma, eps, fam, lambda_choice=lam)
    write_csv(out / "poincare.csv", ["eps", "C", "family_argmax_id"],
              [(e, c, '"' + a + '"') for e, c, a in report.rows()])
    K0 = initial_K0(spec, f, gamma) if gamma + spec.d > 0 else None
    rep = _base_report(cfg, K0, K0 / 4 if K0 else None)
    stab = slope_stability(report.window_slopes, report.window)
    tol = float(pc.get("slope_tolerance", 0.25))
    need = float(pc.get("min_decades", 2.0))
    rep.update({
        "gamma": gamma, "lambda": lam, "slope": report.slope, "intercept": report.intercept,
        "window": list(report.window), "decades": report.decades, "target_slope": report.target_slope,
        "family": report.family, "family_seed": report.seed, "window_slopes": report.window_slopes,
        "stability": stab, "C_small_eps": float(report.C[0]),
    })
    if gamma > -2:
        rel = abs(report.slope - report.target_slope) / abs(report.target_slope)
        rep["relative_error"] = rel
        passed = bool(np.isfinite(rel) and rel <= tol and report.decades >= need - 1e-9)
    else:
        # the constant depends on the entropy of f: no single exponent is expected
        passed = bool(stab["count"] >= 2 and not stab["stable"])
    rep["pass"] = passed
    return ScenarioResult(cfg.scenario, str(out), passed, rep)


def degiorgi_config(cfg) -> DeGiorgiConfig:
    dg = cfg.block("degiorgi")
    return DeGiorgiConfig(
        t_star=dg["t_star"], T=dg["T"], gamma=cfg.block("solver")["gamma"], s=dg["s"], d=cfg.block("grid")["d"],
        p_gamma=dg.get("p_gamma"), alpha=dg.get("alpha"), n_max=int(dg.get("n_max", 8)), c0=dg.get("c0"),
        constants=tuple(dg.get("constants", (1.0, 1.0, 1.0))),
    )


def scenario_degiorgi(cfg, out) -> ScenarioResult:
    traj = solve(cfg, out)
    dcfg = degiorgi_config(cfg)
    dg = cfg.block("degiorgi")
    mode = dg.get("mode", "ledger")
    trace = iterate(traj, dcfg, mode)
    write_csv(out / "degiorgi.csv", ["n", "ell_n", "t_n", "E_n", "target"], trace.rows())
    factor = float(dg.get("sup_factor", 4.0))
    ratio = trace.K_bisect / trace.sup_f
    within = bool(1.0 / factor <= ratio <= factor)
    verdict = {
        "K_bisect": trace.K_bisect, "K_formula": float(trace.K_bound.K), "sup_f": trace.sup_f,
        "pass": bool(trace.decay_ok and within and (mode != "ledger" or trace.bound_holds)),
    }
    rep = _base_report(cfg, float(np.min(traj.column("k0"))), trace.c0)
    rep.update({
        "mode": mode, "Q": trace.Q, "K": trace.K, "K_bound": {k: float(v) for k, v in asdict(trace.K_bound).items()},
        "violations": trace.violations, "flagged": trace.flagged, "decay_ok": trace.decay_ok,
        "bound_holds": trace.bound_holds, "K_bisect_over_sup": ratio, "C_hat": trace.C_hat, "y_s": trace.y_s,
    })
    if dg.get("t_stars"):
        fit = t_star_scaling(traj, dcfg, tuple(dg["t_stars"]))
        ok = fit.relative_error <= float(dg.get("scaling_tolerance", 0.3))
        rep["scaling"] = {"t_stars": fit.t_stars, "K": fit.K, "slope": fit.slope, "target": fit.target,
                          "relative_error": fit.relative_error, "pass": ok}
        verdict["pass"] = bool(verdict["pass"] and ok)
    rep["verdict"] = verdict
    write_json(out / "verdict.json", verdict)
    rep["pass"] = verdict["pass"]
    return ScenarioResult(cfg.scenario, str(out), verdict["pass"], rep)


def scenario_rates(cfg, out) -> ScenarioResult:
    traj = solve(cfg, out)
    rc = cfg.block("rates")
    s, p = float(rc.get("s", 0.0)), float(rc.get("p", 2.0))
    t, M = series_M(traj, s, p)
    fit = fit_appearance_rate(traj, s, p, times=t, values=M)
    write_csv(out / "rates.csv", ["time", "M"], zip(t, M))
    t_from = float(rc.get("plateau_from", 1.0))
    late_max, late_first = plateau_bound(t, M, t_from)
    # the long-time branch: bounded by the value reached where the early decay ends
    end_val = float(np.interp(fit.window[1], t, M)) if np.isfinite(fit.window[1]) else math.nan
    plateau_ok = bool(np.isfinite(late_max) and late_max <= end_val * (1 + 1e-9))
    tol = float(rc.get("tolerance", 0.2))
    rate_ok = fit.declined is None and fit.relative_error <= tol
    rep = _base_report(cfg, float(np.min(traj.column("k0"))), _c0_or_none(traj))
    rep.update({"s": s, "p": p, "fit": {**asdict(fit), "relative_error": fit.relative_error if fit.declined is None else None},
                "plateau": {"from": t_from, "max": late_max, "bound": end_val, "pass": plateau_ok},
                "moment_mu_finite": True, "M0": float(M[0])})
    passed = bool(rate_ok and plateau_ok)
    rep["pass"] = passed
    return ScenarioResult(cfg.scenario, str(out), passed, rep)


def scenario_moments(cfg, out) -> ScenarioResult:
    traj = solve(cfg, out)
    mc = cfg.block("moments")
    s = float(mc.get("s", 4.0))
    t = np.asarray(traj.times, dtype=float)
    m = np.array([moment(traj.spec, f, s) for f in traj.snapshots])
    fit = fit_moment_growth(traj, s, envelope=float(mc.get("envelope", 0.05)), times=t, values=m)
    write_csv(out / "moments.csv", ["time", f"m_{s:g}"], zip(t, m))
    rep = _base_report(cfg, float(np.min(traj.column("k0"))), _c0_or_none(traj))
    rep.update({"s": s, "fit": asdict(fit)})
    rep["pass"] = fit.passed
    return ScenarioResult(cfg.scenario, str(out), fit.passed, rep)


def scenario_lorentz(cfg, out) -> ScenarioResult:
    rows = lorentz_selftest(seed=cfg.seed, fields=int(cfg.block("lorentz").get("fields", 200)))
    write_selftest_csv(rows, out / "lorentz_selftest.csv")
    passed = all(r.passed for r in rows)
    rep = _base_report(cfg, None, None)
    rep.update({"tests": len(rows), "failed": [r.test for r in rows if not r.passed]})
    rep["pass"] = passed
    return ScenarioResult(cfg.scenario, str(out), passed, rep)


RUNNERS: Dict[str, Callable] = {
    "run": scenario_run,
    "conservation": lambda cfg, out: scenario_run(cfg, out, strict=True),
    "poincare": scenario_poincare,
    "degiorgi": scenario_degiorgi,
    "rates": scenario_rates,
    "moments": scenario_moments,
    "lorentz-selftest": scenario_lorentz,
}
assert set(RUNNERS) == set(SCENARIOS)


def run_scenario(cfg: ExperimentConfig, out_dir=None) -> ScenarioResult:
    if cfg.scenario not in RUNNERS:
        raise ScenarioError(f"unknown scenario {cfg.scenario!r}; valid: {', '.join(SCENARIOS)}")
    out = Path(out_dir if out_dir is not None else cfg.raw["output"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    np.random.seed(cfg.seed)
    result = RUNNERS[cfg.scenario](cfg, out)
    write_json(out / "report.json", result.report)
    return result


def _worker(args):
    raw, out = args
    return run_scenario(ExperimentConfig(raw), out)


def pool_size(jobs: int) -> int:
    env = os.environ.get("LANDAU_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, jobs))


def run_many(cfgs: List[ExperimentConfig], out_dir=None) -> List[ScenarioResult]:
    """Run a list of configs; each gets its own numbered output directory."""
    if len(cfgs) == 1:
        return [run_scenario(cfgs[0], out_dir)]
    base = Path(out_dir if out_dir is not None else cfgs[0].raw["output"])
    jobs = [(c.raw, base / f"{k:03d}_{c.scenario}") for k, c in enumerate(cfgs)]
    workers = pool_size(len(jobs))
    if workers == 1:
        return [_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_worker, jobs))
