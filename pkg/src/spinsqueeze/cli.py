"""Command-line batch runner: steady states, trajectories, gaps, sweeps and presets."""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import minimize, minimize_scalar

from . import solver
from .errors import SearchError, SpinSqueezeError, ValidationError
from .liouvillian import (HybridParams, ModelParams, build_full_oracle,
                          build_general_collective, build_hybrid, build_ideal, build_spin_model,
                          build_thermal, map_to_effective_reservoir)
from .measure import spin_moments, summary, sy_distribution
from .meanfield import cumulant_evolve, cumulant_steady
from .oat import OatParams, coherent_x, optimize_dissipative, optimize_oat, transient_minimum
from .protocols import (LossSchedule, dd_steady_state, sensing_trajectory, sequence_a,
                        sequence_b)
from .spinspace import dicke_space
from .state import DensityState

TASKS = ("steady", "evolve", "gap", "sweep", "optimize", "validate")
PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig12", "fig14")
METRICS = ("xi2", "purity", "Sz", "Sy2", "Sx2", "gap")
OBJECTIVES = ("xi2", "Sy2", "evenodd_ratio")

MODEL_PARAMS = {
    "ideal": {"gamma", "r"},
    "thermal": {"gamma", "r", "n_th"},
    "general": {"gamma", "gamma_p", "gamma_down", "gamma_up", "gamma_heat", "r"},
    "spin": {"gamma", "r", "n_th", "gamma_coll", "gamma_phi", "gamma_rel", "gamma_up"},
    "meanfield": {"gamma", "r", "n_th", "gamma_coll", "gamma_phi", "gamma_rel", "gamma_up"},
    "hybrid": {"g", "kappa_sqz", "kappa_int", "r", "n_cut", "detunings", "gamma_phi",
               "gamma_rel"},
    "oat": {"g", "kappa_int", "gamma_rel", "delta_c"},
    "protocol": {"kind", "gamma", "r", "g", "kappa_sqz", "kappa_int", "n_cut", "detunings",
                 "sequence", "period", "events"},
}
TOLERANCE_KEYS = {"rtol": "RTOL", "atol": "ATOL", "residual": "RESIDUAL_TOL",
                  "trace_drift": "TRACE_DRIFT_TOL"}
CSV_DIGITS = 12


class ConfigError(ValidationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --------------------------------------------------------------------------
# configuration

@dataclass
class Axis:
    name: str
    values: list


@dataclass
class RunConfig:
    model: str
    task: str
    n_spins: int
    params: dict = field(default_factory=dict)
    block: float | None = None
    sweep: list[Axis] = field(default_factory=list)
    evolve: dict = field(default_factory=dict)
    optimize: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    tolerances: dict = field(default_factory=dict)
    compute_gap: bool = False
    gap_method: str = "spectrum"
    raw: dict = field(default_factory=dict)


def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def _number(value, path: str, positive: bool = False, integer: bool = False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    _expect(ok, path, f"expected a number, got {value!r}")
    if integer:
        _expect(float(value).is_integer(), path, "expected an integer")
        value = int(value)
    _expect(math.isfinite(value), path, "must be finite")
    if positive:
        _expect(value > 0, path, "must be positive")
    return value


def db_to_r(db: float) -> float:
    """Squeezing in dB (``10 log10 e^{2r}``) to the natural parameter ``r``."""
    return db * math.log(10) / 20


def _grid(spec, path: str) -> list:
    _expect(isinstance(spec, dict), path, "axis must be a mapping")
    _expect("name" in spec, f"{path}.name", "missing")
    if "values" in spec:
        vals = spec["values"]
        _expect(isinstance(vals, list) and vals, f"{path}.values", "must be a non-empty list")
        return list(vals)
    kind = spec.get("kind", "linear")
    _expect(kind in ("linear", "log", "db"), f"{path}.kind",
            f"unknown grid kind {kind!r} (linear, log, db)")
    for key in ("start", "stop", "num"):
        _expect(key in spec, f"{path}.{key}", "missing")
    start = _number(spec["start"], f"{path}.start")
    stop = _number(spec["stop"], f"{path}.stop")
    num = _number(spec["num"], f"{path}.num", positive=True, integer=True)
    if kind == "log":
        _expect(start > 0 and stop > 0, f"{path}.start", "log grid needs positive bounds")
        vals = np.geomspace(start, stop, num)
    else:
        vals = np.linspace(start, stop, num)
        if kind == "db":
            vals = [db_to_r(v) for v in vals]
    return [float(v) for v in vals]


def parse_config(data: dict, task: str | None = None) -> RunConfig:
    """Validate a configuration mapping; errors name the offending field."""
    _expect(isinstance(data, dict), "<root>", "configuration must be a mapping")
    known = {"model", "task", "n_spins", "params", "block", "sweep", "evolve", "optimize",
             "seed", "workers", "tolerances", "compute_gap", "gap_method"}
    for key in data:
        _expect(key in known, key, "unknown field")
    _expect("model" in data, "model", "missing")
    model = data["model"]
    _expect(model in MODEL_PARAMS, "model", f"unknown model {model!r}")
    cfg_task = data.get("task", task)
    _expect(cfg_task in TASKS, "task", f"unknown task {cfg_task!r}")
    if task is not None and "task" in data:
        _expect(data["task"] == task, "task", f"config says {data['task']!r}, command is {task!r}")
    _expect("n_spins" in data, "n_spins", "missing")
    n = _number(data["n_spins"], "n_spins", positive=True, integer=True)
    params = data.get("params", {}) or {}
    _expect(isinstance(params, dict), "params", "must be a mapping")
    allowed = MODEL_PARAMS[model]
    for key, val in params.items():
        _expect(key in allowed, f"params.{key}", f"not a parameter of model {model!r}")
        if key not in ("kind", "sequence", "detunings", "events"):
            _number(val, f"params.{key}")
    sweep = []
    raw_sweep = data.get("sweep", []) or []
    _expect(isinstance(raw_sweep, list), "sweep", "must be a list of axes")
    for k, ax in enumerate(raw_sweep):
        vals = _grid(ax, f"sweep[{k}]")
        name = ax["name"]
        _expect(name == "n_spins" or name in allowed, f"sweep[{k}].name",
                f"{name!r} is not a parameter of model {model!r}")
        sweep.append(Axis(name, vals))
    opt = data.get("optimize", {}) or {}
    if cfg_task == "optimize":
        _expect(isinstance(opt, dict) and "axes" in opt, "optimize.axes", "missing")
        axes = opt["axes"]
        _expect(isinstance(axes, list) and 1 <= len(axes) <= 2, "optimize.axes",
                "one or two free axes required")
        for k, ax in enumerate(axes):
            path = f"optimize.axes[{k}]"
            _expect(isinstance(ax, dict) and ax.get("name") in allowed, f"{path}.name",
                    "must name a model parameter")
            lo = _number(ax.get("lower"), f"{path}.lower")
            hi = _number(ax.get("upper"), f"{path}.upper")
            _expect(hi > lo, f"{path}.upper", "must exceed lower")
            _expect(ax.get("kind", "linear") in ("linear", "db"), f"{path}.kind",
                    "linear or db")
        objective = opt.get("objective", "xi2")
        _expect(objective in OBJECTIVES, "optimize.objective", f"unknown objective {objective!r}")
        if "grid" in opt:
            _number(opt["grid"], "optimize.grid", positive=True, integer=True)
    ev = data.get("evolve", {}) or {}
    if cfg_task == "evolve":
        _expect(isinstance(ev, dict) and "t_final" in ev, "evolve.t_final", "missing")
        _number(ev["t_final"], "evolve.t_final", positive=True)
        if "samples" in ev:
            _number(ev["samples"], "evolve.samples", positive=True, integer=True)
        _expect(ev.get("initial", "down") in ("down", "coherent_x"), "evolve.initial",
                "down or coherent_x")
        _expect(ev.get("spacing", "linear") in ("linear", "log"), "evolve.spacing",
                "linear or log")
        if "t_start" in ev:
            _number(ev["t_start"], "evolve.t_start", positive=True)
            _expect(ev["t_start"] < ev["t_final"], "evolve.t_start", "must be below t_final")
    tol = data.get("tolerances", {}) or {}
    _expect(isinstance(tol, dict), "tolerances", "must be a mapping")
    for key, val in tol.items():
        _expect(key in TOLERANCE_KEYS, f"tolerances.{key}", "unknown tolerance")
        _number(val, f"tolerances.{key}", positive=True)
    gap_method = data.get("gap_method", "spectrum")
    _expect(gap_method in ("spectrum", "rate_matrix"), "gap_method", "spectrum or rate_matrix")
    block = data.get("block")
    if block is not None:
        block = float(_number(block, "block"))
    return RunConfig(model=model, task=cfg_task, n_spins=n, params=dict(params), block=block,
                     sweep=sweep, evolve=dict(ev), optimize=dict(opt),
                     seed=_number(data.get("seed", 0), "seed", integer=True),
                     workers=_number(data.get("workers", 1), "workers", positive=True,
                                     integer=True),
                     tolerances=dict(tol), compute_gap=bool(data.get("compute_gap", False)),
                     gap_method=gap_method, raw=data)


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML/JSON: {exc}") from None
    return data or {}


def apply_tolerances(tol: dict) -> None:
    """Override solver tolerances (environment variables are read at import)."""
    for key, val in tol.items():
        setattr(solver, TOLERANCE_KEYS[key], float(val))


# --------------------------------------------------------------------------
# point evaluation

def _nan_metrics() -> dict:
    return {k: math.nan for k in METRICS}


def _model_params(params: dict) -> ModelParams:
    names = ("gamma", "r", "n_th", "gamma_coll", "gamma_phi", "gamma_rel", "gamma_up")
    return ModelParams(**{k: float(v) for k, v in params.items() if k in names})


def _hybrid_params(params: dict) -> HybridParams:
    kw = {k: v for k, v in params.items() if k in HybridParams.__dataclass_fields__}
    if "detunings" in kw and kw["detunings"] is not None:
        kw["detunings"] = tuple(float(x) for x in kw["detunings"])
    if "n_cut" in kw:
        kw["n_cut"] = int(kw["n_cut"])
    return HybridParams(**kw)


def build_model(model: str, params: dict, n: int, block: float | None = None):
    """Liouvillian and the space it acts on for a linear model."""
    space = dicke_space(n)
    j = n / 2 if block is None else block
    p = dict(params)
    if model == "ideal":
        return build_ideal(space, j, p.get("gamma", 1.0), p.get("r", 0.0)), space
    if model == "thermal":
        return build_thermal(space, j, p.get("gamma", 1.0), p.get("r", 0.0),
                             p.get("n_th", 0.0)), space
    if model == "general":
        heat = p.get("gamma_heat", 0.0)
        return build_general_collective(space, j, p.get("gamma", 1.0), p.get("gamma_p", 0.0),
                                        p.get("gamma_down", heat), p.get("gamma_up", heat),
                                        p.get("r", 0.0)), space
    if model == "spin":
        mp = _model_params(p)
        return build_spin_model(space, mp, j=None if mp.has_local else j), space
    if model == "hybrid":
        return build_hybrid(_hybrid_params(p), n), None
    raise ValidationError(f"model {model!r} has no Liouvillian")


def _gap(model: str, params: dict, n: int, block, method: str) -> float:
    if method == "rate_matrix":
        mp = _model_params(params)
        rm = solver.jspace_rate_matrix(dicke_space(n), mp.r, mp.gamma_phi, mp.gamma)
        return rm.physical_gap
    lv, _ = build_model(model, params, n, block)
    return solver.spectrum(lv).gap


def _state_metrics(state: DensityState, space) -> dict:
    out = _nan_metrics()
    out.update(summary(state, space))
    return out


def evaluate_point(model: str, params: dict, n: int, task: str, block=None,
                   compute_gap: bool = False, gap_method: str = "spectrum") -> dict:
    """Metrics of one configuration; failures are reported in ``status``."""
    try:
        out = _nan_metrics()
        if task == "gap":
            out["gap"] = _gap(model, params, n, block, gap_method)
            return {**out, "status": "ok"}
        if model == "meanfield":
            st = cumulant_steady(_model_params(params), n)
            out.update(xi2=st.xi2, Sz=st.state.sz, Sy2=st.state.sy2, Sx2=st.state.sx2)
        elif model == "oat":
            if "delta_c" in params:
                tm = transient_minimum(OatParams(n_spins=n, **params))
                out["xi2"] = tm.xi2
            else:
                out["xi2"] = optimize_oat(params.get("g", 1.0), params.get("kappa_int", 1.0),
                                          params.get("gamma_rel", 0.0), n).xi2
        elif model == "protocol":
            kind = params.get("kind", "dd")
            if kind != "dd":
                raise ValidationError("only kind 'dd' has a stationary state")
            hp = _hybrid_params(params)
            seq = (sequence_b if params.get("sequence", "b") == "b" else sequence_a)(
                float(params.get("period", 0.05)))
            out = _state_metrics(dd_steady_state(seq, hp, n), None)
        else:
            lv, space = build_model(model, params, n, block)
            st = solver.steady_state(lv)
            out = _state_metrics(st, space)
            if compute_gap:
                out["gap"] = solver.spectrum(lv).gap
        return {**out, "status": "ok"}
    except (SpinSqueezeError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        msg = str(exc).replace("\n", " ").replace(",", ";")
        return {**_nan_metrics(), "status": f"error:{type(exc).__name__}:{msg}"}


def _point_task(args):
    cfg_tol, model, params, n, task, block, compute_gap, gap_method = args
    apply_tolerances(cfg_tol)
    return evaluate_point(model, params, n, task, block, compute_gap, gap_method)


def _points(cfg: RunConfig) -> list[dict]:
    if not cfg.sweep:
        return [{}]
    names = [ax.name for ax in cfg.sweep]
    return [dict(zip(names, combo)) for combo in itertools.product(*(ax.values for ax in cfg.sweep))]


def _run_points(cfg: RunConfig, points: list[dict], workers: int) -> list[dict]:
    jobs = []
    for pt in points:
        params = {**cfg.params, **{k: v for k, v in pt.items() if k != "n_spins"}}
        n = int(pt.get("n_spins", cfg.n_spins))
        jobs.append((cfg.tolerances, cfg.model, params, n, cfg.task, cfg.block,
                     cfg.compute_gap, cfg.gap_method))
    if workers <= 1 or len(jobs) <= 1:
        return [_point_task(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point_task, jobs))  # map keeps grid order


# --------------------------------------------------------------------------
# output

def fmt(x) -> str:
    """Deterministic text for CSV cells (``inf``/``nan`` literals)."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, f".{CSV_DIGITS}g")


def csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", *columns, *METRICS, "status"])
    for k, row in enumerate(rows):
        w.writerow([k, *(fmt(row.get(c, "")) for c in columns),
                    *(fmt(row.get(m, math.nan)) for m in METRICS), row.get("status", "ok")])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else fmt(v)
    return x


def _version() -> str:
    try:
        return metadata.version("spinsqueeze")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class RunRecord:
    config: dict
    columns: list
    points: list
    extra: dict = field(default_factory=dict)
    version: str = field(default_factory=_version)
    wall_clock: float = 0.0


def write_outputs(out_dir: Path, stem: str, record: RunRecord) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    csv_path.write_text(csv_text(record.columns, record.points), encoding="utf-8")
    json_path.write_text(json.dumps(_jsonable(asdict(record)), indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    return csv_path, json_path


# --------------------------------------------------------------------------
# tasks

def run_grid(cfg: RunConfig) -> RunRecord:
    points = _points(cfg)
    results = _run_points(cfg, points, cfg.workers)
    rows = [{**pt, **res} for pt, res in zip(points, results)]
    return RunRecord(config=cfg.raw, columns=[ax.name for ax in cfg.sweep], points=rows)


def _initial_state(model: str, n: int, lv, kind: str) -> DensityState:
    if model == "hybrid":
        d = lv.hilbert_dims[0]
        rho = np.zeros((d, d), complex)
        rho[0, 0] = 1.0
        return DensityState.hybrid(rho, n, lv.fock_dim, lv.spin_j)
    if kind == "coherent_x":
        return coherent_x(n)
    rho = np.zeros((n + 1, n + 1), complex)
    rho[0, 0] = 1.0
    return DensityState(layout="dicke", n_spins=n, blocks={n / 2: rho})


def _time_grid(ev: dict) -> np.ndarray:
    """Sample times: uniform from 0, or 0 followed by a geometric grid from ``t_start``."""
    t_final, samples = float(ev["t_final"]), int(ev.get("samples", 101))
    if ev.get("spacing", "linear") == "log":
        t_start = float(ev.get("t_start", t_final * 1e-8))
        return np.concatenate([[0.0], np.geomspace(t_start, t_final, samples - 1)])
    return np.linspace(0.0, t_final, samples)


def run_evolve(cfg: RunConfig) -> RunRecord:
    ev = cfg.evolve
    t = _time_grid(ev)
    n = cfg.n_spins
    if cfg.model == "meanfield":
        _, ys, xi = cumulant_evolve(_model_params(cfg.params), n, t)
        rows = [{"t": tk, **_nan_metrics(), "xi2": x, "Sz": y[0], "Sx2": y[1], "Sy2": y[2],
                 "status": "ok"} for tk, y, x in zip(t, ys, xi)]
        return RunRecord(config=cfg.raw, columns=["t"], points=rows)
    if cfg.model == "protocol":
        events = tuple(float(e) for e in cfg.params.get("events", ()))
        traj = sensing_trajectory(n, float(cfg.params.get("gamma", 1.0)),
                                  float(cfg.params.get("r", 1.0)),
                                  LossSchedule(events, seed=cfg.seed), t)
        rows = [{"t": tk, "n_spins": int(nk), **_nan_metrics(), "Sy2": y, "status": "ok"}
                for tk, nk, y in zip(traj.times, traj.n_spins, traj.sy2)]
        return RunRecord(config=cfg.raw, columns=["t", "n_spins"], points=rows,
                         extra={"removed_sites": traj.removed})
    if cfg.model in ("meanfield", "oat"):
        raise ValidationError(f"evolve is not available for model {cfg.model!r}")
    lv, space = build_model(cfg.model, cfg.params, n, cfg.block)
    rho0 = _initial_state(cfg.model, n, lv, ev.get("initial", "down"))
    traj = solver.evolve(lv, rho0, t, rtol=solver.RTOL, atol=solver.ATOL,
                         method=ev.get("method", "RK45"),
                         observables={"m": lambda st: _state_metrics(st, space)},
                         store_states=False)
    rows = [{"t": tk, **m, "status": "ok"} for tk, m in zip(t, traj.observables["m"])]
    return RunRecord(config=cfg.raw, columns=["t"], points=rows,
                     extra={"rhs_evals": traj.rhs_evals, "trace_drift": traj.max_trace_drift})


def _axis_values(ax: dict) -> tuple[float, float]:
    lo, hi = float(ax["lower"]), float(ax["upper"])
    if ax.get("kind", "linear") == "db":
        return db_to_r(lo), db_to_r(hi)
    return lo, hi


def _optimize_single(cfg: RunConfig, n: int, metric: str, workers: int):
    axes = cfg.optimize["axes"]
    num = int(cfg.optimize.get("grid", 25))
    bounds = [_axis_values(a) for a in axes]
    names = [a["name"] for a in axes]
    grids = [np.linspace(lo, hi, num) for lo, hi in bounds]
    points = [dict(zip(names, map(float, c))) | {"n_spins": n}
              for c in itertools.product(*grids)]
    sub = RunConfig(**{**cfg.__dict__, "task": "steady"})
    results = _run_points(sub, points, workers)
    profile = [{**pt, **res} for pt, res in zip(points, results)]
    vals = np.array([r[metric] for r in results], dtype=float)
    if not np.any(np.isfinite(vals)):
        raise SearchError("objective is non-finite on the whole grid")
    vals = np.where(np.isfinite(vals), vals, np.inf)
    best = int(np.argmin(vals))

    def f(x):
        params = {**cfg.params, **dict(zip(names, map(float, np.atleast_1d(x))))}
        v = evaluate_point(cfg.model, params, n, "steady", cfg.block)[metric]
        return v if math.isfinite(v) else 1e300

    boundary = False
    if len(axes) == 1:
        g = grids[0]
        if 0 < best < num - 1:
            res = minimize_scalar(f, bracket=(g[best - 1], g[best], g[best + 1]),
                                  method="golden", tol=1e-6)
            x_opt, f_opt = [float(res.x)], float(res.fun)
            if not bounds[0][0] <= x_opt[0] <= bounds[0][1] or f_opt > vals[best]:
                x_opt, f_opt = [float(g[best])], float(vals[best])
        else:
            x_opt, f_opt, boundary = [float(g[best])], float(vals[best]), True
    else:
        x0 = [points[best][nm] for nm in names]
        res = minimize(f, x0, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": 1e-4, "fatol": 1e-9})
        x_opt, f_opt = [float(v) for v in res.x], float(res.fun)
        boundary = any(abs(v - lo) < 1e-6 or abs(v - hi) < 1e-6
                       for v, (lo, hi) in zip(x_opt, bounds))
    optimum = dict(zip(names, x_opt))
    final = evaluate_point(cfg.model, {**cfg.params, **optimum}, n, "steady", cfg.block)
    return profile, optimum, f_opt, boundary, final


def run_optimize(cfg: RunConfig) -> RunRecord:
    objective = cfg.optimize.get("objective", "xi2")
    names = [a["name"] for a in cfg.optimize["axes"]]
    columns = ["n_spins", *names]
    sizes = [cfg.n_spins, cfg.n_spins + 1] if objective == "evenodd_ratio" else [cfg.n_spins]
    metric = "Sy2" if objective == "evenodd_ratio" else objective
    rows, optima = [], []
    for n in sizes:
        profile, opt, fval, boundary, final = _optimize_single(cfg, n, metric, cfg.workers)
        rows.extend(profile)
        rows.append({"n_spins": n, **opt, **final,
                     "status": "optimum-boundary" if boundary else "optimum"})
        optima.append({"n_spins": n, "optimum": opt, "value": fval, "boundary": boundary})
    extra = {"objective": objective, "optima": optima}
    if objective == "evenodd_ratio":
        extra["ratio"] = optima[0]["value"] / optima[1]["value"]
    return RunRecord(config=cfg.raw, columns=columns, points=rows, extra=extra)


def run_validate(cfg: RunConfig) -> RunRecord:
    """Oracle equivalence and invariant checks; status ``pass``/``fail``."""
    rng = np.random.default_rng(cfg.seed)
    rows = []

    def record(name, ok, detail=""):
        rows.append({"check": name, **_nan_metrics(),
                     "status": "pass" if ok else f"fail:{detail}"})

    for n in range(2, min(cfg.n_spins, 5) + 1):
        for k in range(3):
            p = ModelParams(gamma=float(rng.uniform(0.2, 2)), r=float(rng.uniform(0, 1.5)),
                            n_th=float(rng.uniform(0, 0.5)),
                            gamma_coll=float(rng.uniform(0, 0.5)),
                            gamma_phi=float(rng.uniform(0, 0.3)),
                            gamma_rel=float(rng.uniform(0, 0.3)))
            dk = spin_moments(solver.steady_state(build_spin_model(dicke_space(n), p)))
            fl = spin_moments(solver.steady_state(build_full_oracle(n, p)))
            err = float(max(np.max(np.abs(dk.mean - fl.mean)),
                            np.max(np.abs(dk.second - fl.second))))
            record(f"oracle_N{n}_{k}", err < 1e-8, f"{err:.2e}")
    for n in (4, 6, 10):
        lv = build_ideal(dicke_space(n), n / 2, 1.0, 1.0)
        res = solver.steady_residual(lv, solver.steady_state(lv))
        record(f"dark_residual_N{n}", res < 1e-9, f"{res:.2e}")
    n = 4
    for k in range(3):
        rates = rng.uniform(0.05, 1.0, size=4)
        r = float(rng.uniform(0, 1.5))
        eff = map_to_effective_reservoir(*map(float, rates), r)
        sp = dicke_space(n)
        a = solver.steady_state(build_general_collective(sp, n / 2, *map(float, rates), r))
        b = solver.steady_state(build_general_collective(sp, n / 2, eff.gamma, eff.gamma_p,
                                                         0.0, 0.0, eff.r))
        dist = a.trace_distance(b)
        record(f"mapping_{k}", dist < 1e-8, f"{dist:.2e}")
    rm = solver.jspace_rate_matrix(dicke_space(16), 0.0, 0.5, 1.0)
    record("rate_matrix_r0", abs(rm.physical_gap - 1 / 16) < 1e-10, f"{rm.physical_gap}")
    return RunRecord(config=cfg.raw, columns=["check"], points=rows)


TASK_RUNNERS = {"steady": run_grid, "sweep": run_grid, "gap": run_grid, "evolve": run_evolve,
                "optimize": run_optimize, "validate": run_validate}


# --------------------------------------------------------------------------
# presets

def _grid_record(name, model, n_values, sweep, params, workers, task="steady", **extra):
    cfg = parse_config({"model": model, "task": task, "n_spins": n_values[0], "params": params,
                        "sweep": [{"name": "n_spins", "values": n_values}, *sweep],
                        "workers": workers, **extra})
    rec = run_grid(cfg)
    rec.extra["preset"] = name
    return rec


def preset_fig2(workers: int, seed: int) -> RunRecord:
    return _grid_record("fig2", "ideal", [10, 20, 50, 100, 200],
                        [{"name": "r", "kind": "linear", "start": 0, "stop": 6, "num": 25}],
                        {"gamma": 1.0}, workers)


def preset_fig3(workers: int, seed: int) -> RunRecord:
    return _grid_record("fig3", "ideal", [200, 201],
                        [{"name": "r", "kind": "linear", "start": 0, "stop": 6, "num": 25}],
                        {"gamma": 1.0}, workers)


def preset_fig4(workers: int, seed: int) -> RunRecord:
    cfg = parse_config({"model": "protocol", "task": "evolve", "n_spins": 6, "seed": seed,
                        "params": {"kind": "sensing", "gamma": 1.0, "r": 1.0,
                                   "events": [100.0, 200.0, 300.0]},
                        "evolve": {"t_final": 400.0, "samples": 801}})
    rec = run_evolve(cfg)
    rec.extra["preset"] = "fig4"
    return rec


def _fig5_point(args):
    n, kind = args
    g, kappa_int, gamma_rel = 1.0, 100.0, 0.02
    if kind == "dissipative":
        opt = optimize_dissipative(g, kappa_int, gamma_rel, n)
        return {"xi2": opt.xi2, "r": opt.r, "kappa_sqz": opt.kappa_sqz}
    opt = optimize_oat(g, kappa_int, gamma_rel, n)
    return {"xi2": opt.xi2, "delta_c": opt.delta_c, "t_opt": opt.t_opt}


def preset_fig5(workers: int, seed: int, n_values=None) -> RunRecord:
    n_values = n_values or list(range(4, 31, 2))
    jobs = [(n, kind) for n in n_values for kind in ("dissipative", "oat")]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fig5_point, jobs))
    else:
        results = [_fig5_point(j) for j in jobs]
    rows, details = [], []
    for (n, kind), res in zip(jobs, results):
        rows.append({"n_spins": n, "protocol": kind, **_nan_metrics(), "xi2": res["xi2"],
                     "status": "ok"})
        details.append({"n_spins": n, "protocol": kind, **res})
    return RunRecord(config={"preset": "fig5", "g": 1.0, "kappa_int": 100.0, "gamma_rel": 0.02},
                     columns=["n_spins", "protocol"], points=rows,
                     extra={"preset": "fig5", "optima": details})


def preset_fig6(workers: int, seed: int) -> RunRecord:
    master = run_evolve(parse_config({
        "model": "spin", "task": "evolve", "n_spins": 50,
        "params": {"gamma": 1.0, "r": 1.0, "gamma_phi": 0.005},
        "evolve": {"t_final": 3.0, "samples": 61}}))
    mf = run_evolve(parse_config({
        "model": "meanfield", "task": "evolve", "n_spins": 1000,
        "params": {"gamma": 1.0, "r": 1.0, "gamma_phi": 0.005},
        "evolve": {"t_final": 1e7, "samples": 201, "spacing": "log", "t_start": 1e-4}}))
    # the slow relaxation takes ~N / gamma_phi, beyond reach of direct integration
    # at N = 50; the stationary values stand in for the late-time plateau
    steady = {}
    for label, extra_rel in (("dephasing", 0.0), ("dephasing_relaxation", 0.001)):
        p = ModelParams(gamma=1.0, r=1.0, gamma_phi=0.005, gamma_rel=extra_rel)
        steady[label] = summary(solver.steady_state(build_spin_model(dicke_space(50), p)),
                                dicke_space(50))
    rows = ([{"source": "master", **r} for r in master.points]
            + [{"source": "meanfield", **r} for r in mf.points])
    return RunRecord(config={"preset": "fig6"}, columns=["source", "t"], points=rows,
                     extra={"preset": "fig6", "master_steady": steady})


def preset_fig7(workers: int, seed: int) -> RunRecord:
    return _grid_record("fig7", "thermal", [200],
                        [{"name": "n_th", "values": [0.01, 0.1, 0.5]},
                         {"name": "r", "kind": "linear", "start": 0, "stop": 4, "num": 21}],
                        {"gamma": 1.0}, workers)


def preset_fig8(workers: int, seed: int) -> RunRecord:
    rows, optima = [], []
    for heat in (0.001, 0.003, 0.01, 0.017, 0.03):
        cfg = parse_config({"model": "general", "task": "optimize", "n_spins": 8,
                            "params": {"gamma": 1.0, "gamma_heat": heat},
                            "optimize": {"objective": "evenodd_ratio", "grid": 25,
                                         "axes": [{"name": "r", "kind": "db", "lower": 0,
                                                   "upper": 12}]},
                            "workers": workers})
        rec = run_optimize(cfg)
        for row in rec.points:
            if row["status"].startswith("optimum"):
                rows.append({"gamma_heat": heat, **row})
        optima.append({"gamma_heat": heat, "ratio": rec.extra["ratio"],
                       "optima": rec.extra["optima"]})
    return RunRecord(config={"preset": "fig8"}, columns=["gamma_heat", "n_spins", "r"],
                     points=rows, extra={"preset": "fig8", "ratios": optima})


def preset_fig12(workers: int, seed: int) -> RunRecord:
    rec = _grid_record("fig12", "ideal", [200, 201],
                       [{"name": "r", "values": [1.0, 2.0, 3.0, 4.0]}], {"gamma": 1.0}, workers)
    dists = []
    for n in (200, 201):
        for r in (1.0, 2.0, 3.0, 4.0):
            lv, _ = build_model("ideal", {"gamma": 1.0, "r": r}, n)
            m, prob = sy_distribution(solver.steady_state(lv))
            dists.append({"n_spins": n, "r": r, "m_y": m, "probability": prob})
    rec.extra["sy_distribution"] = dists
    return rec


def preset_fig14(workers: int, seed: int) -> RunRecord:
    return _grid_record("fig14", "spin", list(range(8, 129, 8)),
                        [{"name": "r", "values": [0.0, 0.2, 0.5, 1.0, 1.4, 4.0]}],
                        {"gamma": 1.0, "gamma_phi": 0.001}, workers, task="gap",
                        gap_method="rate_matrix")


PRESET_RUNNERS = {name: globals()[f"preset_{name}"] for name in PRESETS}


# --------------------------------------------------------------------------
# entry point

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinsqueeze",
                                 description="Dissipative spin-squeezing simulations.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--workers", metavar="K", type=int, default=None,
                        help="worker processes for sweeps")
    common.add_argument("--seed", metavar="S", type=int, default=None, help="random seed")
    sub = ap.add_subparsers(dest="command", required=True)
    for task in TASKS:
        sub.add_parser(task, parents=[common], help=f"run the {task} task")
    pre = sub.add_parser("preset", parents=[common], help="reproduce a figure's data")
    pre.add_argument("name", choices=PRESETS)
    return ap


def _fail(code: int, message: str) -> int:
    print(f"spinsqueeze: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out)
    start = time.perf_counter()
    if args.command == "preset":
        workers = args.workers or 1
        record = PRESET_RUNNERS[args.name](workers, 0 if args.seed is None else args.seed)
        stem = args.name
    else:
        if args.config is None:
            if args.command != "validate":
                return _fail(2, "config: --config is required")
            data = {"model": "spin", "n_spins": 5}
        else:
            try:
                data = load_config(args.config)
            except OSError as exc:
                return _fail(2, f"config: {exc}")
        if isinstance(data, dict):
            data = dict(data)
            if args.seed is not None:
                data["seed"] = args.seed
            if args.workers is not None:
                data["workers"] = args.workers
        try:
            cfg = parse_config(data, args.command)
        except ConfigError as exc:
            return _fail(2, f"invalid configuration at {exc}")
        apply_tolerances(cfg.tolerances)
        try:
            record = TASK_RUNNERS[cfg.task](cfg)
        except SpinSqueezeError as exc:
            return _fail(1, f"{type(exc).__name__}: {exc}")
        stem = cfg.task
    record.wall_clock = time.perf_counter() - start
    csv_path, _ = write_outputs(out, stem, record)
    print(csv_path)
    statuses = [str(p.get("status", "ok")) for p in record.points]
    if args.command == "validate":
        return 0 if all(s == "pass" for s in statuses) else 1
    if statuses and all(s.startswith(("error", "fail")) for s in statuses):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
