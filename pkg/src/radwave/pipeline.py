"""Configuration files, run orchestration and on-disk artifacts."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConfigError, ContractError, FieldState, InitialDataSpec, RadialGrid, SimConfig
from .diagnostics import (
    DiagnosticRow,
    diagnostic_rows,
    morawetz_report,
    nakanishi_cumulative,
)
from .ineqlab import (
    DEFAULT_SEED,
    FAMILY_SIZE,
    InequalityVerdict,
    WeightSpec,
    finite_speed_family_verdicts,
    finite_speed_weight_check,
    hardy_family_verdicts,
    pointwise_estimate_check,
)
from .radiation import exterior_error, extract_radiation
from .solver import Trajectory, evolve

# -- decay fits ---------------------------------------------------------------


def fit_decay_rate(series, min_points: int = 8) -> tuple[float, float]:
    """Fit value ~ t^(-exponent) by least squares in log-log; return (exponent, r_squared).

    A decaying series has a positive exponent.
    """
    data = [(float(t), float(v)) for t, v in series]
    if len(data) < min_points:
        raise ContractError(f"need at least {min_points} points, got {len(data)}")
    t = np.array([d[0] for d in data])
    v = np.array([d[1] for d in data])
    if not (v > 0).all():
        raise ContractError("decay fits need strictly positive values")
    if not (t > 0).all() or not (np.diff(t) > 0).all():
        raise ContractError("times must be positive and increasing")
    x, y = np.log(t), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return -float(slope), r2


# -- configuration --------------------------------------------------------------


@dataclass(frozen=True)
class RadiationRequest:
    eta_window: tuple[float, float] = (-8.0, 10.0)
    extraction_times: tuple[float, ...] = ()
    exterior_eta: float | None = None


@dataclass(frozen=True)
class FiniteSpeedRequest:
    R: float
    t_prime: float
    weight: WeightSpec = WeightSpec()


@dataclass(frozen=True)
class DiagnosticsRequest:
    q: bool = False
    mu2: float | None = None
    char_etas: tuple[float, ...] = ()
    nakanishi: bool = True
    radiation: RadiationRequest | None = None
    pointwise: bool = True
    hardy_kappas: tuple[float, ...] = ()
    finite_speed: FiniteSpeedRequest | None = None
    family_finite_speed: bool = False
    snapshots: bool = False
    energy_drift_tol: float | None = None
    morawetz_tol: float = 1e-2


def _check_keys(raw: dict, cls, where: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _build(cls, raw: dict, where: str, **nested):
    _check_keys(raw, cls, where)
    kw = dict(raw)
    for key, make in nested.items():
        if kw.get(key) is not None:
            kw[key] = make(kw[key])
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _tuple(x):
    return tuple(x)


def diagnostics_from_dict(raw: dict) -> DiagnosticsRequest:
    return _build(
        DiagnosticsRequest,
        raw,
        "diagnostics",
        char_etas=_tuple,
        hardy_kappas=_tuple,
        radiation=lambda d: _build(
            RadiationRequest, d, "diagnostics.radiation",
            eta_window=_tuple, extraction_times=_tuple,
        ),
        finite_speed=lambda d: _build(
            FiniteSpeedRequest, d, "diagnostics.finite_speed",
            weight=lambda w: _build(WeightSpec, w, "diagnostics.finite_speed.weight"),
        ),
    )


def config_from_dict(raw: dict) -> tuple[SimConfig, DiagnosticsRequest]:
    """Parse the JSON document; unknown keys anywhere are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    diag_raw = raw.pop("diagnostics", {})
    _check_keys(raw, SimConfig, "config")
    cfg = _build(
        SimConfig, raw, "config",
        data=lambda d: _build(InitialDataSpec, d, "data"),
        kappa_list=_tuple,
        morawetz_R_list=lambda items: tuple(tuple(x) for x in items),
    )
    return cfg, diagnostics_from_dict(diag_raw)


def load_config(path) -> tuple[SimConfig, DiagnosticsRequest]:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(raw)


def config_to_dict(cfg: SimConfig, diag: DiagnosticsRequest | None = None) -> dict:
    d = asdict(cfg)
    d["kappa_list"] = list(cfg.kappa_list)
    d["morawetz_R_list"] = [list(x) for x in cfg.morawetz_R_list]
    if diag is not None:
        d["diagnostics"] = asdict(diag)
    return json.loads(json.dumps(d))


def config_hash(cfg: SimConfig, diag: DiagnosticsRequest | None = None) -> str:
    """SHA-256 of the canonical JSON form; independent of key order in the source file."""
    canon = json.dumps(config_to_dict(cfg, diag), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# -- writers ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def csv_header(kappas, etas) -> list[str]:
    return (
        ["t", "E_total"]
        + [f"E_kappa_{_fmt(k)}" for k in kappas]
        + ["interior_weighted", "e_in", "e_out", "Q", "nakanishi_cum"]
        + [f"char_flux_{_fmt(e)}" for e in etas]
    )


def write_diagnostics_csv(path, rows: list[DiagnosticRow], kappas, etas) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(kappas, etas))
        for row in rows:
            w.writerow(
                [_fmt(row.t), _fmt(row.E_total)]
                + [_fmt(row.E_kappa[k]) for k in kappas]
                + [_fmt(row.interior_weighted), _fmt(row.e_in), _fmt(row.e_out), _fmt(row.Q),
                   _fmt(row.nakanishi_cum)]
                + [_fmt(row.char_flux[e]) for e in etas]
            )


def read_diagnostics_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = np.array([[float(x) for x in r] for r in body]).reshape(len(body), len(header))
    return {name: cols[:, k] for k, name in enumerate(header)}


def write_snapshot(path, state: FieldState, grid: RadialGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "ut"])
        for r, u, ut in zip(grid.nodes, state.u, state.ut):
            w.writerow([_fmt(r), _fmt(u), _fmt(ut)])


def read_snapshot(path, t: float) -> FieldState:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["r", "u", "ut"]:
        raise ContractError(f"{path} is not a snapshot file")
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 3)
    return FieldState(float(t), data[:, 1], data[:, 2])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


# -- pipeline -----------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    solver_version: str
    grid: dict
    outputs: list[str] = field(default_factory=list)
    wall_clock: float = 0.0
    steps: int = 0
    snapshots: int = 0
    gates: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def needs_backward(cfg: SimConfig, diag: DiagnosticsRequest) -> bool:
    return bool(cfg.morawetz_R_list) or diag.q


def run_trajectories(cfg: SimConfig, backward: bool) -> tuple[Trajectory, Trajectory | None]:
    fwd = evolve(cfg.with_changes(direction="forward"))
    bwd = evolve(cfg.with_changes(direction="backward")) if backward else None
    return fwd, bwd


def morawetz_reports(cfg: SimConfig, fwd: Trajectory, bwd: Trajectory) -> list:
    out = []
    for R, r, mu1, mu2 in cfg.morawetz_R_list:
        if R + r > cfg.t_final:
            raise ConfigError(f"Morawetz window R + r = {R + r:g} exceeds t_final = {cfg.t_final:g}")
        out.append(morawetz_report(fwd, bwd, R, r, mu1, mu2))
    return out


def inequality_verdicts(cfg: SimConfig, diag: DiagnosticsRequest, fwd: Trajectory,
                        seed: int = DEFAULT_SEED) -> list[InequalityVerdict]:
    out = []
    if diag.pointwise:
        grid = fwd.grid
        out.extend(pointwise_estimate_check(s, grid, cfg.p) for s in fwd.snapshots)
    for kappa in diag.hardy_kappas:
        out.extend(hardy_family_verdicts(kappa, seed, FAMILY_SIZE))
    if diag.finite_speed is not None:
        fs = diag.finite_speed
        out.append(finite_speed_weight_check(fwd, fs.weight, fs.R, fs.t_prime))
    if diag.family_finite_speed:
        out.extend(finite_speed_family_verdicts(seed, FAMILY_SIZE, cfg.p))
    return out


def radiation_report(fwd: Trajectory, req: RadiationRequest) -> dict:
    times = req.extraction_times or (fwd.t_max,)
    profile = extract_radiation(fwd, req.eta_window, times)
    report = profile.to_dict()
    report["energy"] = profile.energy()
    if req.exterior_eta is not None:
        grid = fwd.grid
        report["exterior_error"] = [
            {"t": s.t, "value": exterior_error(s, grid, profile, req.exterior_eta)}
            for s in fwd.snapshots
            if s.t > 0
        ]
    return report


def run_pipeline(config_path, out_dir, seed: int = DEFAULT_SEED) -> RunManifest:
    """Run everything the config asks for and write the artifacts into out_dir."""
    cfg, diag = load_config(config_path)
    return run_config(cfg, diag, out_dir, seed)


def run_config(cfg: SimConfig, diag: DiagnosticsRequest, out_dir, seed: int = DEFAULT_SEED) -> RunManifest:
    started = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fwd, bwd = run_trajectories(cfg, needs_backward(cfg, diag))
    grid = fwd.grid
    manifest = RunManifest(
        config_hash=config_hash(cfg, diag),
        solver_version=__version__,
        grid={"dr": cfg.dr, "n": cfg.n, "R_max": grid.R_max, "dt": abs(fwd.dt)},
        steps=fwd.steps + (bwd.steps if bwd is not None else 0),
        snapshots=len(fwd.snapshots),
    )

    def emit(name: str) -> Path:
        manifest.outputs.append(name)
        return out / name

    write_json(emit("config.json"), config_to_dict(cfg, diag))
    rows = diagnostic_rows(fwd, bwd if diag.q else None, mu2=diag.mu2, char_etas=diag.char_etas)
    write_diagnostics_csv(emit("diagnostics.csv"), rows, cfg.kappa_list, diag.char_etas)
    if diag.energy_drift_tol is not None and rows:
        e0 = rows[0].E_total
        drift = max(abs(r.E_total - e0) for r in rows) / e0 if e0 else 0.0
        manifest.gates["energy_drift"] = drift <= diag.energy_drift_tol

    if bwd is not None and cfg.morawetz_R_list:
        reports = morawetz_reports(cfg, fwd, bwd)
        write_json(emit("morawetz.json"), [r.to_dict() for r in reports])
        for k, rep in enumerate(reports):
            manifest.gates[f"morawetz_{k}"] = rep.relative_residual <= diag.morawetz_tol

    if diag.nakanishi and fwd.t_max >= 1.0:
        rep = nakanishi_cumulative(fwd, fwd.t_max)
        write_json(emit("nakanishi.json"), asdict(rep))

    if diag.radiation is not None:
        write_json(emit("radiation.json"), radiation_report(fwd, diag.radiation))

    verdicts = inequality_verdicts(cfg, diag, fwd, seed)
    if verdicts:
        write_json(emit("verdicts.json"), [v.to_dict() for v in verdicts])
        manifest.gates["inequalities"] = all(v.passed for v in verdicts)

    if diag.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        index = []
        for k, s in enumerate(fwd.snapshots):
            name = f"snapshots/snap_{k:06d}.csv"
            write_snapshot(out / name, s, grid)
            manifest.outputs.append(name)
            index.append({"file": name, "t": s.t})
        write_json(emit("snapshots/index.json"), index)

    manifest.wall_clock = time.perf_counter() - started
    manifest.outputs.append("manifest.json")
    write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def observed_orders(errors) -> list[float]:
    """log2 of successive error ratios along a halving ladder."""
    return [
        math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(errors, errors[1:])
    ]
