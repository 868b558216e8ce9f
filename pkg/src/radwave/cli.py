"""Command-line entry point: ``radwave <subcommand> --config cfg.json --out dir``."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .core import BlowUpError, ConfigError, ContractError, SimConfig
from .diagnostics import total_energy
from .ineqlab import DEFAULT_SEED
from .pipeline import (
    DiagnosticsRequest,
    RadiationRequest,
    config_hash,
    fit_decay_rate,
    inequality_verdicts,
    load_config,
    morawetz_reports,
    observed_orders,
    radiation_report,
    read_diagnostics_csv,
    run_config,
    run_trajectories,
    write_json,
)
from .solver import evolve

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 1, 2, 3, 4


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> bool:
    cfg, diag = load_config(args.config)
    manifest = run_config(cfg, diag, args.out, args.seed)
    for name, ok in manifest.gates.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    print(f"wrote {len(manifest.outputs)} files to {args.out}")
    return manifest.passed


def cmd_identity(args) -> bool:
    cfg, diag = load_config(args.config)
    if not cfg.morawetz_R_list:
        raise ConfigError("identity needs a nonempty morawetz_R_list")
    fwd, bwd = run_trajectories(cfg, backward=True)
    reports = morawetz_reports(cfg, fwd, bwd)
    write_json(_out_dir(args) / "morawetz.json", [r.to_dict() for r in reports])
    ok = True
    for rep in reports:
        good = rep.relative_residual <= diag.morawetz_tol
        ok &= good
        print(f"R={rep.R:g} r={rep.r:g}: relative residual {rep.relative_residual:.3e}, "
              f"slack {rep.slack:.4g} -> {'pass' if good else 'FAIL'}")
    return ok


def cmd_radiation(args) -> bool:
    cfg, diag = load_config(args.config)
    fwd = evolve(cfg.with_changes(direction="forward"))
    req = diag.radiation or RadiationRequest()
    report = radiation_report(fwd, req)
    report["twice_energy"] = 2 * total_energy(fwd.initial, fwd.grid, cfg.p)
    write_json(_out_dir(args) / "radiation.json", report)
    print(f"pi * int g+^2 = {report['energy']:.6g}   2E = {report['twice_energy']:.6g}")
    return True


def cmd_inequalities(args) -> bool:
    if args.config:
        cfg, diag = load_config(args.config)
        fwd = evolve(cfg.with_changes(direction="forward"))
    else:
        cfg = SimConfig(dr=0.02, n=1024, t_final=5.0)
        diag = DiagnosticsRequest(hardy_kappas=(0.5,), family_finite_speed=True)
        fwd = evolve(cfg)
    verdicts = inequality_verdicts(cfg, diag, fwd, args.seed)
    write_json(_out_dir(args) / "verdicts.json", [v.to_dict() for v in verdicts])
    names = sorted({v.name for v in verdicts})
    ok = True
    for name in names:
        group = [v for v in verdicts if v.name == name]
        worst = max(group, key=lambda v: v.ratio / v.constant_bound)
        passed = all(v.passed for v in group)
        ok &= passed
        print(f"{name}: {len(group)} checks, worst ratio {worst.ratio:.4g} "
              f"(bound {worst.constant_bound:.4g}) -> {'pass' if passed else 'FAIL'}")
    return ok


def _converge_member(cfg: SimConfig) -> dict:
    fwd, bwd = run_trajectories(cfg, backward=bool(cfg.morawetz_R_list))
    grid, p = fwd.grid, cfg.p
    e0 = total_energy(fwd.initial, grid, p)
    drift = max(abs(total_energy(s, grid, p) - e0) for s in fwd.snapshots) / e0
    out = {"dr": cfg.dr, "n": cfg.n, "energy_drift": drift}
    if bwd is not None:
        out["morawetz_residuals"] = [r.relative_residual for r in morawetz_reports(cfg, fwd, bwd)]
    return out


def cmd_converge(args) -> bool:
    cfg, _ = load_config(args.config)
    ladder = [
        cfg.with_changes(dr=cfg.dr / f, n=cfg.n * f, output_every=cfg.output_every * f)
        for f in (1, 2, 4)
    ]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            levels = list(pool.map(_converge_member, ladder))
    else:
        levels = [_converge_member(c) for c in ladder]
    report = {
        "config_hash": config_hash(cfg),
        "levels": levels,
        "energy_drift_orders": observed_orders([lv["energy_drift"] for lv in levels]),
    }
    if cfg.morawetz_R_list:
        report["morawetz_orders"] = [
            observed_orders([lv["morawetz_residuals"][k] for lv in levels])
            for k in range(len(cfg.morawetz_R_list))
        ]
    write_json(_out_dir(args) / "converge.json", report)
    for lv in levels:
        print(f"dr={lv['dr']:.6g}: energy drift {lv['energy_drift']:.3e}")
    print("observed orders:", ", ".join(f"{o:.2f}" for o in report["energy_drift_orders"]))
    return True


def cmd_ratefit(args) -> bool:
    cols = read_diagnostics_csv(args.csv)
    if args.column not in cols:
        raise ConfigError(f"column {args.column!r} not in {args.csv}")
    t, v = cols["t"], cols[args.column]
    keep = (t >= args.t_min) & (t <= args.t_max)
    exponent, r2 = fit_decay_rate(list(zip(t[keep], v[keep])))
    result = {"column": args.column, "t_min": args.t_min, "t_max": args.t_max,
              "exponent": exponent, "r_squared": r2}
    if args.out:
        write_json(_out_dir(args) / f"ratefit_{args.column}.json", result)
    print(json.dumps(result))
    return True


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radwave", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for synthetic families")
        p.add_argument("--gate", action="store_true", help="exit nonzero when a check fails")

    common(sub.add_parser("run", help="full pipeline"))
    common(sub.add_parser("identity", help="Morawetz identity reports"))
    common(sub.add_parser("radiation", help="radiation profile extraction"))
    common(sub.add_parser("inequalities", help="inequality lab"), config_required=False)
    common(sub.add_parser("converge", help="refinement ladder dr, dr/2, dr/4"))
    rf = sub.add_parser("ratefit", help="decay exponent fit on a diagnostics CSV")
    rf.add_argument("--csv", required=True)
    rf.add_argument("--column", default="e_in")
    rf.add_argument("--t-min", type=float, default=20.0)
    rf.add_argument("--t-max", type=float, default=200.0)
    rf.add_argument("--out", default=None)
    rf.add_argument("--gate", action="store_true")
    return ap


COMMANDS = {
    "run": cmd_run,
    "identity": cmd_identity,
    "radiation": cmd_radiation,
    "inequalities": cmd_inequalities,
    "converge": cmd_converge,
    "ratefit": cmd_ratefit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ok = COMMANDS[args.command](args)
    except (ConfigError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"solver blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.gate and not ok:
        return EXIT_GATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
