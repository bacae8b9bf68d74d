"""Command-line front end.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
blow-up in a non-sweep run (sweeps record blow-ups per point instead).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .evolvers import BlowUpError, DKGSystemState, NLDState
from .snapshot import save_state
from .sweep import evolve_two_sided, build_experiment, fit_rate, run_manybody_sweep, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3


def _add_common(sub, workers=False, resume=False):
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("--out", default="dkglab-out", help="output directory")
    if workers:
        sub.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    if resume:
        sub.add_argument("--resume", action="store_true", help="reuse completed sweep artifacts")
    return sub


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dkglab",
        description="Pseudospectral lab for the Dirac-Klein-Gordon system and its cubic limit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("evolve-dkg", help="evolve the coupled system once"))
    _add_common(sub.add_parser("evolve-nld", help="evolve the cubic equation once"))
    _add_common(sub.add_parser("sweep-mass", help="mass sweep against the cubic reference"),
                workers=True, resume=True)
    _add_common(sub.add_parser("sweep-mass-mb", help="many-body mass sweep"),
                workers=True, resume=True)
    fit = sub.add_parser("fit-rate", help="fit a convergence rate from a sweep CSV")
    fit.add_argument("csv_path", help="CSV with mass,error columns")
    _add_common(sub.add_parser("check-invariants", help="run the conservation self-checks"))
    _add_common(sub.add_parser("split-diagnostic", help="small/oscillatory field split"))
    return parser


def _write_step_csv(path: Path, traj) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "l2_drift", "charge", "max_amplitude", "wall_time"])
        rep = traj.report
        for i in range(len(rep.l2_drift)):
            writer.writerow(
                [
                    i,
                    repr(float(rep.l2_drift[i])),
                    repr(float(rep.charge[i])),
                    repr(float(rep.max_amplitude[i])),
                    repr(float(rep.wall_time[i])),
                ]
            )


def _cmd_evolve(args, kind: str) -> int:
    cfg = load_config(args.config)
    setup = build_experiment(cfg)
    if kind == "dkg":
        state = DKGSystemState(
            grid=setup.grid,
            psi=setup.psi,
            kg=setup.kg_state(cfg.m_sigma, cfg.m_omega),
            couplings=setup.couplings,
        )
    else:
        state = NLDState(grid=setup.grid, psi=setup.psi, couplings=setup.couplings)
    traj = evolve_two_sided(state, cfg.t_forward, cfg.t_backward, cfg.dt, cfg.sample_every)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_state(out / f"{kind}_final.snap", traj.states[-1])
    _write_step_csv(out / f"{kind}_steps.csv", traj)
    drift = float(traj.report.l2_drift.max()) if len(traj.report.l2_drift) else 0.0
    print(f"{kind}: {len(traj.report.l2_drift)} steps, samples={len(traj.times)}, "
          f"max L2 drift {drift:.3e}")
    print(f"wrote {out / f'{kind}_final.snap'} and {out / f'{kind}_steps.csv'}")
    return EXIT_OK


def _cmd_sweep(args, manybody: bool) -> int:
    from .reports import emit_report

    cfg = load_config(args.config)
    runner = run_manybody_sweep if manybody else run_sweep
    result = runner(cfg, workers=args.workers, out_dir=args.out, resume=args.resume)
    paths = emit_report(result, args.out)
    for mass, err, status in zip(result.masses, result.errors, result.statuses):
        print(f"m = {mass:8.3f}   error = {err:.6e}   [{status}]")
    if result.rate == result.rate:
        print(f"fitted rate r = {result.rate:.4f} (residual {result.residual:.4f} log10)")
    else:
        print("fitted rate unavailable (too few valid points)")
    print(f"dt used: {result.dt_used!r} (guard: {result.guard.get('certified', 'disabled')})")
    print(f"wrote {paths['csv']}")
    return EXIT_OK


def _cmd_fit_rate(args) -> int:
    try:
        rows = list(csv.DictReader(open(args.csv_path, newline="", encoding="utf-8")))
        masses = [float(r["mass"]) for r in rows]
        errors = [float(r["error"]) for r in rows]
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read mass/error columns from {args.csv_path}: {exc}")
    try:
        fit = fit_rate(masses, errors)
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(f"rate r = {fit.rate:.6f}")
    print(f"residual = {fit.residual:.6f} (log10 units)")
    return EXIT_OK


def _cmd_check_invariants(args) -> int:
    from .diagnostics import run_invariant_checks

    checks = run_invariant_checks()
    failed = 0
    for check in checks:
        tag = "PASS" if check.passed else "FAIL"
        print(f"[{tag}] {check.name}: {check.detail}")
        failed += 0 if check.passed else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else 1


def _cmd_split_diagnostic(args) -> int:
    from .diagnostics import run_split_diagnostic

    cfg = load_config(args.config)
    report = run_split_diagnostic(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "split_diagnostic.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "stilde_hsprime", "otilde_hsprime"])
        for t, sn, on in zip(report["times"], report["stilde_norms"], report["otilde_norms"]):
            writer.writerow([repr(float(t)), repr(float(sn)), repr(float(on))])
    print(f"sample_every used: {report['sample_every']}")
    print(f"sup_t ||stilde||_Hs' = {report['sup_stilde']:.6e}")
    print(f"sup_t ||otilde||_Hs' = {report['sup_otilde']:.6e}")
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evolve-dkg":
            return _cmd_evolve(args, "dkg")
        if args.command == "evolve-nld":
            return _cmd_evolve(args, "nld")
        if args.command == "sweep-mass":
            return _cmd_sweep(args, manybody=False)
        if args.command == "sweep-mass-mb":
            return _cmd_sweep(args, manybody=True)
        if args.command == "fit-rate":
            return _cmd_fit_rate(args)
        if args.command == "check-invariants":
            return _cmd_check_invariants(args)
        if args.command == "split-diagnostic":
            return _cmd_split_diagnostic(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
