"""Command-line front end.

Subcommands:
  run      execute a campaign from a preset and/or config file, write the
           summary JSON, series CSV, optional per-trajectory CSVs, and the
           report figures
  check    run the pointwise verification suites and report worst margins
  presets  list the built-in scenarios

Exit codes: 0 success, 2 configuration/validation error, 3 campaign
failure, 4 verification-suite violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .checks import SUITES
from .config import (PRESET_NAMES, ConfigError, format_config, parse_config,
                     preset_config, preset_descriptions)
from .ensemble import CampaignError, run_campaign, summary_dict, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAMPAIGN = 3
EXIT_CHECK = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellstab",
        description="Two-qubit Bell-state stabilization under continuous "
                    "measurement: trajectory campaigns and verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte Carlo campaign")
    run_p.add_argument("--preset", choices=PRESET_NAMES,
                       help="start from a built-in scenario")
    run_p.add_argument("--config", type=Path,
                       help="campaign config file (overrides preset values)")
    run_p.add_argument("--n-traj", type=int, help="number of trajectories")
    run_p.add_argument("--seed", type=int, help="master RNG seed")
    run_p.add_argument("--dt", type=float, help="integration step")
    run_p.add_argument("--t-final", type=float, help="time horizon")
    run_p.add_argument("--out-dir", type=Path, default=Path("out"),
                       help="output directory (default: out)")
    run_p.add_argument("--workers", type=int, help="concurrent trajectories")
    run_p.add_argument("--per-trajectory", action="store_true",
                       help="also write one CSV per trajectory")
    run_p.add_argument("--figures", dest="figures", action="store_true",
                       default=True, help="render report figures (default)")
    run_p.add_argument("--no-figures", dest="figures", action="store_false")
    run_p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")

    check_p = sub.add_parser("check", help="run verification suites")
    check_p.add_argument("--suite", choices=sorted(SUITES) + ["all"],
                         default="all")
    check_p.add_argument("--samples", type=int,
                         help="override the per-suite sample count")
    check_p.add_argument("--seed", type=int, help="base RNG seed")

    sub.add_parser("presets", help="list built-in scenarios")
    return parser


def _resolve_run_config(args):
    if args.preset is None and args.config is None:
        raise ConfigError("run needs --preset and/or --config")
    seed = args.seed if args.seed is not None else 0
    cfg = preset_config(args.preset, seed=seed) if args.preset else None
    if args.config is not None:
        cfg = parse_config(args.config)

    sde_updates = {}
    if args.seed is not None:
        sde_updates["rng_master_seed"] = args.seed
    if args.dt is not None:
        sde_updates["dt"] = args.dt
    if args.t_final is not None:
        sde_updates["t_final"] = args.t_final
    if sde_updates:
        cfg = dataclasses.replace(cfg, sde=dataclasses.replace(cfg.sde, **sde_updates))
    camp_updates = {}
    if args.n_traj is not None:
        camp_updates["n_traj"] = args.n_traj
    if args.workers is not None:
        camp_updates["workers"] = args.workers
    if args.per_trajectory:
        camp_updates["per_trajectory_csv"] = True
    if camp_updates:
        cfg = dataclasses.replace(cfg, **camp_updates)
    return cfg


def _cmd_run(args) -> int:
    try:
        cfg = _resolve_run_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(format_config(cfg), end="")
        return EXIT_OK
    try:
        summary = run_campaign(cfg)
    except CampaignError as exc:
        print(f"campaign failed: {exc}", file=sys.stderr)
        return EXIT_CAMPAIGN
    out_dir = args.out_dir / cfg.name
    paths = write_outputs(summary, out_dir)
    if args.figures:
        from .plotting import render_campaign_figures

        figures = render_campaign_figures(summary, out_dir / "figures")
        if figures:
            paths["figures"] = figures[0].parent
    freq = ", ".join(f"{k}={v:.3f}" for k, v in summary.frequencies.items()
                     if v > 0.0) or "none"
    slope = "n/a" if summary.exponent is None else f"{summary.exponent.slope:+.4f}"
    print(f"{cfg.name}: n_traj={cfg.n_traj} frequencies[{freq}] "
          f"unconverged={summary.n_unconverged} failed={summary.n_failed} "
          f"fitted_exponent={slope} reference_exponent="
          f"{summary.reference_exponent:+.4f}")
    print("wrote: " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def _cmd_check(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    all_ok = True
    for name in names:
        kwargs = {}
        if args.samples is not None:
            kwargs["n_samples"] = args.samples
        if args.seed is not None:
            kwargs["seed"] = args.seed
        result = SUITES[name](**kwargs)
        print(result.describe())
        all_ok &= result.passed
    return EXIT_OK if all_ok else EXIT_CHECK


def _cmd_presets() -> int:
    for name, desc in preset_descriptions().items():
        print(f"{name:18s} {desc}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "check":
        return _cmd_check(args)
    if args.command == "presets":
        return _cmd_presets()
    parser.error(f"unknown command {args.command!r}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
