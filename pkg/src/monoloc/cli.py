"""Command-line entry points: run / sweep / calibrate / inspect-weights / count."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="monoloc",
        description="Single-microphone sound source localization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("--out", type=Path, default=Path("out"))
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--plot-data", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a sweep file (scenarios x seeds)")
    p_sweep.add_argument("sweep_file", type=Path)
    p_sweep.add_argument("--out", type=Path, default=Path("out"))

    p_cal = sub.add_parser("calibrate", help="fit a DRR calibration for a scenario")
    p_cal.add_argument("scenario", type=Path)
    p_cal.add_argument("--out", type=Path, default=Path("calibration.json"))

    p_insp = sub.add_parser("inspect-weights", help="describe a weight container")
    p_insp.add_argument("container", type=Path)

    p_count = sub.add_parser("count", help="parameter / MAC report for a config")
    p_count.add_argument(
        "config", nargs="?", default=None, help="JSON config file (default: standard architecture)"
    )
    p_count.add_argument("--frames", type=int, default=22)

    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


def _cmd_run(args) -> int:
    from .harness import ScenarioConfig, run_scenario, write_run_outputs

    scenario = ScenarioConfig.from_file(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    result = run_scenario(scenario)
    stem = f"{args.scenario.stem}_seed{scenario.seed}"
    trace = write_run_outputs(result, args.out, stem, plot_data=args.plot_data)
    print(
        f"{stem}: {result.processed_windows} windows, "
        f"final error {result.final_error_m:.3f} m, "
        f"last-quarter MAE {result.mae_last_quarter_m:.3f} m -> {trace}"
    )
    return 0


def _cmd_sweep(args) -> int:
    from .harness import SweepSpec, sweep

    rows = sweep(SweepSpec.from_file(args.sweep_file), args.out)
    print("\n".join(rows))
    return 0


def _cmd_calibrate(args) -> int:
    from .harness import ScenarioConfig, build_calibration

    scenario = ScenarioConfig.from_file(args.scenario)
    calibration = build_calibration(
        scenario, scenario.estimator.get("calibration_positions")
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(calibration.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"calibration: slope {calibration.slope:.4f}, intercept "
        f"{calibration.intercept:.4f}, usable={calibration.usable} -> {args.out}"
    )
    return 0


def _cmd_inspect(args) -> int:
    from .fanet import count_parameters, load_weights_file

    container = load_weights_file(args.container)
    cfg = container.config
    print(f"format version: {container.version}")
    print(f"config: {cfg.to_dict()}")
    print(f"tensors: {len(container.tensors)}")
    for name, tensor in container.tensors.items():
        print(f"  {name:40s} {str(tuple(tensor.shape)):18s} {tensor.size:7d}")
    total = container.total_elements()
    print(f"total elements: {total} (config requires {count_parameters(cfg)})")
    return 0


def _cmd_count(args) -> int:
    from .fanet import (
        FaNetConfig,
        count_macs,
        count_parameters,
        count_trainable_parameters,
    )

    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = FaNetConfig.from_dict(json.load(fh))
    else:
        config = FaNetConfig()
    print(f"config: {config.to_dict()}")
    print(f"stored tensor elements: {count_parameters(config)}")
    print(f"trainable parameters:   {count_trainable_parameters(config)}")
    print(f"MACs for T={args.frames}: {count_macs(config, args.frames):,}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "calibrate": _cmd_calibrate,
    "inspect-weights": _cmd_inspect,
    "count": _cmd_count,
}


if __name__ == "__main__":
    sys.exit(main())
