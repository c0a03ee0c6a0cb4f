"""Trainer command line: build a dataset, train, export weights + metrics
+ parity fixture from one JSON config."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fanet-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train from a JSON config")
    p_train.add_argument("config", type=Path)
    p_train.add_argument("--out", type=Path, default=Path("trained"))

    p_ft = sub.add_parser("finetune", help="fine-tune an exported container")
    p_ft.add_argument("container", type=Path)
    p_ft.add_argument("config", type=Path, help="dataset config for the target room")
    p_ft.add_argument("--epochs", type=int, default=100)
    p_ft.add_argument("--out", type=Path, default=Path("finetuned.fanw"))

    args = parser.parse_args(argv)
    return {"train": _cmd_train, "finetune": _cmd_finetune}[args.command](args)


def _cmd_train(args) -> int:
    from .data import DatasetSpec, build_dataset, constant_mean_baseline_mae
    from .fixtures import export_parity_fixture
    from .train import TrainConfig, evaluate_mae, train, write_metrics_csv
    from .acoustics import chirp

    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    dataset = build_dataset(DatasetSpec.from_dict(config.get("dataset", {})))
    print(
        f"dataset: {len(dataset.train)} train / {len(dataset.val)} val / "
        f"{len(dataset.test)} test"
    )
    model, metrics = train(dataset, TrainConfig.from_dict(config.get("train", {})))

    args.out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(metrics, args.out / "metrics.csv")
    export_parity_fixture(model, [chirp(0.2), chirp(0.4)], args.out)
    test_mae = evaluate_mae(model, dataset.test) if dataset.test else float("nan")
    baseline = (
        constant_mean_baseline_mae(dataset.train, dataset.test)
        if dataset.test
        else float("nan")
    )
    print(f"test MAE {test_mae:.3f} m (constant-mean baseline {baseline:.3f} m)")
    print(f"wrote {args.out}/model.fanw, metrics.csv, fixture.npz")
    return 0


def _cmd_finetune(args) -> int:
    from .container import load_container, save_container
    from .data import DatasetSpec, build_dataset
    from .train import finetune

    model = load_container(args.container)
    with open(args.config, "r", encoding="utf-8") as fh:
        spec = DatasetSpec.from_dict(json.load(fh).get("dataset", {}))
    dataset = build_dataset(spec)
    finetune(model, dataset.train, epochs=args.epochs)
    save_container(model, args.out)
    print(f"fine-tuned for {args.epochs} epochs -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
