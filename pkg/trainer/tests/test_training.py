"""Training acceptance: desk-scale dataset bounds, overfit sanity, parity
artifacts for the inference package, and fine-tune improvement on a new room.

The expensive piece (training the one-room model) runs once per session via a
module fixture. Run with ``pytest -s`` to see the PASS lines.
"""

import math
from pathlib import Path

import numpy as np
import pytest
import torch

from fanet_trainer.acoustics import chirp
from fanet_trainer.container import export_container_bytes, load_container
from fanet_trainer.data import DatasetSpec, build_dataset, constant_mean_baseline_mae
from fanet_trainer.fixtures import export_parity_fixture
from fanet_trainer.train import (
    DivergenceError,
    TrainConfig,
    evaluate_mae,
    finetune,
    train,
    write_metrics_csv,
)

ARTIFACTS = Path(__file__).resolve().parent.parent.parent / "artifacts" / "parity"


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def sim1_run(tmp_path_factory):
    spec = DatasetSpec(
        n_rooms=1,
        rt60_range_s=(0.6, 0.6),
        mics_per_room=30,
        sources_per_mic=10,
        seed=0,
        crop_lengths_s=(0.2, 0.4),
    )
    dataset = build_dataset(spec)
    model, metrics = train(dataset, TrainConfig(epochs=70, seed=0))
    write_metrics_csv(metrics, tmp_path_factory.mktemp("metrics") / "metrics.csv")
    return model, dataset, metrics


def test_desk_scale_training_bounds(sim1_run):
    model, dataset, _ = sim1_run
    mae = evaluate_mae(model, dataset.test)
    baseline = constant_mean_baseline_mae(dataset.train, dataset.test)
    _report(
        "desk-scale training: test MAE < 0.5 m and < 0.5x constant-mean baseline",
        mae < 0.5 and mae < 0.5 * baseline,
        f"mae={mae:.3f}, baseline={baseline:.3f}",
    )


def test_parity_artifacts_reproduce_in_inference_package(sim1_run):
    from monoloc.fanet import build, count_parameters, load_weights_file
    from monoloc.features import SubbandTensor

    model, _, _ = sim1_run
    container_path, fixture_path = export_parity_fixture(
        model, [chirp(0.2), chirp(0.4)], ARTIFACTS
    )
    container = load_weights_file(container_path)
    assert container.total_elements() == count_parameters(container.config)
    inference = build(container.config, weights=container)

    fixture = np.load(fixture_path)
    worst = 0.0
    frame_counts = set()
    for i in range(2):
        x = SubbandTensor(fixture[f"input_{i}"], container.config.subbands)
        expected = fixture[f"output_{i}"]
        got = inference.forward(x).values
        worst = max(worst, float(np.max(np.abs(got - expected))))
        frame_counts.add(len(expected))
    _report(
        "cross-implementation parity within 1e-4 per frame (T=22 and T=47)",
        worst <= 1e-4 and frame_counts == {22, 47},
        f"worst={worst:.2e}",
    )


def test_finetune_improves_unseen_room(sim1_run):
    model, _, _ = sim1_run
    room_spec = DatasetSpec(
        n_rooms=1,
        rt60_range_s=(0.45, 0.45),
        mics_per_room=3,
        sources_per_mic=5,
        split=(1.0, 0.0, 0.0),
        seed=99,
        crop_lengths_s=(0.2, 0.4),
    )
    room = build_dataset(room_spec)
    finetune_set = room.train[:5]  # the first microphone's five source positions
    held_out = room.train[5:]

    before = evaluate_mae(model, held_out)
    adapted = load_container_bytes(export_container_bytes(model))
    finetune(adapted, finetune_set, epochs=100, seed=0)
    after = evaluate_mae(adapted, held_out)
    _report(
        "fine-tune on 5 positions strictly lowers held-out MAE in that room",
        after < before,
        f"before={before:.3f}, after={after:.3f}",
    )


def load_container_bytes(data: bytes):
    import tempfile

    with tempfile.NamedTemporaryFile(suffix=".fanw") as fh:
        fh.write(data)
        fh.flush()
        return load_container(fh.name)


def test_finetune_memorizes_calibration_set(sim1_run):
    model, _, _ = sim1_run
    room = build_dataset(
        DatasetSpec(
            n_rooms=1, rt60_range_s=(0.5, 0.5), mics_per_room=1, sources_per_mic=5,
            split=(1.0, 0.0, 0.0), seed=123, crop_lengths_s=(0.2,),
        )
    )
    adapted = load_container_bytes(export_container_bytes(model))
    finetune(adapted, room.train, epochs=400, seed=0)
    mae = evaluate_mae(adapted, room.train)
    _report(
        "fine-tune set == eval set memorized to MAE < 0.05 m", mae < 0.05, f"mae={mae:.4f}"
    )


def test_overfit_memorization():
    spec = DatasetSpec(
        n_rooms=1,
        rt60_range_s=(0.6, 0.6),
        mics_per_room=4,
        sources_per_mic=5,
        split=(1.0, 0.0, 0.0),
        seed=3,
        crop_lengths_s=(0.2,),
    )
    dataset = build_dataset(spec)
    assert len(dataset.train) == 20
    # memorization of the fixed crops: augmentation off
    model, metrics = train(
        dataset, TrainConfig(epochs=400, seed=0, recrop_per_epoch=False)
    )
    mae = evaluate_mae(model, dataset.train)
    _report("overfit sanity: 20 samples memorized to MAE < 0.05 m", mae < 0.05, f"mae={mae:.4f}")

    losses = [m["train_loss"] for m in metrics]
    windows_ok = all(
        losses[i + 20] <= losses[i] + max(0.01 * losses[i], 1e-8)
        for i in range(len(losses) - 20)
    )
    _report("overfit sanity: loss non-increasing over every 20-epoch window", windows_ok)


def test_divergence_aborts_with_diagnostics():
    spec = DatasetSpec(
        n_rooms=1, mics_per_room=2, sources_per_mic=2, split=(1.0, 0.0, 0.0),
        seed=5, crop_lengths_s=(0.2,),
    )
    dataset = build_dataset(spec)
    dataset.train[0].wet_pool[:] = np.nan  # poisons every re-crop of that sample
    with pytest.raises(DivergenceError, match="epoch"):
        train(dataset, TrainConfig(epochs=2, seed=0))


def test_train_requires_samples():
    spec = DatasetSpec(
        n_rooms=1, mics_per_room=2, sources_per_mic=2, split=(1.0, 0.0, 0.0),
        seed=6, crop_lengths_s=(0.2,),
    )
    dataset = build_dataset(spec)
    dataset.train.clear()
    with pytest.raises(ValueError, match="empty"):
        train(dataset, TrainConfig(epochs=1))


def test_fixture_export_rejects_empty():
    torch.manual_seed(0)
    from fanet_trainer.model import ArchConfig, FaNet

    with pytest.raises(ValueError):
        export_parity_fixture(FaNet(ArchConfig()), [], ARTIFACTS)
