import numpy as np
import pytest
import torch

from fanet_trainer.data import DatasetSpec, build_dataset, constant_mean_baseline_mae


def small_spec(**overrides):
    defaults = dict(
        n_rooms=1, rt60_range_s=(0.6, 0.6), mics_per_room=3, sources_per_mic=4,
        seed=0, crop_lengths_s=(0.2,),
    )
    defaults.update(overrides)
    return DatasetSpec(**defaults)


def test_sim1_analog_counts():
    spec = DatasetSpec(n_rooms=1, mics_per_room=30, sources_per_mic=10, seed=0)
    dataset = build_dataset(spec)
    assert len(dataset) == 300
    assert len(dataset.train) == 240
    assert len(dataset.val) == 15
    assert len(dataset.test) == 45


def test_labels_are_exact_geometry():
    dataset = build_dataset(small_spec())
    for sample in dataset.train + dataset.val + dataset.test:
        assert sample.distance_m == float(np.linalg.norm(sample.src - sample.mic))


def test_held_out_rooms_no_leakage():
    spec = DatasetSpec(
        n_rooms=10, mics_per_room=2, sources_per_mic=2,
        room_split_mode="held-out-rooms", split=(0.85, 0.05, 0.1), seed=1,
        crop_lengths_s=(0.2,),
    )
    dataset = build_dataset(spec)
    train_rooms = {s.room_id for s in dataset.train} | {s.room_id for s in dataset.val}
    test_rooms = {s.room_id for s in dataset.test}
    assert test_rooms and not (train_rooms & test_rooms)


def test_dataset_deterministic_per_seed():
    a = build_dataset(small_spec(seed=7))
    b = build_dataset(small_spec(seed=7))
    c = build_dataset(small_spec(seed=8))
    assert [s.distance_m for s in a.train] == [s.distance_m for s in b.train]
    assert torch.equal(a.train[0].features, b.train[0].features)
    assert [s.distance_m for s in a.train] != [s.distance_m for s in c.train]


def test_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec(split=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        DatasetSpec(n_rooms=0)
    with pytest.raises(ValueError):
        DatasetSpec(room_split_mode="bogus")


def test_baseline_mae_definition():
    dataset = build_dataset(small_spec())
    mean = np.mean([s.distance_m for s in dataset.train])
    expected = np.mean([abs(s.distance_m - mean) for s in dataset.test])
    assert constant_mean_baseline_mae(dataset.train, dataset.test) == pytest.approx(expected)
