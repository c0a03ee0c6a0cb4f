import json
import math

import numpy as np
import pytest

from monoloc.estimators import DistanceMeasurement, EstimatorError
from monoloc.harness import (
    ScenarioConfig,
    SweepSpec,
    TrajectorySpec,
    build_calibration,
    build_estimator,
    default_scenario,
    generate_trajectory,
    run_scenario,
    segment_counts,
    stream_segments,
    sweep,
    write_run_outputs,
)


def oracle_scenario(**overrides):
    defaults = dict(
        duration_s=5.1,
        estimator={"kind": "oracle", "sigma_m": 0.05},
        seed=1,
    )
    defaults.update(overrides)
    return default_scenario(**defaults)


# ---------------------------------------------------------------------------
# trajectories


def test_circle_pose_at_start():
    spec = TrajectorySpec(
        kind="circle", center=(2.0, 2.0), radius_m=1.0, angular_speed_rad_s=math.pi / 10
    )
    pose = generate_trajectory(spec, duration_s=1.0)[0]
    assert (pose.x_m, pose.y_m) == pytest.approx((3.0, 2.0))
    assert pose.theta_rad == pytest.approx(math.pi / 2)


def test_circle_closes_after_full_period():
    spec = TrajectorySpec(
        kind="circle", center=(2.0, 2.0), radius_m=1.0,
        angular_speed_rad_s=2 * math.pi / 10, sample_period_s=0.5,
    )
    poses = generate_trajectory(spec, duration_s=10.0)
    assert poses[0].x_m == pytest.approx(poses[-1].x_m, abs=1e-9)
    assert poses[0].y_m == pytest.approx(poses[-1].y_m, abs=1e-9)


def test_waypoints_linear_uniform_speed():
    spec = TrajectorySpec(
        kind="waypoints", waypoints=[[1.0, 1.0], [3.0, 2.0]], sample_period_s=0.25
    )
    poses = generate_trajectory(spec, duration_s=1.0)
    assert len(poses) == 5
    xs = [p.x_m for p in poses]
    np.testing.assert_allclose(xs, np.linspace(1.0, 3.0, 5), atol=1e-12)
    heading = math.atan2(1.0, 2.0)
    assert all(p.theta_rad == pytest.approx(heading) for p in poses)


def test_trajectory_heading_is_tangent():
    spec = TrajectorySpec(kind="circle", center=(3.0, 3.0), radius_m=1.0,
                          angular_speed_rad_s=0.5)
    poses = generate_trajectory(spec, duration_s=4.0)
    for before, after in zip(poses[:-1], poses[1:]):
        motion = math.atan2(after.y_m - before.y_m, after.x_m - before.x_m)
        delta = math.remainder(after.theta_rad - before.theta_rad, 2 * math.pi)
        mid_heading = before.theta_rad + 0.5 * delta
        assert abs(math.remainder(motion - mid_heading, 2 * math.pi)) < 0.05


def test_trajectory_validation():
    with pytest.raises(ValueError):
        TrajectorySpec(kind="spiral")
    with pytest.raises(ValueError):
        TrajectorySpec(kind="waypoints", waypoints=[[1.0, 1.0]])


def test_path_leaving_room_rejected():
    with pytest.raises(ValueError, match="margin"):
        default_scenario(
            trajectory=TrajectorySpec(kind="circle", center=(0.5, 3.0), radius_m=1.0,
                                      angular_speed_rad_s=0.1),
            estimator={"kind": "oracle", "sigma_m": 0.1},
        )


# ---------------------------------------------------------------------------
# streaming


def test_segment_accounting():
    scenario = oracle_scenario(duration_s=10.0)
    published, windows = segment_counts(scenario)
    assert published == 100
    assert windows == 99  # 0.2 s windows over 0.1 s publishes


def test_window_timing_and_overlap():
    scenario = oracle_scenario(duration_s=2.0)
    windows = list(stream_segments(scenario, render_audio=False))
    t = [w.t_end_s for w in windows]
    assert t[0] == pytest.approx(0.2)
    np.testing.assert_allclose(np.diff(t), 0.1)
    # consecutive windows overlap by process - publish = 0.1 s
    assert scenario.segment_process_s - scenario.segment_publish_s == pytest.approx(0.1)


def test_window_audio_length_and_determinism():
    scenario = oracle_scenario(duration_s=1.0)
    first = list(stream_segments(scenario))
    second = list(stream_segments(scenario))
    for a, b in zip(first, second):
        assert len(a.audio) == int(0.2 * 16000)
        np.testing.assert_array_equal(a.audio, b.audio)


def test_stationary_robot_steady_state_windows_identical():
    scenario = oracle_scenario(
        duration_s=3.0,
        trajectory=TrajectorySpec(kind="circle", center=(2.5, 3.0), radius_m=0.5,
                                  angular_speed_rad_s=0.0),
    )
    windows = list(stream_segments(scenario))
    # skip the onset: windows that still see the pre-t=0 silence ramp differ
    rir_s = 0.5
    steady = [w for w in windows if w.t_end_s - scenario.segment_process_s >= rir_s]
    assert len(steady) > 10
    for w in steady[1:]:
        np.testing.assert_array_equal(w.audio, steady[0].audio)


def test_noise_windows_deterministic_per_seed():
    scenario = oracle_scenario(duration_s=1.0, snr_db=10.0)
    a = [w.audio for w in stream_segments(scenario)]
    b = [w.audio for w in stream_segments(scenario)]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


# ---------------------------------------------------------------------------
# scenario config


def test_scenario_file_roundtrip(tmp_path):
    scenario = oracle_scenario()
    path = tmp_path / "scenario.json"
    scenario.save(path)
    loaded = ScenarioConfig.from_file(path)
    assert loaded.to_dict() == scenario.to_dict()


def test_scenario_rejects_bad_segmenting():
    with pytest.raises(ValueError, match="multiple"):
        oracle_scenario(segment_publish_s=0.1, segment_process_s=0.25)


def test_scenario_rejects_unknown_fields():
    data = oracle_scenario().to_dict()
    data["bogus"] = 1
    with pytest.raises(ValueError, match="bogus"):
        ScenarioConfig.from_dict(data)


def test_scenario_rejects_outside_source():
    with pytest.raises(ValueError, match="outside"):
        oracle_scenario(source_pos=(9.0, 1.0))


# ---------------------------------------------------------------------------
# runs


def test_oracle_run_record_count_matches_windows():
    scenario = oracle_scenario()
    result = run_scenario(scenario)
    _, windows = segment_counts(scenario)
    assert result.processed_windows == windows
    assert result.published_segments == 51
    assert all(s.info.accepted for s in result.steps)
    assert result.final_error_m < 1.0


def test_run_trace_deterministic(tmp_path):
    scenario = oracle_scenario(duration_s=3.0)
    first = write_run_outputs(run_scenario(scenario), tmp_path / "a", "run")
    second = write_run_outputs(run_scenario(scenario), tmp_path / "b", "run")
    assert first.read_bytes() == second.read_bytes()


def test_estimator_failures_skip_update_not_run(monkeypatch):
    import monoloc.harness as harness

    class Flaky:
        needs_audio = False

        def __init__(self):
            self.calls = 0
            self.rng = np.random.default_rng(0)

        def estimate(self, segment, *, timestamp_s, true_distance_m=None, segment_len_s=0.0):
            self.calls += 1
            if self.calls % 3 == 0:
                raise EstimatorError("synthetic failure")
            return DistanceMeasurement(true_distance_m, 0.01, timestamp_s, segment_len_s)

    monkeypatch.setattr(harness, "build_estimator", lambda scenario: Flaky())
    scenario = oracle_scenario(duration_s=3.0)
    result = run_scenario(scenario)
    _, windows = segment_counts(scenario)
    assert result.processed_windows == windows
    failed = [s for s in result.steps if s.measurement is None]
    assert len(failed) == windows // 3
    assert all(not s.info.accepted for s in failed)


def test_quasi_static_consistency_under_sample_period_halving():
    base = oracle_scenario(duration_s=5.1)
    halved = oracle_scenario(duration_s=5.1)
    halved.trajectory.sample_period_s = base.trajectory.sample_period_s / 2.0
    e1 = run_scenario(base).final_error_m
    e2 = run_scenario(halved).final_error_m
    assert abs(e1 - e2) <= 0.05 * max(e1, 1e-9)


def test_drr_calibration_and_run(tmp_path):
    scenario = default_scenario(
        duration_s=6.1, estimator={"kind": "drr"}, seed=0, max_order=15
    )
    calibration = build_calibration(scenario)
    assert calibration.usable and calibration.slope < 0

    # run with the calibration persisted to a file
    cal_path = tmp_path / "cal.json"
    with open(cal_path, "w") as fh:
        json.dump(calibration.to_dict(), fh)
    scenario.estimator = {"kind": "drr", "calibration_file": str(cal_path)}
    result = run_scenario(scenario)
    assert result.processed_windows == 60
    assert all(s.measurement is not None for s in result.steps)


def test_fanet_estimator_in_harness(tmp_path):
    from monoloc.fanet import FaNetConfig, build, save_weights

    weights_path = tmp_path / "model.fanw"
    save_weights(build(FaNetConfig(), seed=0)).save(weights_path)
    scenario = oracle_scenario(
        duration_s=1.5,
        estimator={"kind": "fanet", "weights_file": str(weights_path)},
        max_order=10,
    )
    result = run_scenario(scenario)
    assert result.processed_windows == 14
    assert all(s.measurement is not None for s in result.steps)


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_empty_report(tmp_path):
    rows = sweep(SweepSpec(scenario_files=[], seeds=[0]), tmp_path)
    assert rows == ["scenario,seed,estimator,windows,final_error_m,mae_last_quarter_m,status"]
    assert (tmp_path / "aggregate.csv").exists()


def test_sweep_rows_and_rerun_identical(tmp_path):
    scenario = oracle_scenario(duration_s=2.0)
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    scenario.save(a)
    scenario.save(b)
    sweep_spec = SweepSpec(scenario_files=[str(a), str(b)], seeds=[0, 1])
    rows = sweep(sweep_spec, tmp_path / "out1")
    assert len(rows) == 5  # header + 2 scenarios x 2 seeds
    assert all(r.endswith("ok") for r in rows[1:])
    sweep(sweep_spec, tmp_path / "out2")
    assert (tmp_path / "out1/aggregate.csv").read_bytes() == (
        tmp_path / "out2/aggregate.csv"
    ).read_bytes()


def test_sweep_records_failures_and_continues(tmp_path):
    good = oracle_scenario(duration_s=2.0)
    good_path = tmp_path / "good.json"
    good.save(good_path)
    bad_path = tmp_path / "bad.json"
    bad_path.write_text("{\"room\": {\"length_m\": -1}}")
    rows = sweep(SweepSpec(scenario_files=[str(bad_path), str(good_path)], seeds=[0]), tmp_path / "out")
    assert len(rows) == 3
    assert "failed" in rows[1]
    assert rows[2].endswith("ok")


def test_sweep_spec_seed_range(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({"scenarios": ["s.json"], "seeds": {"start": 3, "count": 4}}))
    spec = SweepSpec.from_file(path)
    assert spec.seeds == [3, 4, 5, 6]


# ---------------------------------------------------------------------------
# CLI


def test_cli_run_and_count(tmp_path, capsys):
    from monoloc.cli import main

    scenario = oracle_scenario(duration_s=2.0)
    path = tmp_path / "scenario.json"
    scenario.save(path)
    assert main(["run", str(path), "--out", str(tmp_path / "out"), "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "final error" in out
    assert (tmp_path / "out" / "scenario_seed5.trace.csv").exists()

    assert main(["count", "--frames", "22"]) == 0
    out = capsys.readouterr().out
    assert "43654" in out


def test_cli_sweep(tmp_path, capsys):
    from monoloc.cli import main

    scenario = oracle_scenario(duration_s=2.0)
    spath = tmp_path / "s.json"
    scenario.save(spath)
    sweep_file = tmp_path / "sweep.json"
    sweep_file.write_text(json.dumps({"scenarios": ["s.json"], "seeds": [0, 1]}))
    assert main(["sweep", str(sweep_file), "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert out.count(",ok") == 2
    assert (tmp_path / "out" / "aggregate.csv").exists()


def test_cli_inspect_and_calibrate(tmp_path, capsys):
    from monoloc.cli import main
    from monoloc.fanet import FaNetConfig, build, save_weights

    weights_path = tmp_path / "m.fanw"
    save_weights(build(FaNetConfig(), seed=1)).save(weights_path)
    assert main(["inspect-weights", str(weights_path)]) == 0
    assert "total elements: 43654" in capsys.readouterr().out

    scenario = default_scenario(duration_s=2.0, estimator={"kind": "drr"}, max_order=12)
    spath = tmp_path / "scenario.json"
    scenario.save(spath)
    cal_path = tmp_path / "cal.json"
    assert main(["calibrate", str(spath), "--out", str(cal_path)]) == 0
    data = json.loads(cal_path.read_text())
    assert data["usable"] is True
