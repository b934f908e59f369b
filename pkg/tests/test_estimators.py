import logging
import math

import numpy as np
import pytest

from trackpose.estimators import (
    ChannelSpec,
    EmptyChannel,
    FeatureSchema,
    KinematicVelocityModel,
    ModelNotTrained,
    SchemaMismatch,
    Standardizer,
    TREAD_M,
    WindowBuffer,
    align_to_master_clock,
    apply_standardizer,
    crawler_kinematics,
    estimate_velocity,
    feature_matrix,
    fit_standardizer,
    local_velocity_targets,
    parse_groups,
    sliding_windows,
)
from trackpose.geometry import rot_xyz


def _schema(names, group="ic", **kwargs):
    return FeatureSchema([ChannelSpec(n, group, **kwargs) for n in names])


class TestCrawlerKinematics:
    def test_symmetric_drive(self):
        assert crawler_kinematics(1.0, 1.0) == (1.0, 0.0)

    def test_opposite_tracks(self):
        v, w = crawler_kinematics(1.0, -1.0, TREAD_M)
        assert v == 0.0
        assert w == pytest.approx(2.0 / 2.77, rel=1e-12)
        assert w == pytest.approx(0.72202, abs=5e-6)

    def test_standstill(self):
        assert crawler_kinematics(0.0, 0.0) == (0.0, 0.0)

    def test_vectorized(self):
        v, w = crawler_kinematics(np.array([1.0, 0.5]), np.array([1.0, 0.1]))
        np.testing.assert_allclose(v, [1.0, 0.3])
        np.testing.assert_allclose(w, [0.0, 0.4 / TREAD_M])

    def test_bad_tread(self):
        with pytest.raises(ValueError):
            crawler_kinematics(1.0, 1.0, tread=0.0)


class TestAlignToMasterClock:
    def test_hold_last_upsampling(self):
        master = np.arange(0.0, 0.2, 0.01)
        aligned = align_to_master_clock({"a": (np.array([0.0, 0.1]), np.array([5.0, 7.0]))}, master)
        expected = np.array([5.0] * 10 + [7.0] * 10)
        np.testing.assert_allclose(aligned["a"], expected)

    def test_passthrough_at_master_rate(self):
        master = np.arange(0.0, 0.1, 0.01)
        values = np.arange(10.0)
        aligned = align_to_master_clock({"a": (master, values)}, master)
        np.testing.assert_allclose(aligned["a"], values)

    def test_output_length_matches_master(self):
        master = np.arange(0.0, 1.0, 0.01)
        ch = {
            "slow": (np.arange(0.0, 1.0, 0.1), np.arange(10.0)),
            "fast": (master, np.ones(100)),
        }
        aligned = align_to_master_clock(ch, master)
        assert all(len(v) == len(master) for v in aligned.values())

    def test_before_first_sample_holds_first_value(self):
        master = np.arange(0.0, 0.1, 0.01)
        aligned = align_to_master_clock({"late": (np.array([0.05]), np.array([3.0]))}, master)
        np.testing.assert_allclose(aligned["late"], 3.0)

    def test_order_independent(self):
        master = np.arange(0.0, 0.5, 0.01)
        ch1 = {"a": (np.array([0.0]), np.array([1.0])), "b": (np.array([0.0]), np.array([2.0]))}
        ch2 = dict(reversed(list(ch1.items())))
        out1 = align_to_master_clock(ch1, master)
        out2 = align_to_master_clock(ch2, master)
        assert list(out1) == list(out2)
        for k in out1:
            np.testing.assert_array_equal(out1[k], out2[k])

    def test_empty_channel(self):
        with pytest.raises(EmptyChannel):
            align_to_master_clock({"a": (np.array([]), np.array([]))}, np.array([0.0]))

    def test_non_monotone_channel(self):
        with pytest.raises(ValueError):
            align_to_master_clock(
                {"a": (np.array([0.0, 0.0]), np.array([1.0, 2.0]))}, np.array([0.0])
            )


class TestStandardizer:
    def test_fit_population_stats(self):
        schema = _schema(["a"])
        std = fit_standardizer(schema, np.array([[1.0], [2.0], [3.0]]))
        assert std.mean[0] == pytest.approx(2.0)
        assert std.std[0] == pytest.approx(math.sqrt(2.0 / 3.0), rel=1e-12)
        assert std.std[0] == pytest.approx(0.81650, abs=5e-6)

    def test_transform_values(self):
        schema = _schema(["a"])
        std = fit_standardizer(schema, np.array([[1.0], [2.0], [3.0]]))
        out = std.transform(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(out.ravel(), [-1.22474, 0.0, 1.22474], atol=5e-6)

    def test_mean_input_maps_to_zero(self):
        schema = _schema(["a", "b"])
        std = fit_standardizer(schema, np.array([[1.0, 5.0], [3.0, 9.0]]))
        np.testing.assert_allclose(std.transform(np.array([2.0, 7.0])), [0.0, 0.0], atol=1e-15)

    def test_constant_channel_dropped_and_logged(self, caplog):
        schema = _schema(["a", "flat"])
        with caplog.at_level(logging.WARNING):
            std = fit_standardizer(schema, np.array([[1.0, 4.0], [2.0, 4.0], [3.0, 4.0]]))
        assert std.dropped == ("flat",)
        assert "flat" in caplog.text
        assert std.schema.names == ("a",)
        assert std.transform(np.array([2.0, 4.0])).shape == (1,)

    def test_already_standardized_is_near_identity(self, rng):
        schema = _schema(["a", "b", "c"])
        X = rng.normal(0.0, 1.0, (5000, 3))
        std = fit_standardizer(schema, X)
        assert np.abs(std.mean).max() < 0.05
        assert np.abs(std.std - 1.0).max() < 0.05

    def test_round_trip_inverse(self, rng):
        schema = _schema(["a", "b", "c", "d"])
        X = rng.normal(3.0, 2.5, (100, 4))
        std = fit_standardizer(schema, X)
        back = std.inverse(std.transform(X))
        assert np.abs(back - X).max() < 1e-12

    def test_no_standardize_channel_passes_through(self):
        schema = FeatureSchema(
            [ChannelSpec("dt", "ic", standardize=False), ChannelSpec("a", "ic")]
        )
        std = fit_standardizer(schema, np.array([[0.01, 1.0], [0.01, 2.0], [0.01, 5.0]]))
        # dt is constant but retained untouched
        assert std.dropped == ()
        out = std.transform(np.array([0.01, 2.0]))
        assert out[0] == pytest.approx(0.01)

    def test_schema_mismatch(self):
        schema = _schema(["a", "b"])
        std = fit_standardizer(schema, np.zeros((3, 2)) + np.arange(3)[:, None])
        with pytest.raises(SchemaMismatch):
            std.transform(np.zeros(3))
        with pytest.raises(SchemaMismatch):
            apply_standardizer(std, np.zeros((4, 5)))

    def test_json_round_trip(self, rng):
        schema = _schema(["a", "b"])
        std = fit_standardizer(schema, rng.normal(0, 1, (50, 2)))
        clone = Standardizer.from_json(std.to_json())
        np.testing.assert_array_equal(clone.mean, std.mean)
        np.testing.assert_array_equal(clone.keep, std.keep)
        assert clone.input_schema == std.input_schema


class TestSchema:
    def test_group_subset_preserves_order(self):
        schema = FeatureSchema(
            [
                ChannelSpec("a", "ic"),
                ChannelSpec("b", "ve"),
                ChannelSpec("c", "ic"),
                ChannelSpec("d", "bu"),
            ]
        )
        ic = schema.subset(["ic"])
        assert ic.names == ("a", "c")
        ic_ve = schema.subset(["ic", "ve"])
        assert ic_ve.names == ("a", "b", "c")
        full = schema.subset(["ic", "ve", "bu"])
        assert full.names == ("a", "b", "c", "d")
        # cumulative sets only ever extend
        assert set(ic.names) <= set(ic_ve.names) <= set(full.names)

    def test_parse_groups(self):
        assert parse_groups("ic") == ("ic",)
        assert parse_groups("ic+ve+bu") == ("ic", "ve", "bu")
        with pytest.raises(ValueError):
            parse_groups("ic+xx")

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            FeatureSchema([ChannelSpec("a", "ic"), ChannelSpec("a", "ve")])

    def test_feature_matrix_order(self):
        schema = _schema(["x1", "x2"])
        aligned = {"x2": np.array([2.0, 4.0]), "x1": np.array([1.0, 3.0])}
        mat = feature_matrix(aligned, schema)
        np.testing.assert_allclose(mat, [[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(SchemaMismatch):
            feature_matrix({"x1": np.zeros(2)}, schema)

    def test_json_round_trip(self):
        schema = FeatureSchema(
            [ChannelSpec("a", "ic", categorical=True), ChannelSpec("dt", "ic", standardize=False)]
        )
        assert FeatureSchema.from_json(schema.to_json()) == schema


class TestWindows:
    def test_buffer_front_pads_with_first_frame(self):
        buf = WindowBuffer(3, 2)
        w1 = buf.push([1.0, 10.0])
        np.testing.assert_allclose(w1, [[1, 10]] * 3)
        w2 = buf.push([2.0, 20.0])
        np.testing.assert_allclose(w2, [[1, 10], [1, 10], [2, 20]])
        w3 = buf.push([3.0, 30.0])
        np.testing.assert_allclose(w3, [[1, 10], [2, 20], [3, 30]])

    def test_sliding_windows_match_buffer(self, rng):
        X = rng.normal(0, 1, (20, 3))
        windows = sliding_windows(X, 5)
        buf = WindowBuffer(5, 3)
        for k in range(20):
            np.testing.assert_allclose(windows[k], buf.push(X[k]))

    def test_window_width_mismatch(self):
        buf = WindowBuffer(3, 2)
        with pytest.raises(SchemaMismatch):
            buf.push([1.0, 2.0, 3.0])


class TestEstimateVelocity:
    def test_kinematic_fallback(self):
        model = KinematicVelocityModel()
        v = estimate_velocity(model, np.array([1.0, 0.6]))
        np.testing.assert_allclose(v, [0.8, 0.0, 0.0])

    def test_no_model(self):
        with pytest.raises(ModelNotTrained):
            estimate_velocity(None, np.zeros(2))

    def test_schema_mismatch(self):
        model = KinematicVelocityModel()
        with pytest.raises(SchemaMismatch):
            estimate_velocity(model, np.zeros(5))

    def test_speed_clamp(self, caplog):
        model = KinematicVelocityModel()
        with caplog.at_level(logging.WARNING):
            v = estimate_velocity(model, np.array([20.0, 20.0]))
        assert np.linalg.norm(v) == pytest.approx(5.0)
        assert "clamping" in caplog.text


class TestVelocityTargets:
    def test_constant_body_velocity_recovered(self):
        # A straight run at constant yaw: global velocity rotated back must
        # reproduce the body-frame speed on every interior sample.
        n = 200
        times = np.arange(n) * 0.01
        yaw = 0.7
        v_body = np.array([1.2, 0.0, 0.0])
        v_global = rot_xyz([0.0, 0.0, yaw]) @ v_body
        poses = np.zeros((n, 6))
        poses[:, :3] = times[:, None] * v_global
        poses[:, 5] = yaw
        targets = local_velocity_targets(times, poses)
        np.testing.assert_allclose(targets[3:-3], np.tile(v_body, (n - 6, 1)), atol=1e-9)

    def test_smoothing_reduces_jitter(self, rng):
        n = 400
        times = np.arange(n) * 0.01
        poses = np.zeros((n, 6))
        poses[:, 0] = times * 1.0 + rng.normal(0, 0.001, n)
        targets = local_velocity_targets(times, poses)
        raw_diff = np.diff(poses[:, 0]) / 0.01
        assert np.std(targets[5:-5, 0]) < np.std(raw_diff)

    def test_requires_enough_samples(self):
        with pytest.raises(ValueError):
            local_velocity_targets(np.array([0.0, 0.1]), np.zeros((2, 6)))
