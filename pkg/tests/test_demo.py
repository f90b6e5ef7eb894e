"""Tests for the demonstration container and its binary format."""

import hashlib
import struct

import numpy as np
import pytest

from hitld.demo import (
    FORMAT_VERSION,
    MAGIC,
    DatasetChecksumError,
    DatasetTruncatedError,
    DatasetVersionError,
    DemoDataset,
    DemoFrame,
    load,
    save,
)
from hitld.geometry import EulerRPY, wrap_angle
from hitld.pointcloud import ColoredPointCloud, CropBox
from hitld.policy import Observation, RobotState


def make_frame(rng, n_points=16, tick=0):
    cloud = ColoredPointCloud(rng.normal(size=(n_points, 3)), rng.uniform(size=(n_points, 3)))
    state = RobotState(rng.normal(size=3))
    action = EulerRPY(*rng.uniform(-2.5, 2.5, size=3))
    return DemoFrame(Observation(cloud, state), action, tick)


def make_dataset(rng, n_demos=2, n_frames=5, n_points=16):
    demos = [
        [make_frame(rng, n_points, tick=3 * t) for t in range(n_frames)]
        for _ in range(n_demos)
    ]
    box = CropBox(np.array([-5.0, -5.0, -5.0]), np.array([5.0, 5.0, 5.0]))
    return DemoDataset(demos=tuple(map(tuple, demos)), task="screwdriver", seed=7,
                       point_budget=n_points, crop_box=box)


def frames_equal(a: DemoFrame, b: DemoFrame) -> bool:
    return (
        a.tick == b.tick
        and np.array_equal(a.observation.cloud.positions, b.observation.cloud.positions)
        and np.array_equal(a.observation.cloud.colors, b.observation.cloud.colors)
        and np.array_equal(a.observation.state.position, b.observation.state.position)
        and np.array_equal(a.action.to_array(), b.action.to_array())
    )


class TestContainer:
    def test_frames_are_float32_exact(self):
        rng = np.random.default_rng(0)
        frame = make_frame(rng)
        pos = frame.observation.cloud.positions
        assert np.array_equal(pos, pos.astype(np.float32).astype(np.float64))
        act = frame.action.to_array()
        assert np.array_equal(act, act.astype(np.float32).astype(np.float64))

    def test_angle_at_pi_survives_quantization(self):
        # float32 rounds pi upward past the wrap boundary; the stored action
        # must still be a fixed point of both quantization and wrapping.
        frame = DemoFrame(
            Observation(ColoredPointCloud(np.zeros((1, 3))), RobotState(np.zeros(3))),
            EulerRPY(np.pi, -np.pi + 1e-9, 0.0),
            0,
        )
        act = frame.action.to_array()
        assert np.array_equal(act, act.astype(np.float32).astype(np.float64))
        assert np.array_equal(act, np.array([wrap_angle(v) for v in act]))

    def test_tick_order_enforced(self):
        rng = np.random.default_rng(1)
        f0 = make_frame(rng, tick=5)
        f1 = make_frame(rng, tick=5)
        box = CropBox(np.array([-5.0, -5.0, -5.0]), np.array([5.0, 5.0, 5.0]))
        with pytest.raises(ValueError):
            DemoDataset(((f0, f1),), "unstack", 0, 16, box)

    def test_budget_enforced(self):
        rng = np.random.default_rng(2)
        frame = make_frame(rng, n_points=32)
        box = CropBox(np.array([-5.0, -5.0, -5.0]), np.array([5.0, 5.0, 5.0]))
        with pytest.raises(ValueError):
            DemoDataset(((frame,),), "unstack", 0, 16, box)

    def test_summary_reports_counts_and_ranges(self):
        rng = np.random.default_rng(3)
        ds = make_dataset(rng)
        text = ds.summary()
        assert "demonstrations: 2" in text
        assert "frames: 10" in text
        assert "yaw" in text


class TestRoundTrip:
    def test_save_load_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        ds = make_dataset(rng, n_demos=3, n_frames=4)
        path = tmp_path / "demo.bin"
        save(ds, path)
        loaded = load(path)
        assert loaded.task == ds.task
        assert loaded.seed == ds.seed
        assert loaded.point_budget == ds.point_budget
        assert np.array_equal(loaded.crop_box.min_corner, ds.crop_box.min_corner)
        assert len(loaded.demos) == 3
        for da, db in zip(ds.demos, loaded.demos):
            assert len(da) == len(db)
            for fa, fb in zip(da, db):
                assert frames_equal(fa, fb)

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(5)
        ds = make_dataset(rng)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save(ds, p1)
        save(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_file_size_matches_layout_arithmetic(self, tmp_path):
        # 1 demo x 256 frames x 256 points. Per frame: 8 header bytes plus
        # (256 * 3 * 4) * 2 for points/colors plus 12 + 12 for state/action.
        rng = np.random.default_rng(6)
        demo = tuple(make_frame(rng, n_points=256, tick=t) for t in range(256))
        box = CropBox(np.array([-5.0, -5.0, -5.0]), np.array([5.0, 5.0, 5.0]))
        ds = DemoDataset((demo,), "screwdriver", 7, 256, box)
        path = tmp_path / "demo.bin"
        save(ds, path)
        data = path.read_bytes()
        _, _, mlen = struct.unpack_from("<8sII", data, 0)
        per_frame = 8 + 256 * 12 * 2 + 12 + 12
        assert len(data) == 16 + mlen + 256 * per_frame + 32


class TestLoadErrors:
    def write_valid(self, tmp_path):
        rng = np.random.default_rng(7)
        ds = make_dataset(rng)
        path = tmp_path / "demo.bin"
        save(ds, path)
        return path

    def test_truncated_payload_is_checksum_error(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 100])
        with pytest.raises(DatasetChecksumError):
            load(path)

    def test_single_flipped_byte_is_checksum_error(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(DatasetChecksumError):
            load(path)

    def test_bad_magic_is_version_error(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        data[0:8] = b"NOTADEMO"
        path.write_bytes(bytes(data))
        with pytest.raises(DatasetVersionError):
            load(path)

    def test_future_version_is_version_error(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        # Bump the version and re-sign so only the version check can fail.
        struct.pack_into("<I", data, 8, FORMAT_VERSION + 1)
        body = bytes(data[:-32])
        path.write_bytes(body + hashlib.sha256(body).digest())
        with pytest.raises(DatasetVersionError):
            load(path)

    def test_tiny_file_is_truncation_error(self, tmp_path):
        path = tmp_path / "demo.bin"
        path.write_bytes(MAGIC + b"\x01")
        with pytest.raises(DatasetTruncatedError):
            load(path)

    def test_lying_manifest_length_is_truncation_error(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        struct.pack_into("<I", data, 12, 10_000_000)
        path.write_bytes(bytes(data))
        with pytest.raises(DatasetTruncatedError):
            load(path)

    def test_empty_dataset_round_trips(self, tmp_path):
        box = CropBox(np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))
        ds = DemoDataset((), "unstack", 0, 16, box)
        path = tmp_path / "empty.bin"
        save(ds, path)
        loaded = load(path)
        assert loaded.demos == ()
        assert loaded.task == "unstack"
