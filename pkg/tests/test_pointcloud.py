import numpy as np
import pytest

from hitld.pointcloud import (
    ColoredPointCloud,
    CropBox,
    crop,
    farthest_point_sample,
    farthest_point_sample_indices,
)


def random_cloud(rng, n, scale=1.0):
    return ColoredPointCloud(rng.uniform(-scale, scale, (n, 3)), rng.uniform(0, 1, (n, 3)))


# ---------------------------------------------------------------------------
# Brute-force FPS oracle: literal greedy definition, no incremental updates.

def fps_oracle(positions, n, start_index):
    pos = np.asarray(positions, dtype=float)
    count = pos.shape[0]
    if count <= n:
        return list(range(count))
    chosen = [start_index]
    while len(chosen) < n:
        best_idx, best_d2 = None, -1.0
        for i in range(count):
            d2 = min(float(np.sum((pos[i] - pos[j]) ** 2)) for j in chosen)
            if d2 > best_d2:
                best_idx, best_d2 = i, d2
        chosen.append(best_idx)
    return chosen


# ---------------------------------------------------------------------------
# crop


def test_crop_all_inside():
    rng = np.random.default_rng(0)
    c = random_cloud(rng, 50, scale=0.5)
    box = CropBox([-1, -1, -1], [1, 1, 1])
    out = crop(c, box)
    assert np.array_equal(out.positions, c.positions)
    assert np.array_equal(out.colors, c.colors)


def test_crop_closed_box_face_point_retained():
    c = ColoredPointCloud(np.array([[1.0, 0.0, 0.0], [1.0 + 1e-9, 0.0, 0.0]]))
    out = crop(c, CropBox([-1, -1, -1], [1, 1, 1]))
    assert len(out) == 1
    assert np.array_equal(out.positions[0], [1.0, 0.0, 0.0])


def test_crop_matches_predicate_oracle():
    rng = np.random.default_rng(1)
    c = random_cloud(rng, 100, scale=2.0)
    box = CropBox([-0.8, -0.5, -1.2], [0.9, 1.0, 0.4])
    out = crop(c, box)
    keep = [
        i
        for i in range(100)
        if all(box.min_corner[k] <= c.positions[i, k] <= box.max_corner[k] for k in range(3))
    ]
    assert np.array_equal(out.positions, c.positions[keep])
    assert np.array_equal(out.colors, c.colors[keep])


def test_crop_idempotent():
    rng = np.random.default_rng(2)
    c = random_cloud(rng, 200, scale=2.0)
    box = CropBox([-1, -1, -1], [0.5, 0.5, 0.5])
    once = crop(c, box)
    twice = crop(once, box)
    assert np.array_equal(once.positions, twice.positions)


def test_crop_rejects_inverted_box():
    with pytest.raises(ValueError):
        CropBox([1, 0, 0], [0, 1, 1])


# ---------------------------------------------------------------------------
# farthest point sampling


def test_fps_small_cloud_passthrough():
    rng = np.random.default_rng(3)
    c = random_cloud(rng, 10)
    out = farthest_point_sample(c, 16)
    assert np.array_equal(out.positions, c.positions)


def test_fps_line_example():
    # points at x = 0..4 on a line, n=3, start 0 -> picks 0, 4, then 2
    pos = np.array([[float(x), 0.0, 0.0] for x in range(5)])
    idx = farthest_point_sample_indices(pos, 3, 0)
    assert list(idx) == [0, 4, 2]


def test_fps_large_cloud_budget():
    rng = np.random.default_rng(4)
    c = random_cloud(rng, 10_000)
    out = farthest_point_sample(c, 2048)
    assert len(out) == 2048
    # every output point is present in the input
    pos_set = {tuple(p) for p in c.positions}
    for p in out.positions:
        assert tuple(p) in pos_set


def test_fps_no_duplicate_indices():
    rng = np.random.default_rng(5)
    c = random_cloud(rng, 300)
    idx = farthest_point_sample_indices(c.positions, 64, 7)
    assert len(set(idx.tolist())) == 64


def test_fps_deterministic():
    rng = np.random.default_rng(6)
    c = random_cloud(rng, 500)
    a = farthest_point_sample(c, 128, 3)
    b = farthest_point_sample(c, 128, 3)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.colors, b.colors)


def test_fps_matches_bruteforce_oracle():
    rng = np.random.default_rng(7)
    for trial in range(40):
        n_pts = int(rng.integers(2, 64))
        budget = int(rng.integers(1, n_pts + 4))
        start = int(rng.integers(0, n_pts))
        c = random_cloud(rng, n_pts)
        got = farthest_point_sample_indices(c.positions, budget, start)
        want = fps_oracle(c.positions, budget, start)
        assert list(got) == list(want), f"trial {trial}: {list(got)} != {want}"


def test_fps_greedy_optimality_per_step():
    rng = np.random.default_rng(8)
    c = random_cloud(rng, 48)
    idx = farthest_point_sample_indices(c.positions, 20, 0)
    pos = c.positions
    for step in range(1, 20):
        prefix = idx[:step]
        picked = idx[step]
        d2_picked = min(float(np.sum((pos[picked] - pos[j]) ** 2)) for j in prefix)
        for i in range(48):
            if i in prefix:
                continue
            d2 = min(float(np.sum((pos[i] - pos[j]) ** 2)) for j in prefix)
            assert d2 <= d2_picked + 1e-12


def test_fps_rejects_empty_and_bad_args():
    c = ColoredPointCloud.empty()
    with pytest.raises(ValueError):
        farthest_point_sample(c, 4)
    c2 = ColoredPointCloud(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        farthest_point_sample(c2, 0)
    with pytest.raises(ValueError):
        farthest_point_sample(c2, 2, start_index=3)


def test_cloud_validation():
    with pytest.raises(ValueError):
        ColoredPointCloud(np.array([[np.inf, 0, 0]]))
    with pytest.raises(ValueError):
        ColoredPointCloud(np.zeros((2, 3)), np.full((2, 3), 1.5))
