"""Acceptance gate: one test per headline guarantee, one printed line each.

Each test prints `ACCEPTANCE <name>: PASS/FAIL (...)` so a full run leaves a
scannable scorecard. The heavyweight fixtures (real demos, fully trained
policies for all three tasks) are shared session-wide; everything else builds
its own small inputs and checks against independent oracles.
"""

import json
import time

import numpy as np
import pytest

from hitld.demo import DemoDataset, DemoFrame, scripted_expert
from hitld.diffusion import (
    add_noise,
    ddim_step,
    denoiser_specs,
    make_schedule,
    sampling_steps,
    training_loss,
)
from hitld.geometry import EulerRPY, angular_error, euler_to_quat
from hitld.harness import main
from hitld.nn import (
    MlpParams,
    encode_backward,
    encode_cloud_batch,
    mlp_backward,
    mlp_forward,
    mlp_specs,
)
from hitld.pointcloud import farthest_point_sample_indices
from hitld.policy import (
    ColoredPointCloud,
    CropBox,
    Observation,
    PolicyConfig,
    RobotState,
    TrainedPolicy,
    train,
)
from hitld.shared_control import LoopConfig, hitl_step
from hitld.sim import TASKS, make_task, reset
from hitld.sim import step as sim_step


def announce(scorecard, name: str, ok: bool, detail: str) -> None:
    """One scorecard line per criterion, echoed in the terminal summary."""
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    scorecard.append(line)
    assert ok, line


class StubPolicy:
    def __init__(self, rpy, point_budget=16):
        self.target = EulerRPY(*rpy)
        self.perception = type("P", (), {"point_budget": point_budget})()

    def predict(self, obs, seed):
        return self.target


class RandomOrientationSource:
    """Adversarial stand-in: a fresh random orientation every call."""

    def __init__(self, point_budget=16, seed=99):
        self.rng = np.random.default_rng(seed)
        self.perception = type("P", (), {"point_budget": point_budget})()

    def predict(self, obs, seed):
        return EulerRPY(*self.rng.uniform(-1.0, 1.0, 3))


@pytest.fixture(scope="session")
def studio(tmp_path_factory):
    """One recorded demonstration and one fully trained policy per task."""
    d = tmp_path_factory.mktemp("studio")
    out = {"dir": d, "tasks": {}}
    for name in TASKS:
        t0 = time.time()
        dataset = scripted_expert(make_task(name), seed=3)
        demo_path = d / f"{name}.demo"
        from hitld.demo import save as save_demos

        save_demos(dataset, demo_path)
        policy = train(dataset, PolicyConfig())
        train_seconds = time.time() - t0
        policy_path = d / f"{name}_policy.json"
        policy.save(policy_path)
        out["tasks"][name] = {
            "dataset": dataset,
            "policy": policy,
            "demo_path": demo_path,
            "policy_path": policy_path,
            "train_seconds": train_seconds,
        }
    return out


# ---------------------------------------------------------------------------
# criteria


def _fd_grad(f, arrays, h=1e-6):
    """Central finite differences of scalar f() over the given arrays."""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = a[i]
            a[i] = old + h
            fp = f()
            a[i] = old - h
            fm = f()
            a[i] = old
            g[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def _worst_rel(analytic, numeric):
    worst = 0.0
    for ga, gf in zip(analytic, numeric):
        worst = max(worst, float((np.abs(ga - gf)
                                  / np.maximum(np.abs(gf), 1e-4)).max()))
    return worst


def test_gradient_correctness(scorecard):
    """Backprop matches central differences on 22 random networks."""
    t0 = time.time()
    rng = np.random.default_rng(42)
    worst = 0.0
    networks = 0

    for _ in range(14):  # plain MLPs, random shapes and depths
        dims = tuple(int(rng.integers(2, 7)) for _ in range(int(rng.integers(2, 5))))
        params = MlpParams.init(mlp_specs(dims), rng)
        x = rng.standard_normal((4, dims[0]))
        target = rng.standard_normal((4, dims[-1]))

        def loss():
            y, _ = mlp_forward(params, x)
            return 0.5 * float(np.sum((y - target) ** 2))

        y, cache = mlp_forward(params, x)
        grads, _ = mlp_backward(params, cache, y - target)
        worst = max(worst, _worst_rel(grads.flat(), _fd_grad(loss, params.flat())))
        networks += 1

    for _ in range(4):  # encoder composites: per-point MLP through the max pool
        enc = MlpParams.init(mlp_specs((6, 8, 8)), rng)
        clouds = rng.standard_normal((3, 5, 6))
        target = rng.standard_normal((3, 8))

        def loss():
            feat, _ = encode_cloud_batch(enc, clouds)
            return 0.5 * float(np.sum((feat - target) ** 2))

        feat, cache = encode_cloud_batch(enc, clouds)
        grads = encode_backward(enc, cache, feat - target)
        worst = max(worst, _worst_rel(grads.flat(), _fd_grad(loss, enc.flat())))
        networks += 1

    sched = make_schedule(20)
    for _ in range(4):  # denoiser composites, including the conditioning input
        den = MlpParams.init(denoiser_specs(3, 5, hidden=(8, 8), embed_dim=4), rng)
        a0 = rng.standard_normal((3, 3))
        eps = rng.standard_normal((3, 3))
        cond = rng.standard_normal((3, 5))
        k = rng.integers(1, 21, 3)

        def loss():
            value, _, _ = training_loss(den, sched, a0, cond, k, eps, embed_dim=4)
            return value

        _, grads, d_cond = training_loss(den, sched, a0, cond, k, eps, embed_dim=4)
        worst = max(worst, _worst_rel(grads.flat(), _fd_grad(loss, den.flat())))
        worst = max(worst, _worst_rel([d_cond], _fd_grad(loss, [cond])))
        networks += 1

    elapsed = time.time() - t0
    announce(scorecard, "gradient_correctness",
             networks >= 20 and worst < 1e-4 and elapsed < 60,
             f"{networks} networks, max relative error {worst:.2e}, {elapsed:.1f}s")


def test_ddim_inversion_identity(scorecard):
    """Reverse chain fed the true noise reconstructs the clean action."""
    t0 = time.time()
    sched = make_schedule(100)
    rng = np.random.default_rng(1)
    a0 = rng.standard_normal((100, 3))
    eps = rng.standard_normal((100, 3))

    worst = 0.0
    for steps in (100, 10):  # full chain and the strided inference chain
        a = add_noise(sched, a0, eps, np.full(100, sched.K))
        ks = sampling_steps(sched.K, steps)
        for k, k_prev in zip(ks[:-1], ks[1:]):
            a = ddim_step(sched, a, int(k), eps, 0.0, None, int(k_prev))
        worst = max(worst, float(np.abs(a - a0).max()))

    elapsed = time.time() - t0
    announce(scorecard, "ddim_inversion_identity", worst < 1e-6 and elapsed < 30,
             f"100 actions, max reconstruction error {worst:.2e}, {elapsed:.1f}s")


def _fps_oracle(pos, n, start):
    """Brute-force farthest point sampling with explicit loops."""
    count = len(pos)
    if count <= n:
        return list(range(count))
    chosen = [start]
    min_d2 = [float(np.sum((pos[j] - pos[start]) ** 2)) for j in range(count)]
    for _ in range(1, n):
        best, best_d = 0, -1.0
        for j in range(count):
            if min_d2[j] > best_d:  # strict: ties keep the lowest index
                best, best_d = j, min_d2[j]
        chosen.append(best)
        for j in range(count):
            d = float(np.sum((pos[j] - pos[best]) ** 2))
            if d < min_d2[j]:
                min_d2[j] = d
    return chosen


def test_fps_oracle_equivalence(scorecard):
    """Greedy subsampling equals the brute-force oracle on 200 clouds."""
    t0 = time.time()
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(200):
        count = int(rng.integers(1, 65))
        pos = rng.uniform(-1.0, 1.0, (count, 3))
        n = int(rng.integers(1, count + 1))
        start = int(rng.integers(0, count))
        got = farthest_point_sample_indices(pos, n, start_index=start)
        want = _fps_oracle(pos, n, start)
        assert list(got) == want, f"cloud {checked}: {list(got)} != {want}"
        checked += 1
    elapsed = time.time() - t0
    announce(scorecard, "fps_oracle_equivalence", checked == 200 and elapsed < 30,
             f"{checked} clouds match exactly, {elapsed:.1f}s")


def test_controller_convergence(scorecard):
    """A static 1 rad error decays monotonically below 0.01 rad."""
    cfg = LoopConfig(gain=0.05, dt=0.05, density=1500.0, point_budget=16, seed=0)
    policy = StubPolicy((1.0, 0.0, 0.0))
    scene = reset(make_task("screwdriver"), seed=0)
    target_q = euler_to_quat(policy.target)

    def err(s):
        return float(np.linalg.norm(angular_error(target_q, s.gripper.orientation)))

    errors = [err(scene)]
    capped = True
    for _ in range(3000):
        twist, _ = hitl_step(np.zeros(3), "hold", scene, policy, cfg)
        capped = capped and float(np.linalg.norm(twist.angular)) <= cfg.angular_cap + 1e-12
        scene, _ = sim_step(scene, twist, "hold", cfg.dt)
        errors.append(err(scene))
        if errors[-1] < 0.01:
            break
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    announce(scorecard, "controller_convergence",
             errors[0] == pytest.approx(1.0) and errors[-1] < 0.01
             and monotone and capped,
             f"{len(errors) - 1} ticks from {errors[0]:.3f} to {errors[-1]:.4f} rad, "
             f"monotone={monotone}, cap respected={capped}")


def test_safety_contract(scorecard):
    """Position traces are bit-identical under an adversarial policy swap."""
    t0 = time.time()
    task = make_task("screwdriver")
    cfg = LoopConfig(density=1500.0, point_budget=16, seed=0)
    identical = 0
    orientations_diverged = 0
    for ep in range(100):
        script = np.random.default_rng(ep).uniform(-0.15, 0.15, (25, 3))
        traces, finals = [], []
        for policy in (StubPolicy((0.4, -0.2, 0.3)), RandomOrientationSource()):
            scene = reset(task, seed=ep)
            positions = []
            for t in range(len(script)):
                twist, _ = hitl_step(script[t], "hold", scene, policy, cfg)
                scene, _ = sim_step(scene, twist, "hold", cfg.dt)
                positions.append(scene.gripper.position.copy())
            traces.append(np.array(positions))
            finals.append(scene.gripper.orientation)
        if np.array_equal(traces[0], traces[1]):
            identical += 1
        from hitld.geometry import quat_angle_between

        if quat_angle_between(finals[0], finals[1]) > 1e-6:
            orientations_diverged += 1
    elapsed = time.time() - t0
    announce(scorecard, "safety_contract",
             identical == 100 and orientations_diverged > 50 and elapsed < 120,
             f"{identical}/100 episodes bit-identical in position "
             f"({orientations_diverged} diverged in orientation), {elapsed:.1f}s")


def test_multimodality_preserved(scorecard):
    """Antipodal yaw targets stay two modes; samples avoid their mean."""
    t0 = time.time()
    box = CropBox(np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))
    rng = np.random.default_rng(0)
    cloud = ColoredPointCloud(rng.uniform(-0.8, 0.8, (16, 3)), rng.uniform(size=(16, 3)))
    obs = Observation(cloud, RobotState(np.array([0.1, -0.2, 0.3])))
    frames = tuple(DemoFrame(obs, EulerRPY(0.0, 0.0, 0.9 if t % 2 == 0 else -0.9), t)
                   for t in range(64))
    dataset = DemoDataset((frames,), "screwdriver", 0, 16, box)
    policy = train(dataset, PolicyConfig(point_budget=16, encoder_hidden=(16, 16),
                                         feature_dim=16, epochs=3000,
                                         inference_steps=50, batch_size=64, seed=3))

    yaws = np.array([policy.predict(obs, seed=s).yaw for s in range(200)])
    near_mode = np.minimum(np.abs(yaws - 0.9), np.abs(yaws + 0.9)) <= 0.2
    near_mean = np.abs(yaws) <= 0.2
    elapsed = time.time() - t0
    announce(scorecard, "multimodality_preserved",
             near_mode.mean() >= 0.90 and near_mean.mean() < 0.05 and elapsed < 600,
             f"{near_mode.mean():.0%} of 200 samples within 0.2 rad of a mode, "
             f"{near_mean.mean():.0%} near the mean, {elapsed:.1f}s")


def test_training_sanity(studio, scorecard):
    """One real demonstration trains to < 0.1 rad mean error per axis."""
    entry = studio["tasks"]["screwdriver"]
    dataset, policy = entry["dataset"], entry["policy"]
    frames = list(dataset.frames())
    errors = np.zeros((len(frames), 3))
    for i, frame in enumerate(frames):
        pred = policy.predict(frame.observation, seed=i)
        errors[i] = np.abs(pred.to_array() - frame.action.to_array())
    mae = errors.mean(axis=0)
    announce(scorecard, "training_sanity",
             bool(np.all(mae < 0.1)) and entry["train_seconds"] < 600,
             f"mae roll/pitch/yaw {mae[0]:.4f}/{mae[1]:.4f}/{mae[2]:.4f} rad "
             f"over {len(frames)} frames, trained in {entry['train_seconds']:.0f}s")


def test_directional_study(studio, tmp_path, scorecard):
    """Assisted control beats the low-DoF baseline where rotation dominates."""
    t0 = time.time()
    out = tmp_path / "study"
    rc = main(["study", "--tasks", "all", "--modes", "hitl_d,cartesian",
               "--trials", "10", "--seed", "0",
               "--policy-dir", str(studio["dir"]), "--out-dir", str(out)])
    assert rc == 0
    rows = json.loads((out / "metrics.json").read_text(encoding="utf-8"))["rows"]

    stats = {}
    for task in TASKS:
        for mode in ("hitl_d", "cartesian"):
            g = [r for r in rows if r["task"] == task and r["mode"] == mode]
            assert len(g) == 10
            stats[task, mode] = (sum(r["success"] for r in g) / len(g),
                                 sum(r["completion_ticks"] for r in g) / len(g))

    success_ok = all(stats[t, "hitl_d"][0] >= stats[t, "cartesian"][0] for t in TASKS)
    faster_ok = all(stats[t, "hitl_d"][1] < stats[t, "cartesian"][1]
                    for t in ("screwdriver", "shape_match"))
    elapsed = time.time() - t0
    summary = "; ".join(
        f"{t}: {stats[t, 'hitl_d'][1]:.0f} vs {stats[t, 'cartesian'][1]:.0f} ticks, "
        f"success {stats[t, 'hitl_d'][0]:.0%} vs {stats[t, 'cartesian'][0]:.0%}"
        for t in TASKS)
    announce(scorecard, "directional_study",
             success_ok and faster_ok and elapsed < 900,
             f"{summary}; {elapsed:.0f}s")


def test_determinism(studio, tmp_path, scorecard):
    """Identical seeds and configs yield byte-identical artifacts."""
    t0 = time.time()
    conf = tmp_path / "short.conf"
    conf.write_text("policy.epochs = 40\n", encoding="utf-8")
    checkpoints = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        rc = main(["train", "--demos", str(studio["tasks"]["screwdriver"]["demo_path"]),
                   "--seed", "5", "--config", str(conf), "--out", str(out)])
        assert rc == 0
        checkpoints.append(out.read_bytes())
    train_ok = checkpoints[0] == checkpoints[1]

    outputs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        rc = main(["study", "--tasks", "screwdriver", "--modes", "hitl_d,cartesian",
                   "--trials", "2", "--seed", "123",
                   "--policy", str(studio["tasks"]["screwdriver"]["policy_path"]),
                   "--out-dir", str(out)])
        assert rc == 0
        outputs.append(tuple((out / f).read_bytes()
                             for f in ("metrics.csv", "metrics.json", "traces.jsonl")))
    study_ok = outputs[0] == outputs[1]

    elapsed = time.time() - t0
    announce(scorecard, "determinism", train_ok and study_ok and elapsed < 600,
             f"checkpoint bytes equal={train_ok}, "
             f"study metrics bytes equal={study_ok}, {elapsed:.0f}s")
