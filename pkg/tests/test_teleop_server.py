"""Tests for the live teleoperation session, protocol, and replay bridge."""

import numpy as np
import pytest

from hitld.demo import DEMO_FRAMES
from hitld.geometry import EulerRPY, quat_angle_between
from hitld.shared_control import LoopConfig
from hitld.sim import make_task
from hitld.teleop_server import (
    VIZ_POINT_CAP,
    TeleopSession,
    build_app,
    replay_session,
)

from hitld.schemas import load as load_schema


@pytest.fixture(scope="module")
def validators():
    import jsonschema

    server = jsonschema.Draft202012Validator(load_schema("server_message.schema.json"))
    client = jsonschema.Draft202012Validator(load_schema("client_message.schema.json"))
    return client, server


class StubPolicy:
    def __init__(self, rpy, point_budget=16):
        self.target = EulerRPY(*rpy)
        self.perception = type("P", (), {"point_budget": point_budget})()

    def predict(self, obs, seed):
        return self.target


def small_session(mode="full_manual_6dof", policy=None, seed=0, **cfg_kw):
    task = make_task("screwdriver")
    kw = dict(density=2000.0, point_budget=16, seed=seed)
    kw.update(cfg_kw)
    return TeleopSession(task, mode, policy, LoopConfig(**kw), seed, session_id=7)


class TestSessionProtocol:
    def test_requires_policy_for_hitl_d(self):
        with pytest.raises(ValueError):
            small_session(mode="hitl_d")

    def test_idle_until_started(self):
        s = small_session()
        frame = s.tick()
        assert frame["status"] == "idle"
        assert frame["tick"] == 0 and frame["elapsed_ticks"] == 0

    def test_start_then_input_moves_gripper(self):
        s = small_session()
        assert s.handle_message({"type": "start"})["event"] == "started"
        assert s.handle_message({"type": "input", "v": [0.1, 0, 0],
                                 "gripper": "hold"}) is None
        frame = s.tick()
        assert frame["status"] == "running"
        # One tick at 0.1 m/s: x advances by v*dt.
        assert frame["gripper"]["position"][0] == pytest.approx(0.1 * s.cfg.dt)
        assert frame["tick"] == 1 and frame["elapsed_ticks"] == 1

    def test_hold_latest_no_queueing(self):
        s = small_session()
        s.handle_message({"type": "start"})
        # Three inputs between ticks: only the last one matters.
        s.handle_message({"type": "input", "v": [1, 0, 0]})
        s.handle_message({"type": "input", "v": [0, 1, 0]})
        s.handle_message({"type": "input", "v": [0, 0.08, 0]})
        frame = s.tick()
        assert frame["gripper"]["position"][0] == pytest.approx(0.0)
        assert frame["gripper"]["position"][1] == pytest.approx(0.08 * s.cfg.dt)

    def test_input_persists_across_ticks(self):
        s = small_session()
        s.handle_message({"type": "start"})
        s.handle_message({"type": "input", "v": [0.1, 0, 0]})
        s.tick()
        frame = s.tick()  # no new input: same command applies
        assert frame["gripper"]["position"][0] == pytest.approx(2 * 0.1 * s.cfg.dt)

    def test_malformed_messages_get_error_frames(self):
        s = small_session()
        for bad in (["not", "an", "object"],
                    {"no_type": 1},
                    {"type": "teleport"},
                    {"type": "input", "v": [1, 2]},
                    {"type": "input", "v": ["a", "b", "c"]},
                    {"type": "input", "gripper": "clench"},
                    {"type": "input", "cart_mode": "warp"}):
            reply = s.handle_message(bad)
            assert reply["type"] == "error" and reply["message"]
        # The session still works afterwards.
        s.handle_message({"type": "start"})
        assert s.tick()["status"] == "running"

    def test_bad_input_does_not_clobber_held_input(self):
        s = small_session()
        s.handle_message({"type": "start"})
        s.handle_message({"type": "input", "v": [0.1, 0, 0]})
        s.handle_message({"type": "input", "v": [np.nan, 0, 0]})
        frame = s.tick()
        assert frame["gripper"]["position"][0] == pytest.approx(0.1 * s.cfg.dt)

    def test_reset_message_restores_scene_and_counts(self):
        s = small_session()
        s.handle_message({"type": "start"})
        s.handle_message({"type": "input", "v": [0.2, 0, 0]})
        for _ in range(5):
            s.tick()
        reply = s.handle_message({"type": "reset"})
        assert reply["event"] == "reset_done"
        frame = s.tick()
        assert frame["resets"] == 1
        # Fresh scene: gripper back at home, tick clock restarted.
        assert frame["tick"] == 1
        assert frame["elapsed_ticks"] == 6


class TestStateFrames:
    def test_frames_validate_against_schema(self, validators):
        _, server = validators
        s = small_session()
        server.validate(s.tick())  # idle frame
        s.handle_message({"type": "start"})
        s.handle_message({"type": "input", "v": [0.1, 0, 0], "gripper": "hold"})
        for _ in range(3):
            server.validate(s.tick())
        server.validate(s.handle_message({"type": "reset"}))
        server.validate(s.handle_message({"type": "bogus"}))

    def test_documented_client_messages_validate(self, validators):
        client, _ = validators
        for msg in ({"type": "start"}, {"type": "reset"}, {"type": "export"},
                    {"type": "input", "v": [0.1, 0, 0], "gripper": "hold"},
                    {"type": "input", "rotation": [0, 0, 0.2], "cart_mode": "rotate"}):
            client.validate(msg)

    def test_cloud_capped_for_visualization(self):
        s = small_session(density=60000.0)
        s.handle_message({"type": "start"})
        frame = s.tick()
        assert len(frame["cloud"]["positions"]) == VIZ_POINT_CAP
        assert len(frame["cloud"]["colors"]) == VIZ_POINT_CAP

    def test_predicted_orientation_only_in_hitl_d(self):
        manual = small_session()
        manual.handle_message({"type": "start"})
        assert "predicted_orientation" not in manual.tick()

        assisted = small_session(mode="hitl_d", policy=StubPolicy((0.3, 0, 0)))
        assisted.handle_message({"type": "start"})
        frame = assisted.tick()
        assert frame["predicted_orientation"] == pytest.approx([0.3, 0, 0])

    def test_objects_and_gripper_in_frame(self):
        s = small_session()
        frame = s.tick()
        ids = {o["id"] for o in frame["objects"]}
        assert ids == {"screwdriver", "cup"}
        assert frame["gripper"]["attached"] is None
        assert frame["gripper"]["open"] is True

    def test_success_reported_exactly_once_then_idle(self):
        # Drive the scripted expert's inputs through the session until done.
        from hitld.sim import check_success, make_operator

        task = make_task("screwdriver")
        cfg = LoopConfig.for_task(task, seed=3)
        s = TeleopSession(task, "full_manual_6dof", None, cfg, 3, session_id=1)
        op = make_operator("direct", task, seed=3)
        s.handle_message({"type": "start"})
        statuses = []
        for _ in range(task.max_ticks):
            inp = op.step(s.scene)
            s.handle_message({"type": "input", "v": list(inp.translation),
                              "rotation": list(inp.rotation), "gripper": inp.gripper})
            statuses.append(s.tick()["status"])
            if statuses[-1] == "success":
                break
        assert statuses.count("success") == 1
        assert check_success(s.scene, task)
        # After success the session idles: no further physics.
        tick_before = s.scene.tick
        frame = s.tick()
        assert frame["status"] == "idle" and s.scene.tick == tick_before


class TestStaleness:
    def test_slow_inference_holds_last_prediction(self):
        fake_now = [0.0]
        policy = StubPolicy((0.5, 0.0, 0.0))
        task = make_task("screwdriver")
        cfg = LoopConfig(density=2000.0, point_budget=16, seed=0)
        s = TeleopSession(task, "hitl_d", policy, cfg, 0, session_id=2,
                          clock=lambda: fake_now[0])
        s.handle_message({"type": "start"})

        frame = s.tick()  # on-time tick: fresh prediction
        assert "stale_prediction" not in frame

        # Simulate an overrun: the next tick must hold, not re-predict.
        fake_now[0] = 0.0
        original = policy.predict
        calls = []
        policy.predict = lambda obs, seed: (calls.append(seed), original(obs, seed))[1]
        s._overran = True
        frame = s.tick()
        assert frame["stale_prediction"] is True
        assert frame["predicted_orientation"] == pytest.approx([0.5, 0, 0])
        assert calls == []  # no inference on the held tick
        # Recovery: next tick predicts again.
        frame = s.tick()
        assert "stale_prediction" not in frame
        assert len(calls) == 1


class TestRecordingAndReplay:
    def run_manual(self, seed=3, ticks=None):
        task = make_task("screwdriver")
        cfg = LoopConfig.for_task(task, seed=seed)
        s = TeleopSession(task, "full_manual_6dof", None, cfg, seed, session_id=4)
        from hitld.sim import make_operator

        op = make_operator("direct", task, seed=seed)
        s.handle_message({"type": "start"})
        for _ in range(ticks or task.max_ticks):
            inp = op.step(s.scene)
            s.handle_message({"type": "input", "v": list(inp.translation),
                              "rotation": list(inp.rotation), "gripper": inp.gripper})
            if s.tick()["status"] == "success":
                break
        return task, cfg, s

    def test_replay_reproduces_final_state(self):
        task, cfg, s = self.run_manual()
        final = replay_session(task, "full_manual_6dof", None, cfg, 3, list(s.recorded))
        assert np.array_equal(final.gripper.position, s.scene.gripper.position)
        assert quat_angle_between(final.gripper.orientation,
                                  s.scene.gripper.orientation) < 1e-12
        for oid, obj in s.scene.objects.items():
            assert np.array_equal(final.objects[oid].position, obj.position)
        assert final.tick == s.scene.tick

    def test_replay_reproduces_hitl_d_session(self):
        task = make_task("screwdriver")
        cfg = LoopConfig(density=2000.0, point_budget=16, seed=0)
        policy = StubPolicy((0.2, 0.1, 0.0))
        s = TeleopSession(task, "hitl_d", policy, cfg, 0, session_id=5)
        s.handle_message({"type": "start"})
        rng = np.random.default_rng(0)
        for _ in range(20):
            s.handle_message({"type": "input", "v": list(rng.uniform(-0.1, 0.1, 3))})
            s.tick()
        final = replay_session(task, "hitl_d", policy, cfg, 0, list(s.recorded))
        assert np.array_equal(final.gripper.position, s.scene.gripper.position)
        assert quat_angle_between(final.gripper.orientation,
                                  s.scene.gripper.orientation) < 1e-12

    def test_export_matches_demo_contract(self, tmp_path):
        from hitld.demo import load as load_demos, save as save_demos

        task, cfg, s = self.run_manual()
        ds = s.export_dataset()
        assert len(ds.demos) == 1
        assert 2 <= len(ds.demos[0]) <= DEMO_FRAMES
        assert ds.task == "screwdriver" and ds.point_budget == cfg.point_budget
        ticks = [f.tick for f in ds.demos[0]]
        assert ticks == sorted(set(ticks))
        path = tmp_path / "session.demo"
        save_demos(ds, path)
        again = load_demos(path)
        assert again.n_frames == ds.n_frames

    def test_export_with_nothing_recorded_is_an_error(self):
        s = small_session()
        reply = s.handle_message({"type": "export"})
        assert reply["type"] == "error"


class TestWebSocketEndToEnd:
    def test_connect_drive_reset(self):
        from fastapi.testclient import TestClient

        task = make_task("screwdriver")
        cfg = LoopConfig(density=2000.0, point_budget=16, seed=0, dt=0.02)
        app = build_app(task, "full_manual_6dof", None, cfg, 0)
        with TestClient(app) as client:
            assert client.get("/health").json()["ok"] is True
            with client.websocket_connect("/ws") as ws:
                hello = ws.receive_json()
                assert hello["type"] == "event" and hello["event"] == "connected"
                ws.send_json({"type": "start"})
                ws.send_json({"type": "input", "v": [0.1, 0, 0], "gripper": "hold"})
                moved = None
                for _ in range(40):
                    frame = ws.receive_json()
                    if frame["type"] == "state" and frame["status"] == "running":
                        if frame["gripper"]["position"][0] > 0:
                            moved = frame
                            break
                assert moved is not None
                # Advanced by an integer number of ticks, v*dt each.
                per_tick = 0.1 * cfg.dt
                steps = moved["gripper"]["position"][0] / per_tick
                assert steps == pytest.approx(round(steps), abs=1e-9)

                ws.send_json({"type": "billing"})
                saw_error = False
                for _ in range(20):
                    frame = ws.receive_json()
                    if frame["type"] == "error":
                        saw_error = True
                        break
                assert saw_error

                ws.send_json({"type": "reset"})
                saw_reset = False
                for _ in range(20):
                    frame = ws.receive_json()
                    if frame["type"] == "event" and frame["event"] == "reset_done":
                        saw_reset = True
                        break
                assert saw_reset

    def test_static_bundle_served_alongside_protocol(self, tmp_path):
        from fastapi.testclient import TestClient

        (tmp_path / "index.html").write_text("<title>workbench</title>")
        (tmp_path / "app.js").write_text("export {};")
        task = make_task("screwdriver")
        cfg = LoopConfig(density=2000.0, point_budget=16, seed=0, dt=0.02)
        app = build_app(task, "full_manual_6dof", None, cfg, 0,
                        static_dir=str(tmp_path))
        with TestClient(app) as client:
            assert "workbench" in client.get("/").text
            assert client.get("/app.js").status_code == 200
            # Protocol routes keep priority over the static mount.
            assert client.get("/health").json()["ok"] is True
            with client.websocket_connect("/ws") as ws:
                assert ws.receive_json()["event"] == "connected"

    def test_no_static_dir_means_no_root_route(self):
        from fastapi.testclient import TestClient

        task = make_task("screwdriver")
        cfg = LoopConfig(density=2000.0, point_budget=16, seed=0, dt=0.02)
        app = build_app(task, "full_manual_6dof", None, cfg, 0)
        with TestClient(app) as client:
            assert client.get("/").status_code == 404
