"""Command-line workbench: demos, training, evaluation, studies, serving.

Every subcommand takes `--seed` and `--config` and is deterministic given
both. Config files are flat key=value text (see configfile); explicit CLI
flags override file values. Artifacts carry the identity of the
configuration that produced them: checkpoints embed their training config
hash, study and eval outputs embed the resolved run digest.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import demo as demo_mod
from .configfile import ConfigError, config_digest, load_config, typed_overrides
from .geometry import euler_to_quat, quat_angle_between
from .policy import PolicyConfig, TrainedPolicy, train
from .shared_control import CONTROL_MODES, LoopConfig, run_episode
from .sim import TASKS, TaskSpec, make_task

# The study pairs each control mode with the persona that motivates it:
# assisted control frees the direct user from rotation entirely, while the
# Cartesian baseline pays the low-DoF device's mode-switch cost.
DEFAULT_PERSONA_FOR_MODE = {
    "hitl_d": "direct",
    "cartesian": "mode_switching",
    "full_manual_6dof": "direct",
}

# Studies randomize the layout a little so trials are not replicas; demo
# generation keeps the canonical layout so the one demonstration per task
# stays the same file forever.
STUDY_POSITION_JITTER = 0.01
STUDY_YAW_JITTER = 0.05


class HarnessError(RuntimeError):
    """A user-facing failure: bad arguments, missing files, mismatches."""


def _load_conf(path: Optional[str]) -> Dict[str, str]:
    if path is None:
        return {}
    if not Path(path).exists():
        raise HarnessError(f"config file not found: {path}")
    return load_config(path)


def _conf_get(conf: Dict[str, str], key: str, cli_value, default):
    """CLI flag > config file > default."""
    if cli_value is not None:
        return cli_value
    if key in conf:
        return type(default)(conf[key]) if default is not None else conf[key]
    return default


def _task_spec(name: str, conf: Dict[str, str], **extra):
    if name not in TASKS:
        raise HarnessError(f"unknown task {name!r}, expected one of {TASKS}")
    overrides = typed_overrides(conf, "task", TaskSpec)
    overrides.update(extra)
    return make_task(name, **overrides)


def _loop_config(task, conf: Dict[str, str], seed: int) -> LoopConfig:
    overrides = typed_overrides(conf, "loop", LoopConfig)
    overrides["seed"] = seed
    return LoopConfig.for_task(task, **overrides)


def _policy_config(conf: Dict[str, str], seed: int, point_budget: int) -> PolicyConfig:
    overrides = typed_overrides(conf, "policy", PolicyConfig)
    overrides.setdefault("seed", seed)
    overrides["point_budget"] = point_budget
    return PolicyConfig(**overrides)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise HarnessError(f"{what} not found: {path}")
    return p


def _check_policy_for_task(policy: TrainedPolicy, task, cfg: LoopConfig) -> None:
    """Refuse a policy whose perception settings disagree with the loop."""
    per = policy.perception
    if per.point_budget != cfg.point_budget:
        raise HarnessError(
            f"policy for {task.task!r} was trained with a point budget of "
            f"{per.point_budget}, the study runs {cfg.point_budget}")
    if not (np.array_equal(per.crop_box.min_corner, cfg.crop_box.min_corner)
            and np.array_equal(per.crop_box.max_corner, cfg.crop_box.max_corner)):
        raise HarnessError(
            f"policy for {task.task!r} was trained on a different crop box "
            f"than the study is configured to render")
    if per.task != task.task:
        raise HarnessError(
            f"policy file belongs to task {per.task!r}, not {task.task!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_demo_gen(args) -> int:
    conf = _load_conf(args.config)
    seed = int(_conf_get(conf, "seed", args.seed, 0))
    frames = int(_conf_get(conf, "frames", args.frames, demo_mod.DEMO_FRAMES))
    task_name = _conf_get(conf, "task", args.task, None)
    if task_name is None:
        raise HarnessError("demo-gen needs --task (or task= in the config)")
    task = _task_spec(task_name, conf)
    dataset = demo_mod.scripted_expert(task, seed, frames=frames)
    out = Path(_conf_get(conf, "out", args.out, f"{task_name}_seed{seed}.demo"))
    out.parent.mkdir(parents=True, exist_ok=True)
    demo_mod.save(dataset, out)
    print(dataset.summary())
    print(f"wrote {out}")
    return 0


def cmd_demo_info(args) -> int:
    path = _require_file(args.path, "demo file")
    dataset = demo_mod.load(path)
    print(dataset.summary())
    return 0


def cmd_train(args) -> int:
    conf = _load_conf(args.config)
    seed = int(_conf_get(conf, "seed", args.seed, 0))
    demos_path = _conf_get(conf, "demos", args.demos, None)
    if demos_path is None:
        raise HarnessError("train needs --demos (or demos= in the config)")
    dataset = demo_mod.load(_require_file(demos_path, "demo file"))
    pc = _policy_config(conf, seed, dataset.point_budget)
    policy = train(dataset, pc)
    out = Path(_conf_get(conf, "out", args.out,
                         str(Path(demos_path).with_suffix("")) + "_policy.json"))
    out.parent.mkdir(parents=True, exist_ok=True)
    policy.save(out)
    print(f"trained on {dataset.n_frames} frames "
          f"({len(dataset.demos)} demo(s), task {dataset.task})")
    print(f"config hash {policy.config_hash}")
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    conf = _load_conf(args.config)
    seed = int(_conf_get(conf, "seed", args.seed, 0))
    stride = int(_conf_get(conf, "stride", args.stride, 4))
    if stride < 1:
        raise HarnessError("stride must be >= 1")
    policy = TrainedPolicy.load(_require_file(args.policy, "policy checkpoint"))
    dataset = demo_mod.load(_require_file(args.demos, "demo file"))
    if policy.perception.point_budget != dataset.point_budget:
        raise HarnessError(
            f"policy budget {policy.perception.point_budget} does not match "
            f"dataset budget {dataset.point_budget}")
    frames = list(dataset.frames())[::stride]
    abs_err = np.zeros((len(frames), 3))
    ang_err = np.zeros(len(frames))
    for i, frame in enumerate(frames):
        pred = policy.predict(frame.observation, seed=seed + i)
        abs_err[i] = np.abs(pred.to_array() - frame.action.to_array())
        ang_err[i] = quat_angle_between(euler_to_quat(pred), euler_to_quat(frame.action))
    report = {
        "policy_config_hash": policy.config_hash,
        "task": dataset.task,
        "frames_evaluated": len(frames),
        "stride": stride,
        "seed": seed,
        "mae_rpy": [round(float(v), 6) for v in abs_err.mean(axis=0)],
        "max_abs_rpy": [round(float(v), 6) for v in abs_err.max(axis=0)],
        "mean_angular_error": round(float(ang_err.mean()), 6),
        "max_angular_error": round(float(ang_err.max()), 6),
    }
    print(f"evaluated {len(frames)} held-out frames (every {stride}th) on {dataset.task}")
    print(f"mae roll/pitch/yaw: " + " ".join(f"{v:.4f}" for v in report["mae_rpy"]))
    print(f"mean angular error: {report['mean_angular_error']:.4f} rad")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {out}")
    return 0


def _study_rows(tasks: Sequence[str], modes: Sequence[str], persona: Optional[str],
                trials: int, base_seed: int, conf: Dict[str, str],
                policy_paths: Dict[str, Path]):
    """Run the full grid; yields (metrics, task) in trial-index order."""
    for task_name in tasks:
        task = _task_spec(
            task_name, conf,
            position_jitter=float(conf.get("task.position_jitter", STUDY_POSITION_JITTER)),
            yaw_jitter=float(conf.get("task.yaw_jitter", STUDY_YAW_JITTER)))
        policy = None
        if "hitl_d" in modes:
            policy = TrainedPolicy.load(policy_paths[task_name])
            _check_policy_for_task(policy, task, _loop_config(task, conf, base_seed))
        for mode in modes:
            for trial in range(trials):
                seed = base_seed + trial
                cfg = _loop_config(task, conf, seed)
                who = persona or DEFAULT_PERSONA_FOR_MODE[mode]
                metrics = run_episode(task, who, mode,
                                      policy if mode == "hitl_d" else None,
                                      cfg, seed)
                yield metrics


def _summary_table(rows: List[dict]) -> str:
    """Per task x mode aggregate, one line each: success, time, resets."""
    keys = []
    groups: Dict[tuple, List[dict]] = {}
    for r in rows:
        k = (r["task"], r["mode"])
        if k not in groups:
            groups[k] = []
            keys.append(k)
        groups[k].append(r)
    lines = [f"{'task':<13}{'mode':<18}{'persona':<16}{'success':>8}"
             f"{'mean time (s)':>15}{'resets':>8}{'switches':>10}"]
    for k in keys:
        g = groups[k]
        done = [r for r in g if r["success"]]
        mean_s = (sum(r["completion_seconds"] for r in done) / len(done)) if done else float("nan")
        lines.append(
            f"{k[0]:<13}{k[1]:<18}{g[0]['persona']:<16}"
            f"{f'{len(done)}/{len(g)}':>8}"
            f"{mean_s:>15.2f}"
            f"{sum(r['resets'] for r in g):>8}"
            f"{sum(r['switches'] for r in g):>10}")
    return "\n".join(lines)


def cmd_study(args) -> int:
    conf = _load_conf(args.config)
    seed = int(_conf_get(conf, "seed", args.seed, 0))
    trials = int(_conf_get(conf, "trials", args.trials, 3))
    if trials < 1:
        raise HarnessError("trials must be >= 1")
    tasks_arg = _conf_get(conf, "tasks", args.tasks, "all")
    tasks = list(TASKS) if tasks_arg == "all" else [t.strip() for t in tasks_arg.split(",")]
    for t in tasks:
        if t not in TASKS:
            raise HarnessError(f"unknown task {t!r}")
    modes_arg = _conf_get(conf, "modes", args.modes, "hitl_d,cartesian")
    modes = [m.strip() for m in modes_arg.split(",")]
    for m in modes:
        if m not in CONTROL_MODES:
            raise HarnessError(f"unknown mode {m!r}")
    persona = _conf_get(conf, "persona", args.persona, None)

    policy_paths: Dict[str, Path] = {}
    if "hitl_d" in modes:
        if args.policy and len(tasks) == 1:
            policy_paths[tasks[0]] = _require_file(args.policy, "policy checkpoint")
        else:
            pdir = _conf_get(conf, "policy_dir", args.policy_dir, None)
            if pdir is None:
                raise HarnessError(
                    "study with hitl_d needs --policy-dir (files named <task>_policy.json) "
                    "or --policy for a single task")
            for t in tasks:
                policy_paths[t] = _require_file(
                    str(Path(pdir) / f"{t}_policy.json"), f"policy for {t}")

    out_dir = Path(_conf_get(conf, "out_dir", args.out_dir, "study_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_digest(conf)

    rows: List[dict] = []
    with open(out_dir / "traces.jsonl", "w", encoding="utf-8") as traces:
        for metrics in _study_rows(tasks, modes, persona, trials, seed, conf, policy_paths):
            rows.append(metrics.to_row())
            traces.write(json.dumps({**metrics.to_row(), "trace": list(metrics.trace)}) + "\n")

    fieldnames = list(rows[0].keys())
    with open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    meta = {
        "config_digest": digest,
        "base_seed": seed,
        "trials": trials,
        "tasks": tasks,
        "modes": modes,
        "policy_config_hashes": {
            t: TrainedPolicy.load(p).config_hash for t, p in policy_paths.items()},
        "rows": rows,
    }
    (out_dir / "metrics.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(_summary_table(rows))
    print(f"wrote {out_dir}/metrics.csv, metrics.json, traces.jsonl")
    return 0


def cmd_serve(args) -> int:
    from .teleop_server import serve
    conf = _load_conf(args.config)
    seed = int(_conf_get(conf, "seed", args.seed, 0))
    task_name = _conf_get(conf, "task", args.task, "screwdriver")
    mode = _conf_get(conf, "mode", args.mode, "hitl_d")
    if mode not in CONTROL_MODES:
        raise HarnessError(f"unknown mode {mode!r}")
    task = _task_spec(task_name, conf)
    policy = None
    if mode == "hitl_d":
        if args.policy is None:
            raise HarnessError("serve in hitl_d mode needs --policy")
        policy = TrainedPolicy.load(_require_file(args.policy, "policy checkpoint"))
        _check_policy_for_task(policy, task, _loop_config(task, conf, seed))
    static_dir = args.static
    if static_dir is None and Path("frontend/index.html").exists():
        static_dir = "frontend"  # repo checkout convenience
    elif static_dir is not None:
        _require_file(str(Path(static_dir) / "index.html"), "static bundle")
    serve(host=args.host, port=int(_conf_get(conf, "port", args.port, 8765)),
          task=task, mode=mode, policy=policy,
          cfg=_loop_config(task, conf, seed), seed=seed, static_dir=static_dir)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hitld",
        description="Shared-control teleoperation workbench: diffusion-assisted "
                    "orientation over a deterministic desk-scale simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="base random seed")
        sp.add_argument("--config", default=None, help="flat key=value config file")

    sp = sub.add_parser("demo-gen", help="record a scripted expert demonstration")
    sp.add_argument("--task", choices=list(TASKS), default=None)
    sp.add_argument("--frames", type=int, default=None)
    sp.add_argument("--out", default=None)
    common(sp)
    sp.set_defaults(func=cmd_demo_gen)

    sp = sub.add_parser("demo-info", help="summarize a demo dataset file")
    sp.add_argument("path")
    common(sp)
    sp.set_defaults(func=cmd_demo_info)

    sp = sub.add_parser("train", help="train a policy on a demo dataset")
    sp.add_argument("--demos", default=None)
    sp.add_argument("--out", default=None)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="policy sanity metrics on held-out frames")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--demos", required=True)
    sp.add_argument("--stride", type=int, default=None)
    sp.add_argument("--out", default=None)
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("study", help="run the task x mode x trial grid")
    sp.add_argument("--tasks", default=None, help="'all' or comma list")
    sp.add_argument("--modes", default=None, help="comma list of control modes")
    sp.add_argument("--persona", default=None,
                    help="force one persona (default: per-mode pairing)")
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--policy-dir", default=None,
                    help="directory of <task>_policy.json checkpoints")
    sp.add_argument("--policy", default=None, help="single checkpoint (one task only)")
    sp.add_argument("--out-dir", default=None)
    common(sp)
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("serve", help="start the live teleoperation server")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=None)
    sp.add_argument("--task", choices=list(TASKS), default=None)
    sp.add_argument("--mode", default=None)
    sp.add_argument("--policy", default=None)
    sp.add_argument("--static", default=None,
                    help="directory with the browser client (default: "
                         "./frontend if it holds an index.html)")
    common(sp)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HarnessError, ConfigError, demo_mod.DatasetError,
            demo_mod.DemoGenerationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
