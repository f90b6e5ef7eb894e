"""Head-to-head: assisted orientation against the mode-switching baseline.

Trains a quick policy from one demonstration, then runs the same task under
two control modes: hitl_d (the persona only translates; the policy owns
orientation) and cartesian (a low-DoF persona that must toggle between
translation and rotation, paying an idle delay per switch). Prints the
per-episode rows and the aggregate, which is the shape of the full study
the `hitld study` command runs over all tasks.

Run from the repository root:  python3 demos/shared_control_study.py
"""

import time

from hitld.demo import scripted_expert
from hitld.policy import PolicyConfig, train
from hitld.shared_control import LoopConfig, run_episode
from hitld.sim import make_task

TRIALS = 3

# Step 1: one demonstration, one policy. Short training run; the shipped
# defaults train longer and track tighter.
base = make_task("screwdriver")
t0 = time.time()
policy = train(scripted_expert(base, seed=3), PolicyConfig(epochs=150, seed=0))
print(f"policy ready in {time.time() - t0:.1f} s\n")

# Step 2: the grid. Studies jitter the layout a little per seed so trials
# are not replicas; each mode gets the persona that motivates it.
task = make_task("screwdriver", position_jitter=0.01, yaw_jitter=0.05)
pairs = (("hitl_d", "direct"), ("cartesian", "mode_switching"))
rows = []
print(f"{'mode':<12}{'persona':<16}{'seed':>6}{'success':>9}{'ticks':>8}"
      f"{'seconds':>9}{'switches':>10}")
for mode, persona in pairs:
    for trial in range(TRIALS):
        cfg = LoopConfig.for_task(task, seed=trial)
        metrics = run_episode(task, persona, mode,
                              policy if mode == "hitl_d" else None, cfg, trial)
        row = metrics.to_row()
        rows.append(row)
        print(f"{mode:<12}{persona:<16}{row['seed']:>6}{row['success']:>9}"
              f"{row['completion_ticks']:>8}{row['completion_seconds']:>9.2f}"
              f"{row['switches']:>10}")

# Step 3: the aggregate. The rotation-heavy insertion is where freeing the
# human from orientation pays off; switch count is the telltale.
print()
for mode, _ in pairs:
    g = [r for r in rows if r["mode"] == mode]
    done = [r for r in g if r["success"]]
    mean_s = sum(r["completion_seconds"] for r in done) / max(len(done), 1)
    print(f"{mode:<12} success {len(done)}/{len(g)}, "
          f"mean completion {mean_s:.1f} s, "
          f"switches {sum(r['switches'] for r in g)}")
