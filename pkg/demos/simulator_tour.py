"""A walk through the desk-scale simulator and its scripted operators.

Resets each task, describes the scene, then lets the direct persona drive
the screwdriver task to success tick by tick, printing the interesting
events (grasp, release, stage changes) along the way.

Run from the repository root:  python3 demos/simulator_tour.py
"""

from hitld.geometry import Twist, quat_to_euler
from hitld.sim import (
    TASKS,
    check_reset,
    check_success,
    make_operator,
    make_task,
    render_cloud,
    reset,
    step,
)

# Step 1: the three tasks. Every scene is a flat table plus a few rigid
# bodies; fixtures (cup, plate) are scenery, the rest can be grasped.
for name in TASKS:
    scene = reset(make_task(name), seed=0)
    parts = ", ".join(
        f"{oid}@({o.position[0]:+.2f},{o.position[1]:+.2f},{o.position[2]:+.2f})"
        + ("" if o.graspable else " [fixture]")
        for oid, o in scene.objects.items())
    print(f"{name:<12} {parts}")

# Step 2: rendering. The observation pipeline samples points on visible
# surfaces; density is per square meter, so object size sets point share.
scene = reset(make_task("screwdriver"), seed=0)
cloud = render_cloud(scene, points_per_m2=8000.0, seed=1)
print(f"\nrendered {len(cloud)} points; "
      f"z range [{cloud.positions[:, 2].min():.3f}, {cloud.positions[:, 2].max():.3f}]")

# Step 3: drive an episode. The direct persona issues full 6-DoF commands;
# the loop below is exactly what run_episode does, unrolled for visibility.
task = make_task("screwdriver")
scene = reset(task, seed=5)
operator = make_operator("direct", task, seed=5)
last_stage = None
for tick in range(task.max_ticks):
    cmd = operator.step(scene)
    if cmd.stage != last_stage:
        rpy = quat_to_euler(scene.gripper.orientation)
        print(f"tick {tick:4d}  stage -> {cmd.stage:<16} "
              f"gripper rpy ({rpy.roll:+.2f}, {rpy.pitch:+.2f}, {rpy.yaw:+.2f})")
        last_stage = cmd.stage
    twist = Twist(cmd.translation, cmd.rotation)
    scene, events = step(scene, twist, cmd.gripper, dt=0.05)
    for event in events:
        print(f"tick {tick:4d}  event: {event['type']} {event.get('object', '')}")
    if check_success(scene, task):
        print(f"tick {tick:4d}  success ({tick * 0.05:.1f} s simulated)")
        break
    if check_reset(scene, task):
        print(f"tick {tick:4d}  reset condition hit")
        break
else:
    print("ran out of ticks")

tool = scene.objects["screwdriver"]
cup = scene.objects["cup"]
print(f"\nfinal: screwdriver at z={tool.position[2]:.3f} inside cup at "
      f"({cup.position[0]:+.2f},{cup.position[1]:+.2f})")
