"""Shared fixtures: scenario variants, drift traces, and a closed-loop
autopilot that records task-completing master traces for replay."""

import numpy as np

from eyesim.engine import InputSample, RobotInput, step
from eyesim.formats import build_world, scenario_from_dict
from eyesim.kinematics import cross3


def noise_free(overrides=None):
    doc = {"scene": {"noise": {"force_sigma_mn": 0.0, "depth_sigma_mm": 0.0}}}
    if overrides:
        doc = _merge(doc, overrides)
    return doc


def _merge(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and k in out else v
    return out


def drift_samples(v_body_x=5e-3, duration=6.0, interval=0.1, side="right"):
    """Constant lateral body-x drift on one robot, idle on the other."""
    samples = []
    cmd = np.array([v_body_x, 0, 0, 0, 0, 0])
    t = 0.0
    while t <= duration:
        active = RobotInput(cmd.copy(), pedal=1.0, clutch=1)
        idle = RobotInput(np.zeros(6), pedal=1.0, clutch=1)
        samples.append(
            InputSample(
                t=t,
                right=active if side == "right" else idle,
                left=active if side == "left" else idle,
            )
        )
        t = round(t + interval, 9)
    return samples


def _pilot_command(world, side, target_world, v_max, kp):
    """Steer the tip toward a world point using only reachable motions:
    yaw/pitch pivots about the port plus sliding along the shaft. Solving the
    tip velocity in that basis keeps the shaft threaded through the port."""
    st = world.states[side]
    cfg = world.configs[side]
    R = st.pose.rotation
    shaft = R[:, 2]
    tip = st.pose.translation + cfg.shaft_length * shaft
    port = world.scene.port_world(cfg.port_index)
    err = target_world - tip
    v_tip = kp * err
    speed = np.linalg.norm(v_tip)
    if speed > v_max:
        v_tip *= v_max / speed
    r = tip - port
    basis = np.column_stack([cross3(np.array([0.0, 0, 1.0]), r),
                             cross3(np.array([0.0, 1.0, 0]), r),
                             shaft])
    coeff = np.linalg.solve(basis + 1e-9 * np.eye(3), v_tip)
    omega = np.array([0.0, coeff[1], coeff[0]])
    v_handle = cross3(omega, st.pose.translation - port) + coeff[2] * shaft
    return np.concatenate([R.T @ v_handle, R.T @ omega])


def autopilot_trace(
    scenario_doc,
    color_order,
    v_max=0.015,
    kp=20.0,
    hold_ticks=10,
    max_time=30.0,
):
    """Run the sim with a closed-loop pilot on the dominant hand, recording
    the master commands so the trace can be replayed open loop."""
    sc = scenario_from_dict(scenario_doc)
    world = build_world(sc)
    colors = list(sc.task.colors)
    targets = [colors.index(c) for c in color_order] + ["start"]
    samples = []
    target_i = 0
    idle = RobotInput(np.zeros(6), pedal=1.0, clutch=1)
    while target_i < len(targets) and world.clock < max_time:
        goal = targets[target_i]
        if goal == "start":
            wp = world.task.start_world(world.scene)
        else:
            wp = world.task.pin_world(world.scene, goal)
        cmd = _pilot_command(world, "right", wp, v_max, kp)
        sample = InputSample(t=world.clock, right=RobotInput(cmd, 1.0, 1), left=idle)
        samples.append(sample)
        for _ in range(hold_ticks):
            world, _ = step(world, sample)
        if goal == "start":
            if world.progress.completed:
                break
        elif goal in world.progress.touch_order:
            target_i += 1
    # trailing idle sample so the replayed trace covers the completion tick
    samples.append(InputSample(t=world.clock, right=idle, left=idle))
    return samples, sc
