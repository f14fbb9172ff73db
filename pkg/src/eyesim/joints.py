"""Mid-level joint-velocity optimizer and low-level velocity-tracking plant.

The optimizer turns a desired end-effector twist into joint velocities by
minimizing a damped least-squares objective under box constraints from the
velocity caps and the position limits reachable within one step. The plant
is a first-order lag with a per-joint acceleration clamp standing in for the
real servo loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import BodyVelocity, JointLimits

_MAX_ACTIVE_SET_ITERS = 100


@dataclass
class VelocityPlant:
    """First-order joint-velocity servo: lag time constant plus rate limit."""

    time_constant: float
    rate_limit: np.ndarray  # per-joint |dTheta_dot/dt| bound
    theta_dot: np.ndarray

    def __post_init__(self) -> None:
        if self.time_constant <= 0:
            raise ValueError("plant time constant must be positive")
        self.rate_limit = np.asarray(self.rate_limit, dtype=float)
        self.theta_dot = np.asarray(self.theta_dot, dtype=float)


def velocity_box(limits: JointLimits, theta: np.ndarray, dt: float):
    """Per-joint velocity bounds: velocity caps intersected with the rates
    that keep theta + theta_dot*dt inside the position limits. A joint found
    beyond a limit gets a recovery-only box (never empty: pos_min < pos_max)."""
    lo = np.clip((limits.pos_min - theta) / dt, -limits.vel_max, limits.vel_max)
    hi = np.clip((limits.pos_max - theta) / dt, -limits.vel_max, limits.vel_max)
    return lo, hi


def solve_box_qp(H: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Minimize 0.5 x'Hx - b'x over the box [lo, hi] for SPD H.

    Primal active-set iteration: solve the free subspace exactly, walk toward
    that point until a bound blocks, and release clamped coordinates whose
    multiplier has the wrong sign. Finite for SPD H; deterministic tie-breaks.
    """
    n = len(b)
    x = np.linalg.solve(H, b)  # fast path: unconstrained minimizer already feasible
    if np.all(x >= lo) and np.all(x <= hi):
        return x
    x = np.clip(np.zeros(n), lo, hi)
    state = np.zeros(n, dtype=int)  # 0 free, -1 at lower bound, +1 at upper
    for _ in range(_MAX_ACTIVE_SET_ITERS):
        free = state == 0
        y = x.copy()
        if np.any(free):
            clamped = ~free
            rhs = b[free] - H[np.ix_(free, clamped)] @ x[clamped]
            y[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        d = y - x
        alpha = 1.0
        blocker = -1
        block_bound = 0
        for i in np.flatnonzero(free):
            if d[i] > 0 and x[i] + d[i] > hi[i]:
                a = (hi[i] - x[i]) / d[i]
                if a < alpha - 1e-15:
                    alpha, blocker, block_bound = a, i, +1
            elif d[i] < 0 and x[i] + d[i] < lo[i]:
                a = (lo[i] - x[i]) / d[i]
                if a < alpha - 1e-15:
                    alpha, blocker, block_bound = a, i, -1
        if blocker >= 0:
            x = x + alpha * d
            x[blocker] = hi[blocker] if block_bound > 0 else lo[blocker]
            state[blocker] = block_bound
            continue
        x = y
        # Subspace optimum reached: check KKT signs of the clamped coordinates.
        grad = H @ x - b
        release = -1
        worst = 1e-12
        for i in np.flatnonzero(state == -1):  # descent available by moving up
            if -grad[i] > worst:
                worst, release = -grad[i], i
        for i in np.flatnonzero(state == +1):  # descent available by moving down
            if grad[i] > worst:
                worst, release = grad[i], i
        if release < 0:
            return np.clip(x, lo, hi)
        state[release] = 0
    raise RuntimeError("box QP active-set iteration failed to converge")


def solve_joint_velocities(
    J: np.ndarray,
    v_des: BodyVelocity | np.ndarray,
    limits: JointLimits,
    theta: np.ndarray,
    dt: float,
    damping: float = 1e-3,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Joint velocities minimizing ||J th_dot - v_des||^2_W + damping^2 ||th_dot||^2
    within the feasible velocity box. th_dot = 0 is always feasible."""
    v = v_des.as_vector() if isinstance(v_des, BodyVelocity) else np.asarray(v_des, dtype=float)
    J = np.asarray(J, dtype=float)
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(v))):
        raise ValueError("non-finite Jacobian or desired velocity")
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = np.ones(6) if weights is None else np.asarray(weights, dtype=float)
    Jw = J * w[:, None]
    H = J.T @ Jw + damping**2 * np.eye(J.shape[1])
    b = Jw.T @ v
    lo, hi = velocity_box(limits, theta, dt)
    return solve_box_qp(H, b, lo, hi)


def track_joint_velocity(
    plant: VelocityPlant, theta_dot_des: np.ndarray, dt: float
) -> tuple[VelocityPlant, np.ndarray]:
    """One servo step: exact discrete first-order lag toward the command,
    then clamp the per-joint change to rate_limit * dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    beta = 1.0 - np.exp(-dt / plant.time_constant)
    step = beta * (np.asarray(theta_dot_des, dtype=float) - plant.theta_dot)
    max_step = plant.rate_limit * dt
    step = np.clip(step, -max_step, max_step)
    actual = plant.theta_dot + step
    return VelocityPlant(plant.time_constant, plant.rate_limit, actual), actual
