"""High-level control stack for the eye robots.

Adaptive sclera-force regulation: once a lateral force component crosses the
activation threshold, that axis follows an exponentially decaying force
reference toward half the threshold while estimating tissue compliance
online. A per-axis hysteresis switch blends adaptive velocities with the
scaled master (or admittance) command; the remaining channels always pass
the kinematic command through.

Units at this interface: forces in mN, velocities in m/s, time in s.
Compliance estimates are in m/mN so gains multiply mN quantities directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .kinematics import BodyVelocity


@dataclass(frozen=True)
class AfcGains:
    """Adaptive force controller constants (shared by the x and y axes)."""

    threshold_mn: float = 100.0  # activation threshold, mN
    safe_limit_mn: float = 120.0  # reporting/safety limit, mN
    force_gain: float = 2e-4  # (m/s) per mN of force error
    adapt_gain: float = 5e-7  # compliance adaptation rate, (m/mN) per (mN^2/s)
    alpha0: float = 0.0  # initial compliance estimate, m/mN

    def __post_init__(self) -> None:
        if not self.threshold_mn < self.safe_limit_mn:
            raise ValueError("activation threshold must sit below the safe limit")
        if self.force_gain <= 0 or self.adapt_gain <= 0:
            raise ValueError("force and adaptation gains must be positive")


@dataclass(frozen=True)
class AfcAxisState:
    """Per-axis adaptive controller state (one instance per lateral axis)."""

    delta: int = 0  # 1 while adaptive force control owns the axis
    t_activation: float = 0.0
    sign_at_activation: float = 1.0
    alpha: float = 0.0  # current compliance estimate, m/mN
    f_d: float = 0.0  # last desired force, mN (meaningless while delta=0)
    f_d_dot: float = 0.0


@dataclass(frozen=True)
class MotionScaling:
    """Diagonal motion-scaling gains for the six velocity channels."""

    kappa: tuple[float, ...] = (1.0,) * 6

    def __post_init__(self) -> None:
        if len(self.kappa) != 6:
            raise ValueError("motion scaling requires exactly 6 gains")
        if any(k < 0 for k in self.kappa):
            raise ValueError("motion scaling gains must be non-negative")


@dataclass
class MasterBodyMap:
    """Rotation taking master-device frame axes onto robot body-frame axes."""

    rotation: np.ndarray

    def __post_init__(self) -> None:
        self.rotation = np.asarray(self.rotation, dtype=float)
        err = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3)))
        if err > 1e-10 or abs(np.linalg.det(self.rotation) - 1.0) > 1e-10:
            raise ValueError("master-body map must be a proper rotation")


def desired_force_trajectory(
    gains: AfcGains, axis_state: AfcAxisState, t: float
) -> tuple[float, float]:
    """Desired force and its rate for an active axis.

    The reference starts at the signed activation threshold and decays with
    unit rate toward half of it, so the regulated axis is steered to a safe
    residual force rather than to zero contact.
    """
    if axis_state.delta != 1:
        raise ValueError("desired force trajectory is defined only while active")
    elapsed = t - axis_state.t_activation
    if elapsed < 0:
        raise ValueError("time precedes the activation instant")
    half = 0.5 * gains.threshold_mn * axis_state.sign_at_activation
    decay = math.exp(-elapsed)
    return half * (decay + 1.0), -half * decay


def afc_axis_velocity(
    gains: AfcGains, axis_state: AfcAxisState, f_si: float, t: float, dt: float
) -> tuple[float, AfcAxisState]:
    """Adaptive linear velocity for one lateral axis plus the updated state.

    Velocity is the compliance-weighted reference rate minus a proportional
    force-error term; the compliance estimate integrates (explicit Euler)
    opposite the product of reference rate and force error.
    """
    f_d, f_d_dot = desired_force_trajectory(gains, axis_state, t)
    df = f_si - f_d
    x_dot = axis_state.alpha * f_d_dot - gains.force_gain * df
    alpha = axis_state.alpha + dt * (-gains.adapt_gain * f_d_dot * df)
    return x_dot, replace(axis_state, alpha=alpha, f_d=f_d, f_d_dot=f_d_dot)


def switching_policy(
    gains: AfcGains, axis_state: AfcAxisState, f_si: float, t: float
) -> AfcAxisState:
    """Hysteresis switch between kinematic and adaptive force control.

    Inactive axes activate when |force| reaches the threshold, latching the
    activation time and force sign. Active axes stay active until |force|
    drops to 75% of the threshold, then hand the axis back to the master.
    """
    if axis_state.delta == 0:
        if abs(f_si) >= gains.threshold_mn:
            return replace(
                axis_state,
                delta=1,
                t_activation=t,
                sign_at_activation=1.0 if f_si >= 0 else -1.0,
            )
        return axis_state
    if abs(f_si) > 0.75 * gains.threshold_mn:
        return axis_state
    return replace(axis_state, delta=0)


def hybrid_command(
    switch_x: AfcAxisState,
    switch_y: AfcAxisState,
    scaling: MotionScaling,
    x_o_b: BodyVelocity,
    x_a: tuple[float, float],
) -> BodyVelocity:
    """Blend the scaled kinematic command with the adaptive axis velocities.

    Each lateral channel is either the scaled master velocity (switch off)
    or the adaptive velocity (switch on); the four remaining channels are
    always the scaled master command. The adaptive terms are deliberately
    not motion-scaled.
    """
    k = scaling.kappa
    vo = x_o_b.as_vector()
    dx, dy = switch_x.delta, switch_y.delta
    out = np.array(
        [
            (1 - dx) * k[0] * vo[0] + dx * x_a[0],
            (1 - dy) * k[1] * vo[1] + dy * x_a[1],
            k[2] * vo[2],
            k[3] * vo[3],
            k[4] * vo[4],
            k[5] * vo[5],
        ]
    )
    return BodyVelocity.from_vector(out)


def map_master_to_body(mapping: MasterBodyMap, x_o: BodyVelocity) -> BodyVelocity:
    """Rotate a master-frame velocity into the robot body frame, blockwise."""
    return BodyVelocity(mapping.rotation @ x_o.linear, mapping.rotation @ x_o.angular)


def admittance_command(handle_wrench: np.ndarray, admittance_gain: np.ndarray) -> BodyVelocity:
    """Cooperative mode: diagonal admittance from handle wrench (N, N*m) to
    a desired body velocity."""
    w = np.asarray(handle_wrench, dtype=float)
    gain = np.asarray(admittance_gain, dtype=float)
    if w.shape != (6,) or gain.shape != (6,):
        raise ValueError("wrench and admittance gain must be 6-vectors")
    return BodyVelocity.from_vector(gain * w)


def pedal_scale(cmd: BodyVelocity, pedal: float) -> BodyVelocity:
    """Scale the kinematic command by the foot-pedal value in [0, 1].

    Applies only to the master-side command: the adaptive force channels are
    blended in afterwards, so safety regulation is never clutched out.
    """
    p = min(max(pedal, 0.0), 1.0)
    return BodyVelocity(p * cmd.linear, p * cmd.angular)


def master_safety_scale(gains: AfcGains, fs_norm: float) -> float:
    """Impedance factor on the master channel as the port load nears the
    safe limit: full authority while the force norm sits below the activation
    threshold, fading linearly to zero at the safe limit.

    The per-axis switches only bound individual components; with both lateral
    components near the threshold the norm can reach sqrt(2) times it, so
    this governor is what keeps the norm itself under the safe limit.
    """
    span = gains.safe_limit_mn - gains.threshold_mn
    return min(1.0, max(0.0, (gains.safe_limit_mn - abs(fs_norm)) / span))
