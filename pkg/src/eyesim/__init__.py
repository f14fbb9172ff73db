"""Deterministic digital-twin simulator and control library for bimanual
robot-assisted eye surgery: screw kinematics, adaptive sclera-force control
with hybrid kinematic-force switching, constrained joint-velocity
optimization, a compliant eye-phantom world model, and a safety-metrics
pipeline with scripted-trace and live-teleoperation front ends.
"""

__version__ = "0.1.0"
