"""Slip-aware self-localization for tracked vehicles.

Learned local-velocity estimation from internal sensors fused by an
extended Kalman filter, with kinematic baselines, a synthetic
tracked-vehicle data simulator, and an evaluation harness.
"""

__version__ = "0.1.0"
