"""Attitude math for tracked-vehicle localization.

Angles follow the intrinsic Z-Y-X (yaw-pitch-roll) convention in a
right-handed frame whose x-axis points along the vehicle's travel
direction.  A pose is the 6-vector ``[x, y, z, roll, pitch, yaw]``
(meters and radians); attitude-only values are ``[roll, pitch, yaw]``.

Everything here is a pure function over plain ndarrays and is safe to
call from any thread.
"""

from __future__ import annotations

import math

import numpy as np

#: Half-width of the guard band around the Euler-rate singularity at
#: pitch = +-pi/2, in radians.  Failing loudly beats NaN propagation.
PITCH_GUARD = 1e-3

#: Largest |pitch| accepted by the rotation helpers.
PITCH_LIMIT = np.pi / 2.0 - PITCH_GUARD


class PitchSingularity(ValueError):
    """Pitch too close to +-90 deg for the Euler-angle formulation."""


_TWO_PI = 2.0 * math.pi


def wrap_angle(angle):
    """Wrap an angle (scalar or ndarray) into (-pi, pi]."""
    if np.ndim(angle) == 0:
        a = float(angle)
        wrapped = a - _TWO_PI * math.floor((a + math.pi) / _TWO_PI)
        return math.pi if wrapped <= -math.pi else wrapped
    a = np.asarray(angle, dtype=float)
    wrapped = a - _TWO_PI * np.floor((a + np.pi) / _TWO_PI)
    wrapped[wrapped <= -np.pi] = np.pi
    return wrapped


def _checked_rpy(rpy) -> tuple[float, float, float]:
    try:
        roll, pitch, yaw = (float(q) for q in rpy)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"attitude must be a 3-vector, got {rpy!r}") from exc
    if not (math.isfinite(roll) and math.isfinite(pitch) and math.isfinite(yaw)):
        raise ValueError(f"attitude contains non-finite entries: {rpy!r}")
    if not abs(pitch) < PITCH_LIMIT:
        raise PitchSingularity(
            f"|pitch| = {abs(pitch):.6f} rad is within {PITCH_GUARD} of pi/2"
        )
    return roll, pitch, yaw


def rot_xyz(rpy) -> np.ndarray:
    """Rotation matrix taking body-frame vectors to the global frame.

    ``rpy`` is ``[roll, pitch, yaw]`` in radians.  The result is
    orthonormal with determinant +1.
    """
    roll, pitch, yaw = _checked_rpy(rpy)
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy],
            [cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy],
            [-sp, sr * cp, cr * cp],
        ]
    )


def rot_rpy(rpy) -> np.ndarray:
    """Matrix mapping body angular velocity to global Euler-angle rates.

    Contains 1/cos(pitch) terms, so inputs must respect ``PITCH_LIMIT``;
    :class:`PitchSingularity` is raised beyond the guard band.
    """
    roll, pitch, _ = _checked_rpy(rpy)
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    tp = sp / cp
    return np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr / cp, cr / cp],
        ]
    )


def euler_rates_to_body(rpy) -> np.ndarray:
    """Inverse of :func:`rot_rpy`: global Euler-angle rates to body rates."""
    roll, pitch, _ = _checked_rpy(rpy)
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    return np.array(
        [
            [1.0, 0.0, -sp],
            [0.0, cr, sr * cp],
            [0.0, -sr, cr * cp],
        ]
    )
