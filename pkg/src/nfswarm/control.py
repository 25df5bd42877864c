"""Turning field gradients into velocity commands."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potential import FieldEval


@dataclass(frozen=True)
class ControlGains:
    K: float = 1.0
    k_v: float = 1.0
    k_w: float = 2.0

    def __post_init__(self):
        if not (self.K > 0 and self.k_v > 0 and self.k_w > 0):
            raise ValueError("control gains must be strictly positive")


@dataclass
class HeadingTracker:
    """Remembers the last desired heading so its rate can be differenced."""

    previous_desired_heading: float | None = None
    previous_time: float | None = None


def wrap_angle(x: float) -> float:
    """Map an angle into (-pi, pi]."""
    y = math.fmod(x + math.pi, 2.0 * math.pi)
    if y <= 0.0:
        y += 2.0 * math.pi
    return y - math.pi


def gradient_control(field: FieldEval, gains: ControlGains) -> np.ndarray:
    return -gains.K * np.asarray(field.gradient, dtype=float)


def desired_heading(field: FieldEval, current_heading: float = 0.0) -> float:
    """Direction of steepest descent; keeps ``current_heading`` at a critical point."""
    gx, gy = float(field.gradient[0]), float(field.gradient[1])
    if gx == 0.0 and gy == 0.0:
        return wrap_angle(current_heading)
    return wrap_angle(math.atan2(-gy, -gx))


def heading_error(current: float, desired: float) -> float:
    return wrap_angle(current - desired)


def heading_rate(tracker: HeadingTracker, desired: float, time: float) -> float:
    """Backward-difference rate of the desired heading; 0 on the first call."""
    if tracker.previous_time is None:
        rate = 0.0
    else:
        dt = time - tracker.previous_time
        if not dt > 0:
            raise ValueError("heading_rate needs strictly increasing time")
        rate = wrap_angle(desired - tracker.previous_desired_heading) / dt
    tracker.previous_desired_heading = wrap_angle(desired)
    tracker.previous_time = time
    return rate


def unicycle_control(field: FieldEval, current_heading: float, tracker: HeadingTracker,
                     time: float, gains: ControlGains) -> tuple[float, float]:
    """Linear and angular velocity that steer a unicycle down the field."""
    theta_d = desired_heading(field, current_heading)
    err = heading_error(current_heading, theta_d)
    rate = heading_rate(tracker, theta_d, time)
    norm = math.hypot(float(field.gradient[0]), float(field.gradient[1]))
    v = gains.k_v * norm * math.cos(err)
    omega = -gains.k_w * err + rate
    return v, omega
