"""Temperature extraction from the thermal frame and debounced fever detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .world import IMAGE_H, IMAGE_W, THERMAL_H, THERMAL_W, Detection, ThermalFrame

FEVER_THRESHOLD = 38.0
REQUIRED_READINGS = 3


@dataclass(frozen=True)
class ThermalPoint:
    u: int
    v: int

    def __post_init__(self):
        if not (0 <= self.u < THERMAL_W and 0 <= self.v < THERMAL_H):
            raise ValueError(f"thermal point ({self.u}, {self.v}) outside the frame")


@dataclass(frozen=True)
class DebounceState:
    consecutive_over: int = 0
    threshold: float = FEVER_THRESHOLD
    required: int = REQUIRED_READINGS
    last_reading: Optional[float] = None


@dataclass(frozen=True)
class FeverEvent:
    person_id: int
    reading: float


def map_to_thermal(x: float, y: float) -> ThermalPoint:
    """Scale a detection-image point (640x480) down to the 160x120 thermal grid."""
    if not (0 <= x <= IMAGE_W and 0 <= y <= IMAGE_H):
        raise ValueError(f"point ({x}, {y}) outside the {IMAGE_W}x{IMAGE_H} image")
    u = min(int(math.floor(x * THERMAL_W / IMAGE_W)), THERMAL_W - 1)
    v = min(int(math.floor(y * THERMAL_H / IMAGE_H)), THERMAL_H - 1)
    return ThermalPoint(u, v)


def sample_nine(frame: ThermalFrame, p: ThermalPoint) -> list:
    """The 3x3 neighbourhood around ``p``, row-major, edges clamped into the frame."""
    out = []
    for dv in (-1, 0, 1):
        v = min(max(p.v + dv, 0), THERMAL_H - 1)
        for du in (-1, 0, 1):
            u = min(max(p.u + du, 0), THERMAL_W - 1)
            out.append(float(frame.temps[v, u]))
    return out


def max_temperature(samples: Sequence[float]) -> float:
    if len(samples) != 9:
        raise ValueError(f"expected nine samples, got {len(samples)}")
    return max(samples)


def debounce_update(state: DebounceState, reading: float) -> tuple:
    """Returns (new_state, fever). Fever fires when the run of readings strictly
    above threshold reaches ``required``; the counter then restarts at 0."""
    if not math.isfinite(reading):
        raise ValueError("reading must be finite")
    count = state.consecutive_over + 1 if reading > state.threshold else 0
    if count >= state.required:
        return replace(state, consecutive_over=0, last_reading=reading), True
    return replace(state, consecutive_over=count, last_reading=reading), False


def screen_tick(frame: ThermalFrame, detection: Optional[Detection], state: DebounceState) -> tuple:
    """Returns (state, fever, reading); reading is None when there is no detection.

    ``fever`` is a :class:`FeverEvent` when the debounce fires, else ``None``.
    """
    if detection is None:
        return replace(state, consecutive_over=0), None, None
    cx, cy = detection.center
    reading = max_temperature(sample_nine(frame, map_to_thermal(cx, cy)))
    state, fired = debounce_update(state, reading)
    return state, (FeverEvent(detection.person_id, reading) if fired else None), reading
