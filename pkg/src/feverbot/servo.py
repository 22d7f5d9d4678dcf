"""Pan-tilt alignment from bounding-box pixel error.

The camera spans 60 degrees on both axes over 640x480 pixels, so a pixel
offset maps linearly onto an angle with the half-image (320 or 240 px) at
pi/6. Yaw and pitch are added to the current pan/tilt each tick; repeated
application drives the bbox center onto the image center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .world import IMAGE_H, IMAGE_W, Detection, RobotState

PX_MAX = IMAGE_W // 2
PY_MAX = IMAGE_H // 2
ALPHA_MAX = math.pi / 6
BETA_MAX = math.pi / 6


@dataclass(frozen=True)
class ManipulatorModel:
    R: float = 0.1
    px_max: int = PX_MAX
    py_max: int = PY_MAX
    alpha_max: float = ALPHA_MAX
    beta_max: float = BETA_MAX
    pan_limit: float = math.pi / 2
    tilt_limit: float = math.pi / 4

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")


@dataclass(frozen=True)
class PixelOffset:
    px: float  # rightward positive
    py: float  # upward positive

    def __post_init__(self):
        if abs(self.px) > PX_MAX or abs(self.py) > PY_MAX:
            raise ValueError(f"pixel offset ({self.px}, {self.py}) outside the image")


@dataclass(frozen=True)
class JointTarget:
    yaw: float
    pitch: float


def center_offset(d: Detection) -> PixelOffset:
    x0, y0, x1, y1 = d.bbox
    return PixelOffset((x0 + x1) / 2 - PX_MAX, PY_MAX - (y0 + y1) / 2)


def yaw_from_pixel(px: float) -> float:
    if abs(px) > PX_MAX:
        raise ValueError(f"|px| must be <= {PX_MAX}, got {px}")
    return math.pi / (6 * PX_MAX) * px


def pitch_from_pixel(py: float) -> float:
    if abs(py) > PY_MAX:
        raise ValueError(f"|py| must be <= {PY_MAX}, got {py}")
    return math.pi / (6 * PY_MAX) * py


def joint_target(offset: PixelOffset) -> JointTarget:
    return JointTarget(yaw_from_pixel(offset.px), pitch_from_pixel(offset.py))


def _clamp(x: float, lim: float) -> float:
    return min(max(x, -lim), lim)


def align_step(state: RobotState, offset: PixelOffset,
               model: Optional[ManipulatorModel] = None) -> RobotState:
    """One incremental servo update; pitch is shared equally by the two pitch joints."""
    model = model or ManipulatorModel()
    if offset.px == 0 and offset.py == 0:
        return state
    target = joint_target(offset)
    pan = _clamp(state.pan + target.yaw, model.pan_limit)
    tilt = _clamp(state.tilt + target.pitch, model.tilt_limit)
    return replace(state, pan=pan, tilt=tilt, tilt_split=(tilt / 2, tilt - tilt / 2))


def approximation_error(R: float, D: float) -> float:
    """Relative error of replacing R + D by D."""
    if R < 0 or D <= 0:
        raise ValueError("need R >= 0 and D > 0")
    return R / (R + D)


def select_target(detections: Sequence[Detection]) -> Optional[Detection]:
    """Detection nearest the image center; ties go to the lowest person id."""
    if not detections:
        return None

    def key(d):
        off = center_offset(d)
        return math.hypot(off.px, off.py), d.person_id

    return min(detections, key=key)
