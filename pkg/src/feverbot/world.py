"""World model: differential-drive robot, scripted people, obstacles and sensors.

All randomness comes from ``World.rng`` (a single PCG64 generator seeded with
``World.rng_seed``). Draw order is fixed:

* world construction: 1 uniform for the per-run thermal bias
* ``simulate_lidar``: 720 normals (always drawn, even when sigma is 0)
* ``simulate_detections``: 1 uniform per in-frustum candidate, in person-id order
* ``simulate_thermal_frame``: 160*120 normals, 1 uniform for the spike test,
  then 1 integer and 1 uniform if a spike fires

The harness calls the three sensors in that order once per tick.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

NO_RETURN = math.inf

IMAGE_W = 640
IMAGE_H = 480
HALF_FOV = math.pi / 6
# pinhole focal lengths that put the 30 deg half-angle at the image edge
F_H = (IMAGE_W / 2) / math.tan(HALF_FOV)
F_V = (IMAGE_H / 2) / math.tan(HALF_FOV)

THERMAL_W = 160
THERMAL_H = 120

LIDAR_BEAMS = 720
LIDAR_STEP = math.radians(0.5)
LIDAR_MIN = 0.12
LIDAR_MAX = 10.0

Rect = tuple  # (x_min, y_min, x_max, y_max)


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    # (pi - a) % 2pi lies in [0, 2pi)
    return math.pi - ((math.pi - a) % (2 * math.pi))


_wrap = normalize_angle


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap(float(self.theta)))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    w: float = 0.0


@dataclass(frozen=True)
class RobotLimits:
    v_max: float = 0.274  # 986 m/h
    w_max: float = 1.0
    a_max: float = 0.25
    alpha_max: float = 1.5
    radius: float = 0.25
    pan_limit: float = math.pi / 2
    tilt_limit: float = math.pi / 4


@dataclass(frozen=True)
class RobotState:
    pose: Pose2D
    v: float = 0.0
    w: float = 0.0
    pan: float = 0.0
    tilt: float = 0.0
    tilt_split: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class Person:
    id: int
    waypoints: tuple  # ((t, x, y), ...)
    height: float = 1.7
    core_temp: float = 36.6
    entry_time: Optional[float] = None
    cold_offset: float = 0.0
    cold_tau: float = 60.0
    radius: float = 0.2
    replies: tuple = ()

    def __post_init__(self):
        wps = tuple(tuple(float(c) for c in wp) for wp in self.waypoints)
        if not wps:
            raise ValueError(f"person {self.id}: at least one waypoint required")
        for a, b in zip(wps, wps[1:]):
            if not b[0] > a[0]:
                raise ValueError(f"person {self.id}: waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)
        if self.entry_time is None:
            object.__setattr__(self, "entry_time", wps[0][0])

    @property
    def t_start(self) -> float:
        return self.waypoints[0][0]

    @property
    def t_end(self) -> float:
        return self.waypoints[-1][0]

    def active(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end

    def position(self, t: float) -> Optional[tuple]:
        """Piecewise-linear position, or None outside the scripted time span."""
        if not self.active(t):
            return None
        wps = self.waypoints
        if len(wps) == 1:
            return wps[0][1], wps[0][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(wps, wps[1:]):
            if t <= t1:
                s = (t - t0) / (t1 - t0)
                return x0 + s * (x1 - x0), y0 + s * (y1 - y0)
        return wps[-1][1], wps[-1][2]

    def surface_temp(self, t: float) -> float:
        elapsed = max(0.0, t - self.entry_time)
        return self.core_temp - self.cold_offset * math.exp(-elapsed / self.cold_tau)


@dataclass(frozen=True)
class CameraModel:
    f_h: float = F_H
    f_v: float = F_V
    height: float = 0.85
    max_range: float = 8.0
    half_fov: float = HALF_FOV


@dataclass(frozen=True)
class NoiseModel:
    lidar_sigma: float = 0.01
    thermal_sigma: float = 0.2
    p_spike: float = 0.01
    spike_range: tuple = (45.0, 60.0)
    bias_bound: float = 0.5
    k_vib: float = 1.5
    ambient: float = 20.0


@dataclass
class LidarScan:
    angles: np.ndarray  # relative to robot heading
    ranges: np.ndarray  # NO_RETURN (inf) where nothing valid was hit


@dataclass(frozen=True)
class Detection:
    person_id: int
    bbox: tuple  # (x_min, y_min, x_max, y_max), detection-image pixels

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (0 <= x0 < x1 <= IMAGE_W and 0 <= y0 < y1 <= IMAGE_H):
            raise ValueError(f"invalid bbox {self.bbox}")

    @property
    def center(self) -> tuple:
        x0, y0, x1, y1 = self.bbox
        return (x0 + x1) / 2, (y0 + y1) / 2


@dataclass
class ThermalFrame:
    temps: np.ndarray  # shape (120, 160), indexed [v, u]

    def __post_init__(self):
        if self.temps.shape != (THERMAL_H, THERMAL_W):
            raise ValueError(f"thermal frame must be {THERMAL_H}x{THERMAL_W}, got {self.temps.shape}")

    @property
    def width(self) -> int:
        return THERMAL_W

    @property
    def height(self) -> int:
        return THERMAL_H

    def at(self, u: int, v: int) -> float:
        return float(self.temps[v, u])


@dataclass
class World:
    bounds: Optional[tuple]  # (width, height) in meters, origin at (0, 0); None = unbounded
    obstacles: list
    people: list
    robot: RobotState
    clock: float = 0.0
    rng_seed: int = 0
    limits: RobotLimits = field(default_factory=RobotLimits)
    camera: CameraModel = field(default_factory=CameraModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    # circles (x, y, r) in the robot frame that the lidar sees but ignores (inside min range)
    self_occluders: tuple = ()
    rng: np.random.Generator = field(init=False, repr=False)
    thermal_bias: float = field(init=False)

    def __post_init__(self):
        self.obstacles = [tuple(float(c) for c in r) for r in self.obstacles]
        self.people = sorted(self.people, key=lambda p: p.id)
        self.rng = np.random.Generator(np.random.PCG64(self.rng_seed))
        b = self.noise.bias_bound
        u = self.rng.uniform()  # drawn even when b == 0 to keep the call order fixed
        self.thermal_bias = float((2 * u - 1) * b)

    def person(self, pid: int) -> Person:
        for p in self.people:
            if p.id == pid:
                return p
        raise KeyError(pid)


# ---------------------------------------------------------------- kinematics

def integrate_unicycle(pose: Pose2D, v: float, w: float, dt: float) -> Pose2D:
    """Exact constant-twist integration of the unicycle model."""
    th = pose.theta
    if abs(w) < 1e-9:
        return Pose2D(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th)
    th1 = th + w * dt
    r = v / w
    return Pose2D(pose.x + r * (math.sin(th1) - math.sin(th)),
                  pose.y - r * (math.cos(th1) - math.cos(th)), th1)


def _point_rect_distance(x: float, y: float, rect: Rect) -> float:
    x0, y0, x1, y1 = rect
    dx = max(x0 - x, 0.0, x - x1)
    dy = max(y0 - y, 0.0, y - y1)
    return math.hypot(dx, dy)


def collides(world: World, x: float, y: float) -> bool:
    r = world.limits.radius
    if world.bounds is not None:
        w, h = world.bounds
        if x - r < 0 or y - r < 0 or x + r > w or y + r > h:
            return True
    return any(_point_rect_distance(x, y, rect) < r for rect in world.obstacles)


def clamp_command(robot: RobotState, cmd: VelocityCommand, dt: float, limits: RobotLimits) -> VelocityCommand:
    dv = limits.a_max * dt
    dw = limits.alpha_max * dt
    v = min(max(cmd.v, robot.v - dv), robot.v + dv)
    v = min(max(v, 0.0), limits.v_max)
    w = min(max(cmd.w, robot.w - dw), robot.w + dw)
    w = min(max(w, -limits.w_max), limits.w_max)
    return VelocityCommand(v, w)


def step_world(world: World, dt: float, cmd: VelocityCommand) -> World:
    """Advance the world by one tick, mutating and returning it.

    The command is clamped to the speed and acceleration limits. If the
    integrated motion would put the robot disc inside an obstacle or wall, the
    motion is truncated at contact (bisection on the travelled fraction) and
    both speeds are zeroed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    robot = world.robot
    applied = clamp_command(robot, cmd, dt, world.limits)
    pose = integrate_unicycle(robot.pose, applied.v, applied.w, dt)
    v, w = applied.v, applied.w
    if collides(world, pose.x, pose.y):
        lo, hi = 0.0, 1.0
        for _ in range(40):
            mid = (lo + hi) / 2
            p = integrate_unicycle(robot.pose, applied.v, applied.w, dt * mid)
            if collides(world, p.x, p.y):
                hi = mid
            else:
                lo = mid
        pose = integrate_unicycle(robot.pose, applied.v, applied.w, dt * lo)
        v, w = 0.0, 0.0
    world.robot = replace(robot, pose=pose, v=v, w=w)
    world.clock += dt
    return world


# ---------------------------------------------------------------- lidar

def _slab(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    par = d == 0
    inside = (lo <= o) & (o <= hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    return tmin, tmax


def _ray_rect(ox, oy, dx, dy, rect):
    x0, y0, x1, y1 = rect
    txa, txb = _slab(ox, dx, x0, x1)
    tya, tyb = _slab(oy, dy, y0, y1)
    tnear = np.maximum(txa, tya)
    tfar = np.minimum(txb, tyb)
    hit = (tnear <= tfar) & (tfar >= 0)
    return np.where(hit, np.maximum(tnear, 0.0), np.inf)


def _ray_circle(ox, oy, dx, dy, cx, cy, r):
    fx, fy = ox - cx, oy - cy
    b = dx * fx + dy * fy
    c = fx * fx + fy * fy - r * r
    disc = b * b - c
    if c <= 0:
        return np.zeros_like(dx)
    with np.errstate(invalid="ignore"):
        t = -b - np.sqrt(disc)
    return np.where((disc >= 0) & (t >= 0), t, np.inf)


def _ray_walls(ox, oy, dx, dy, bounds):
    w, h = bounds
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (w - ox) / dx, np.where(dx < 0, -ox / dx, np.inf))
        ty = np.where(dy > 0, (h - oy) / dy, np.where(dy < 0, -oy / dy, np.inf))
    return np.maximum(np.minimum(tx, ty), 0.0)


def raycast(world: World, angles: np.ndarray) -> np.ndarray:
    """Noise-free distance to the nearest surface along each world-frame angle."""
    pose = world.robot.pose
    ox, oy = pose.x, pose.y
    dx, dy = np.cos(angles), np.sin(angles)
    best = np.full(angles.shape, np.inf)
    if world.bounds is not None:
        best = np.minimum(best, _ray_walls(ox, oy, dx, dy, world.bounds))
    for rect in world.obstacles:
        best = np.minimum(best, _ray_rect(ox, oy, dx, dy, rect))
    for p in world.people:
        pos = p.position(world.clock)
        if pos is not None:
            best = np.minimum(best, _ray_circle(ox, oy, dx, dy, pos[0], pos[1], p.radius))
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    for (lx, ly, r) in world.self_occluders:
        cx, cy = ox + c * lx - s * ly, oy + s * lx + c * ly
        best = np.minimum(best, _ray_circle(ox, oy, dx, dy, cx, cy, r))
    return best


def simulate_lidar(world: World) -> LidarScan:
    rel = np.arange(LIDAR_BEAMS) * LIDAR_STEP
    true = raycast(world, rel + world.robot.pose.theta)
    noise = world.rng.normal(0.0, 1.0, LIDAR_BEAMS) * world.noise.lidar_sigma
    ranges = true + noise
    ranges[(ranges < LIDAR_MIN) | (ranges > LIDAR_MAX) | ~np.isfinite(ranges)] = NO_RETURN
    return LidarScan(angles=rel, ranges=ranges)


# ---------------------------------------------------------------- camera

def segment_blocked(world: World, ax: float, ay: float, bx: float, by: float) -> bool:
    dx, dy = np.array([bx - ax]), np.array([by - ay])
    for rect in world.obstacles:
        t = _ray_rect(ax, ay, dx, dy, rect)[0]
        if t <= 1.0:
            return True
    return False


def camera_bearing(robot: RobotState, x: float, y: float) -> float:
    """Horizontal angle of (x, y) off the optical axis, positive to the right.

    Pan is positive when the camera is turned right (clockwise seen from
    above), so the optical axis points along ``theta - pan``.
    """
    target = math.atan2(y - robot.pose.y, x - robot.pose.x)
    return _wrap(robot.pose.theta - robot.pan - target)


def project_person(world: World, person: Person) -> Optional[tuple]:
    """Project a visible person into the detection image.

    Returns the unclamped bbox (x_min, y_min, x_max, y_max) or None when the
    person is inactive, outside the horizontal frustum, beyond camera range or
    occluded. The person is a camera-facing billboard of width 2*radius, so the
    bbox center column is exactly ``320 + f_h * tan(bearing)``.
    """
    pos = person.position(world.clock)
    if pos is None:
        return None
    robot = world.robot
    cam = world.camera
    rx, ry = robot.pose.x, robot.pose.y
    dist = math.hypot(pos[0] - rx, pos[1] - ry)
    if dist > cam.max_range or dist < 1e-6:
        return None
    bearing = camera_bearing(robot, pos[0], pos[1])
    if abs(bearing) > cam.half_fov:
        return None
    if segment_blocked(world, rx, ry, pos[0], pos[1]):
        return None
    depth = dist * math.cos(bearing)
    lateral = dist * math.sin(bearing)
    xc = IMAGE_W / 2 + cam.f_h * lateral / depth
    half_w = cam.f_h * person.radius / depth
    top = IMAGE_H / 2 - cam.f_v * math.tan(math.atan2(person.height - cam.height, depth) - robot.tilt)
    bottom = IMAGE_H / 2 - cam.f_v * math.tan(math.atan2(-cam.height, depth) - robot.tilt)
    return xc - half_w, top, xc + half_w, bottom


def _clamp_bbox(bbox) -> Optional[tuple]:
    x0, y0, x1, y1 = bbox
    x0, x1 = max(0.0, x0), min(float(IMAGE_W), x1)
    y0, y1 = max(0.0, y0), min(float(IMAGE_H), y1)
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, y0, x1, y1


def visible_people(world: World) -> list:
    """(person, clamped bbox) for every geometrically visible person, id order."""
    out = []
    for p in world.people:
        raw = project_person(world, p)
        if raw is None:
            continue
        box = _clamp_bbox(raw)
        if box is not None:
            out.append((p, box))
    return out


def simulate_detections(world: World) -> list:
    """Detections in the 640x480 image, with speed-dependent vibration misses."""
    p_miss = min(1.0, world.noise.k_vib * abs(world.robot.v))
    out = []
    for person, box in visible_people(world):
        u = world.rng.uniform()
        if u < p_miss:
            continue
        out.append(Detection(person.id, box))
    return out


def person_present_count(detections: Sequence[Detection]) -> int:
    return len(detections)


def simulate_thermal_frame(world: World) -> ThermalFrame:
    nz = world.noise
    base = np.full((THERMAL_H, THERMAL_W), nz.ambient)
    uc = np.arange(THERMAL_W) * 4 + 2.0  # thermal pixel centers in detection pixels
    vc = np.arange(THERMAL_H) * 4 + 2.0
    vis = visible_people(world)
    rx, ry = world.robot.pose.x, world.robot.pose.y

    def dist(item):
        pos = item[0].position(world.clock)
        return -math.hypot(pos[0] - rx, pos[1] - ry)

    # far to near so nearer people overwrite
    for person, (x0, y0, x1, y1) in sorted(vis, key=dist):
        cols = (uc >= x0) & (uc <= x1)
        rows = (vc >= y0) & (vc <= y1)
        base[np.ix_(rows, cols)] = person.surface_temp(world.clock) + world.thermal_bias
    temps = base + world.rng.normal(0.0, 1.0, base.shape) * nz.thermal_sigma
    if world.rng.uniform() < nz.p_spike:
        idx = int(world.rng.integers(THERMAL_W * THERMAL_H))
        lo, hi = nz.spike_range
        temps.flat[idx] = world.rng.uniform(lo, hi)
    return ThermalFrame(temps)


# ---------------------------------------------------------------- pinhole helpers

def bearing_to_px(bearing: float, f: float = F_H) -> float:
    """Center-origin, rightward-positive pixel column of a target at ``bearing``
    (positive = to the right of the optical axis)."""
    return f * math.tan(bearing)


def px_to_bearing(px: float, f: float = F_H) -> float:
    return math.atan2(px, f)
