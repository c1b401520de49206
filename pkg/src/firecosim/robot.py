"""Kinematic robot with a pinhole camera and a ray-cast depth/RGB renderer
over the axis-box scene.

The robot is a planar point with heading; commands are world-frame velocity
vectors or steering angles relative to a task axis. Motion is clamped against
solid scene boxes and the domain walls (axis-resolved sliding, never
penetrating).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .wire import CmdVelMsg, DepthMsg, ImageMsg, PoseMsg

ROBOT_BODY_LOW = 0.0
ROBOT_BODY_HIGH = 1.0  # z band used for collision against boxes
DOMAIN_MARGIN = 0.05

CAMERA_HEIGHT = 0.5
DEFAULT_HFOV_DEG = 90.0

BOX_COLORS = {
    "wall": (150, 150, 155),
    "obstacle": (150, 110, 80),
    "floor": (110, 110, 110),
    "ceiling": (170, 170, 175),
}
SKY_COLOR = (140, 170, 205)
GROUND_COLOR = (95, 100, 95)


@dataclass
class RobotState:
    x: float
    y: float
    heading: float  # radians, wrapped to (-pi, pi]
    speed: float
    stamp: float

    @property
    def pose2d(self):
        return (self.x, self.y, self.heading)


def wrap_angle(a: float) -> float:
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def steering_to_velocity(steering_deg: float, axis_heading: float, speed: float):
    h = axis_heading + math.radians(steering_deg)
    return speed * math.cos(h), speed * math.sin(h)


def _blocked(x, y, boxes, domain):
    if not (DOMAIN_MARGIN <= x <= domain[0] - DOMAIN_MARGIN
            and DOMAIN_MARGIN <= y <= domain[1] - DOMAIN_MARGIN):
        return True
    for b in boxes:
        if b.max[2] <= ROBOT_BODY_LOW or b.min[2] >= ROBOT_BODY_HIGH:
            continue
        if b.min[0] <= x <= b.max[0] and b.min[1] <= y <= b.max[1]:
            return True
    return False


def tick(state: RobotState, command, dt: float, scene=(), domain=(1e9, 1e9)) -> RobotState:
    """Integrate one robot step. `command` is a CmdVelMsg, an (vx, vy) pair,
    or None to coast in place."""
    if command is None:
        vx = vy = 0.0
    elif isinstance(command, CmdVelMsg):
        vx, vy = command.vx, command.vy
    else:
        vx, vy = float(command[0]), float(command[1])
    nx, ny = state.x + vx * dt, state.y + vy * dt
    # axis-resolved clamp: slide along whichever axis stays free
    if _blocked(nx, ny, scene, domain):
        if not _blocked(nx, state.y, scene, domain):
            ny = state.y
        elif not _blocked(state.x, ny, scene, domain):
            nx = state.x
        else:
            nx, ny = state.x, state.y
    speed = math.hypot(vx, vy)
    heading = math.atan2(vy, vx) if speed > 1e-12 else state.heading
    return RobotState(x=nx, y=ny, heading=wrap_angle(heading), speed=speed,
                      stamp=state.stamp + dt)


@dataclass
class CameraModel:
    position: np.ndarray  # world (3,)
    rotation: np.ndarray  # (3,3), columns are camera x (right), y (down), z (forward)
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def validate(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point outside the image")
        return self

    def rays(self):
        """World-frame unit ray directions, shape (h, w, 3)."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        uu, vv = np.meshgrid(u, v)
        d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
        d_cam = geo.normalize_rows(d_cam.reshape(-1, 3))
        d_world = d_cam @ self.rotation.T
        return d_world.reshape(self.height, self.width, 3)

    @property
    def forward(self):
        return self.rotation[:, 2]

    def quaternion(self):
        """(w, x, y, z) of the camera rotation."""
        return rotation_to_quaternion(self.rotation)


def rotation_to_quaternion(r: np.ndarray):
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    else:
        i = int(np.argmax([r[0, 0], r[1, 1], r[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(r[i, i] - r[j, j] - r[k, k] + 1.0, 0.0)) * 2.0
        q = [0.0, 0.0, 0.0]
        q[i] = 0.25 * s
        q[j] = (r[j, i] + r[i, j]) / s
        q[k] = (r[k, i] + r[i, k]) / s
        w = (r[k, j] - r[j, k]) / s
        x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    return (w / n, x / n, y / n, z / n)


def quaternion_to_rotation(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def camera_from_pose(pose, width, height, hfov_deg=DEFAULT_HFOV_DEG) -> CameraModel:
    """Rebuild a camera model from a pose message plus shared intrinsics."""
    fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    return CameraModel(
        position=np.array(pose.position, dtype=float),
        rotation=quaternion_to_rotation(pose.quaternion),
        fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
        width=width, height=height,
    ).validate()


def camera_for_robot(state: RobotState, width=320, height=240,
                     hfov_deg=DEFAULT_HFOV_DEG, height_m=CAMERA_HEIGHT) -> CameraModel:
    """Forward-facing camera rigidly mounted on the robot."""
    f = math.cos(state.heading), math.sin(state.heading), 0.0
    fwd = np.array(f)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd], axis=1)
    fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    return CameraModel(
        position=np.array([state.x, state.y, height_m]),
        rotation=rot, fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
        width=width, height=height,
    ).validate()


def render_depth(scene, camera: CameraModel) -> np.ndarray:
    """Per-pixel z-depth (meters along the optical axis) of the nearest box;
    +inf where nothing is hit."""
    camera.validate()
    dirs = camera.rays().reshape(-1, 3)
    origins = np.broadcast_to(camera.position, dirs.shape)
    t = np.full(len(dirs), geo.INF)
    for b in scene:
        t = np.minimum(t, geo.ray_aabb_entry(origins, dirs, b.min_arr, b.max_arr))
    z = t * (dirs @ camera.forward)
    return z.reshape(camera.height, camera.width)


def render_rgb(scene, camera: CameraModel) -> np.ndarray:
    """Flat-shaded render of the scene boxes (ambient plus distance shading);
    purely deterministic. Returns (h, w, 3) uint8."""
    camera.validate()
    dirs = camera.rays().reshape(-1, 3)
    origins = np.broadcast_to(camera.position, dirs.shape)
    n = len(dirs)
    t_best = np.full(n, geo.INF)
    color = np.empty((n, 3))
    color[:] = SKY_COLOR
    for b in scene:
        t = geo.ray_aabb_entry(origins, dirs, b.min_arr, b.max_arr)
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        color[closer] = BOX_COLORS.get(b.kind, BOX_COLORS["obstacle"])
    t_ground = geo.ray_plane_z0(origins, dirs)
    gcloser = t_ground < t_best
    t_best = np.where(gcloser, t_ground, t_best)
    color[gcloser] = GROUND_COLOR
    shade = np.where(np.isfinite(t_best), 0.35 + 0.65 * np.exp(-t_best / 12.0), 1.0)
    out = np.rint(color * shade[:, None]).astype(np.uint8)
    return out.reshape(camera.height, camera.width, 3)


def camera_triplet(state: RobotState, scene, width=320, height=240, hfov_deg=DEFAULT_HFOV_DEG):
    """Render the (rgb, depth, pose) triplet the robot publishes."""
    cam = camera_for_robot(state, width, height, hfov_deg)
    depth = render_depth(scene, cam)
    rgb = render_rgb(scene, cam)
    pose = PoseMsg(position=tuple(cam.position), quaternion=cam.quaternion())
    return (ImageMsg(width=width, height=height, pixels=rgb),
            DepthMsg(width=width, height=height, depth=depth),
            pose, cam)
