"""Deterministic 2D rigid-disc simulator with ground-truth flow and depth.

Discs fly freely, collide elastically (restitution 1, impulse along the
contact normal, masses respected), and carry a camera-relative depth value z
in [0, 1] (smaller z is closer and occludes). Rendering produces grayscale
frames, per-instance visibility masks, a depth map (background = 1), and a
ground-truth flow field: every visible pixel of a disc carries that disc's
per-frame displacement. There are no walls; discs simply leave the frame.

Everything is a pure function of the scene, so clips are bit-reproducible.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import DegenerateConfig, NoContact

FPS = 16  # clip metadata only; velocities are in pixels per frame


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float]
    velocity: tuple[float, float]
    radius: float
    mass: float
    z: float = 0.5
    vz: float = 0.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class Scene:
    width: int
    height: int
    balls: tuple[Ball, ...]
    dt: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))


@dataclass
class Clip:
    """A rendered clip plus its exact ground truth."""

    frames: np.ndarray  # (F, H, W) float64 in [0, 1]
    flow: np.ndarray    # (F-1, H, W, 2) pixels/frame
    depth: np.ndarray   # (F, H, W), background 1.0
    masks: np.ndarray   # (F, K, H, W) bool, disjoint per frame
    states: list[tuple[Ball, ...]]
    fps: int = FPS

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def step(balls, dt: float):
    """Advance one frame: free flight, then elastic impulses on contact."""
    moved = []
    for b in balls:
        cx = b.center[0] + b.velocity[0] * dt
        cy = b.center[1] + b.velocity[1] * dt
        z = min(1.0, max(0.0, b.z + b.vz * dt))
        moved.append(replace(b, center=(cx, cy), z=z))

    vel = [list(b.velocity) for b in moved]
    for i in range(len(moved)):
        for j in range(i + 1, len(moved)):
            bi, bj = moved[i], moved[j]
            dx = bj.center[0] - bi.center[0]
            dy = bj.center[1] - bi.center[1]
            dist = np.hypot(dx, dy)
            if dist < 1e-12:
                raise DegenerateConfig(f"balls {i} and {j} have coincident centers")
            if dist > bi.radius + bj.radius:
                continue
            nx, ny = dx / dist, dy / dist
            u1 = vel[i][0] * nx + vel[i][1] * ny
            u2 = vel[j][0] * nx + vel[j][1] * ny
            if u1 - u2 <= 0.0:
                continue  # separating or resting contact
            m1, m2 = bi.mass, bj.mass
            u1p = ((m1 - m2) * u1 + 2.0 * m2 * u2) / (m1 + m2)
            u2p = ((m2 - m1) * u2 + 2.0 * m1 * u1) / (m1 + m2)
            vel[i][0] += (u1p - u1) * nx
            vel[i][1] += (u1p - u1) * ny
            vel[j][0] += (u2p - u2) * nx
            vel[j][1] += (u2p - u2) * ny

    return tuple(
        replace(b, velocity=(v[0], v[1])) for b, v in zip(moved, vel)
    )


def simulate_states(scene: Scene, frames: int):
    states = [scene.balls]
    for _ in range(frames - 1):
        states.append(step(states[-1], scene.dt))
    return states


def ball_shades(count: int) -> np.ndarray:
    """Distinct gray levels per instance; background stays 0."""
    return 0.3 + 0.7 * (np.arange(count) + 1.0) / count


def render_frame(scene: Scene, balls):
    """Rasterize one state: (frame, depth, per-ball masks), z-order resolved."""
    h, w = scene.height, scene.width
    cx = np.array([b.center[0] for b in balls])
    cy = np.array([b.center[1] for b in balls])
    r = np.array([b.radius for b in balls])
    z = np.array([b.z for b in balls])
    owner = _kernels.disc_owner_map(h, w, cx, cy, r, z)
    masks = owner[None, :, :] == np.arange(len(balls))[:, None, None]
    shades = ball_shades(len(balls))
    frame = np.where(owner >= 0, shades[np.clip(owner, 0, None)], 0.0)
    depth = np.where(owner >= 0, z[np.clip(owner, 0, None)], 1.0)
    return frame, depth, masks


def render_clip(scene: Scene, frames: int = 49) -> Clip:
    states = simulate_states(scene, frames)
    h, w = scene.height, scene.width
    k = len(scene.balls)
    frame_arr = np.zeros((frames, h, w))
    depth_arr = np.zeros((frames, h, w))
    mask_arr = np.zeros((frames, k, h, w), dtype=bool)
    for t, state in enumerate(states):
        frame_arr[t], depth_arr[t], mask_arr[t] = render_frame(scene, state)

    flow_arr = np.zeros((frames - 1, h, w, 2))
    for t in range(frames - 1):
        for i in range(k):
            disp_x = states[t + 1][i].center[0] - states[t][i].center[0]
            disp_y = states[t + 1][i].center[1] - states[t][i].center[1]
            flow_arr[t][mask_arr[t, i]] = (disp_x, disp_y)

    return Clip(frame_arr, flow_arr, depth_arr, mask_arr, states)


def head_on_scene(mass_ratio: float = 1.0, speed: float = 1.5) -> Scene:
    """Canonical two-ball setup: a striker launched at a resting target."""
    striker = Ball(center=(16.0, 24.0), velocity=(speed, 0.0), radius=5.0,
                   mass=mass_ratio, z=0.4)
    target = Ball(center=(44.0, 24.0), velocity=(0.0, 0.0), radius=5.0,
                  mass=1.0, z=0.6)
    return Scene(width=64, height=48, balls=(striker, target))


def mass_sweep_outcome(scene: Scene, mass_ratio: float, horizon: int = 200) -> str:
    """Post-contact behavior of the striker as its mass is varied.

    The striker (ball 0) gets mass = mass_ratio * target mass. After the
    first contact, a strictly forward post-contact velocity (along the
    striker's original direction) is "pushes_through"; anything else,
    including the equal-mass dead stop, is "deflected".
    """
    striker, target = scene.balls[0], scene.balls[1]
    balls = (replace(striker, mass=mass_ratio * target.mass), target)
    v0 = np.array(striker.velocity)
    norm = np.linalg.norm(v0)
    if norm == 0:
        raise DegenerateConfig("striker has zero velocity")
    direction = v0 / norm
    for _ in range(horizon):
        nxt = step(balls, scene.dt)
        if nxt[0].velocity != balls[0].velocity:
            along = float(np.dot(nxt[0].velocity, direction))
            return "pushes_through" if along > 0.0 else "deflected"
        balls = nxt
    raise NoContact(f"no collision within {horizon} frames")


def random_scene(
    seed: int,
    num_balls: int = 2,
    width: int = 64,
    height: int = 48,
    speed: float = 2.0,
    with_depth_motion: bool = False,
) -> Scene:
    """Non-overlapping random discs with random velocities and masses."""
    rng = np.random.default_rng(seed)
    balls = []
    for _ in range(num_balls):
        for _attempt in range(1000):
            radius = float(rng.uniform(3.0, min(width, height) / 6.0))
            cx = float(rng.uniform(radius, width - radius))
            cy = float(rng.uniform(radius, height - radius))
            if all(
                np.hypot(cx - b.center[0], cy - b.center[1]) > radius + b.radius + 1.0
                for b in balls
            ):
                break
        else:
            raise DegenerateConfig("could not place non-overlapping balls")
        balls.append(
            Ball(
                center=(cx, cy),
                velocity=(float(rng.uniform(-speed, speed)), float(rng.uniform(-speed, speed))),
                radius=radius,
                mass=float(rng.uniform(0.2, 5.0)),
                z=float(rng.uniform(0.2, 0.8)),
                vz=float(rng.uniform(-0.02, 0.02)) if with_depth_motion else 0.0,
            )
        )
    return Scene(width=width, height=height, balls=tuple(balls), seed=seed)
