import math

import numpy as np
import pytest

from motioncue.cue_field import derive_delta_depth, derive_mean_flow
from motioncue.errors import DegenerateConfig, NoContact
from motioncue.sim_data import (
    Ball,
    Scene,
    head_on_scene,
    mass_sweep_outcome,
    random_scene,
    render_clip,
    simulate_states,
    step,
)


def kinetic_energy(balls):
    return sum(0.5 * b.mass * (b.velocity[0] ** 2 + b.velocity[1] ** 2) for b in balls)


def momentum(balls):
    px = sum(b.mass * b.velocity[0] for b in balls)
    py = sum(b.mass * b.velocity[1] for b in balls)
    return px, py


def test_equal_mass_head_on_exchanges_velocities():
    a = Ball(center=(0.0, 0.0), velocity=(2.0, 0.0), radius=1.0, mass=1.0)
    b = Ball(center=(4.5, 0.0), velocity=(-2.0, 0.0), radius=1.0, mass=1.0)
    # after one step centers are 0.5 apart -> in contact, still approaching
    out = step((a, b), dt=1.0)
    assert out[0].velocity == (-2.0, 0.0)
    assert out[1].velocity == (2.0, 0.0)


def test_heavy_striker_formulas():
    # m1 = 10 m2, target at rest: v1' = 9/11 v1, v2' = 20/11 v1
    v = 1.0
    a = Ball(center=(0.0, 0.0), velocity=(v, 0.0), radius=1.0, mass=10.0)
    b = Ball(center=(2.5, 0.0), velocity=(0.0, 0.0), radius=1.0, mass=1.0)
    out = step((a, b), dt=1.0)
    assert math.isclose(out[0].velocity[0], 9.0 / 11.0 * v, rel_tol=1e-15)
    assert math.isclose(out[1].velocity[0], 20.0 / 11.0 * v, rel_tol=1e-15)


def test_free_flight_is_straight_line():
    a = Ball(center=(1.0, 2.0), velocity=(0.5, -0.25), radius=1.0, mass=1.0)
    states = simulate_states(Scene(32, 32, (a,)), frames=5)
    for t, state in enumerate(states):
        assert state[0].center == (1.0 + 0.5 * t, 2.0 - 0.25 * t)


def test_conservation_across_random_collisions():
    rng = np.random.default_rng(123)
    checked = 0
    for trial in range(200):
        m1, m2 = rng.uniform(0.2, 5.0, 2)
        r1, r2 = rng.uniform(0.5, 2.0, 2)
        # aim two balls at each other with random offsets
        a = Ball(center=(0.0, float(rng.uniform(-0.5, 0.5))), velocity=(float(rng.uniform(0.5, 2.0)), float(rng.uniform(-0.5, 0.5))), radius=float(r1), mass=float(m1))
        b = Ball(center=(float(r1 + r2 + rng.uniform(0.0, 1.0)), 0.0), velocity=(float(rng.uniform(-2.0, 0.0)), float(rng.uniform(-0.5, 0.5))), radius=float(r2), mass=float(m2))
        balls = (a, b)
        before_p = momentum(balls)
        before_ke = kinetic_energy(balls)
        for _ in range(5):
            balls = step(balls, dt=0.5)
        after_p = momentum(balls)
        after_ke = kinetic_energy(balls)
        if balls[0].velocity != a.velocity:
            checked += 1
        scale = max(1.0, abs(before_p[0]), abs(before_p[1]))
        assert abs(after_p[0] - before_p[0]) <= 1e-12 * scale
        assert abs(after_p[1] - before_p[1]) <= 1e-12 * scale
        assert abs(after_ke - before_ke) <= 1e-9 * max(1.0, before_ke)
    assert checked > 50  # most trials actually collided


def test_coincident_centers_rejected():
    a = Ball(center=(1.0, 1.0), velocity=(0.0, 0.0), radius=1.0, mass=1.0)
    b = Ball(center=(1.0, 1.0), velocity=(0.0, 0.0), radius=1.0, mass=1.0)
    with pytest.raises(DegenerateConfig):
        step((a, b), dt=1.0)


def test_static_ball_clip_is_constant():
    scene = Scene(24, 24, (Ball(center=(12.0, 12.0), velocity=(0.0, 0.0), radius=4.0, mass=1.0),))
    clip = render_clip(scene, frames=6)
    assert np.all(clip.flow == 0.0)
    for t in range(1, clip.num_frames):
        assert np.array_equal(clip.frames[t], clip.frames[0])


def test_moving_ball_flow_closes_loop_with_mean_flow():
    scene = Scene(48, 32, (Ball(center=(10.0, 16.0), velocity=(2.0, 0.0), radius=5.0, mass=1.0),))
    clip = render_clip(scene, frames=8)
    for t in range(clip.num_frames - 1):
        mask = clip.masks[t, 0]
        assert derive_mean_flow(clip.flow[t], mask) == (2.0, 0.0)


def test_depth_motion_closes_loop_with_delta_depth():
    scene = Scene(
        32, 32,
        (Ball(center=(16.0, 16.0), velocity=(0.5, 0.0), radius=6.0, mass=1.0, z=0.5, vz=0.01),),
    )
    clip = render_clip(scene, frames=5)
    for t in range(clip.num_frames - 1):
        both = clip.masks[t, 0] & clip.masks[t + 1, 0]
        got = derive_delta_depth(clip.depth[t], clip.depth[t + 1], both)
        assert math.isclose(got, 0.01, abs_tol=1e-12)


def test_occlusion_and_mask_disjointness():
    near = Ball(center=(12.0, 12.0), velocity=(0.0, 0.0), radius=5.0, mass=1.0, z=0.2)
    far = Ball(center=(16.0, 12.0), velocity=(0.0, 0.0), radius=5.0, mass=1.0, z=0.8)
    clip = render_clip(Scene(28, 24, (near, far)), frames=2)
    overlap_pixel = clip.masks[0, :, 12, 14]
    assert overlap_pixel[0] and not overlap_pixel[1]  # nearer wins
    assert not np.any(clip.masks[0, 0] & clip.masks[0, 1])
    assert clip.depth[0, 12, 14] == 0.2
    assert clip.depth[0, 0, 0] == 1.0  # background


def test_clip_determinism():
    scene = random_scene(seed=9, num_balls=3)
    c1 = render_clip(scene, frames=10)
    c2 = render_clip(scene, frames=10)
    assert np.array_equal(c1.frames, c2.frames)
    assert np.array_equal(c1.flow, c2.flow)
    assert np.array_equal(c1.depth, c2.depth)


def test_mass_sweep_labels():
    scene = head_on_scene()
    assert mass_sweep_outcome(scene, 0.5) == "deflected"
    assert mass_sweep_outcome(scene, 2.0) == "pushes_through"
    assert mass_sweep_outcome(scene, 1.0) == "deflected"  # dead stop convention


def test_mass_sweep_no_contact():
    striker = Ball(center=(10.0, 10.0), velocity=(-1.0, 0.0), radius=2.0, mass=1.0)
    target = Ball(center=(40.0, 10.0), velocity=(0.0, 0.0), radius=2.0, mass=1.0)
    with pytest.raises(NoContact):
        mass_sweep_outcome(Scene(64, 20, (striker, target)), 1.0, horizon=30)


def test_default_frame_count():
    clip = render_clip(Scene(16, 16, (Ball(center=(8.0, 8.0), velocity=(0.1, 0.0), radius=3.0, mass=1.0),)))
    assert clip.num_frames == 49
    assert clip.flow.shape[0] == 48
    assert clip.fps == 16
