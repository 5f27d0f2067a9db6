"""Fast invariant battery run by `motioncue selfcheck`.

Each check raises on failure; the runner prints one line per check and
returns a process exit code (0 clean, 1 any failure). The battery is a
condensed version of the test suite's property checks, kept quick enough
for routine use.
"""

import os
import tempfile

import numpy as np

from . import _kernels
from .cue_field import Arrow, InstanceSpec, compose_cue_field, rasterize_instance
from .dense_rope import collect_active, item_seed_sequence, sample_budget
from .diffusion_loss import (
    joint_loss,
    linear_alpha_bar,
    noise_sample,
    reconstruct_clean,
)
from .formats import read_cue1, write_cue1
from .metrics import score
from .rope_math import absolute_pe, grid_angles_block, rope_rotate, RotaryCode
from .rope_math import GridIndex
from .sim_data import head_on_scene, mass_sweep_outcome, random_scene, step


def check_rope_isometry():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.normal(size=16)
        code = RotaryCode(rng.normal(size=8))
        assert abs(np.linalg.norm(rope_rotate(x, code)) - np.linalg.norm(x)) <= 1e-12


def check_rope_shift_invariance():
    rng = np.random.default_rng(1)
    d = 16
    for _ in range(100):
        q, k = rng.normal(size=(2, d))
        a = GridIndex(*rng.integers(0, 32, size=3))
        shift = tuple(rng.integers(-4, 5, size=3))
        b = GridIndex(a.t + shift[0] + 8, a.h + shift[1] + 8, a.w + shift[2] + 8)
        a2 = GridIndex(a.t + 3, a.h + 2, a.w + 1)
        b2 = GridIndex(b.t + 3, b.h + 2, b.w + 1)
        angles = grid_angles_block([a, b, a2, b2], d)
        rows = [rope_rotate(v, RotaryCode(ang)) for v, ang in zip((q, k, q, k), angles)]
        assert abs(rows[0] @ rows[1] - rows[2] @ rows[3]) <= 1e-9


def check_budget_sampling():
    rng = np.random.default_rng(2)
    for case in range(200):
        n = int(rng.integers(4, 64))
        mask = rng.random(n) < 0.4
        if not mask.any():
            mask[int(rng.integers(0, n))] = True
        budget = int(rng.integers(1, 16))
        omega = collect_active(mask)
        picked = sample_budget(omega, budget, item_seed_sequence(3, case)).indices
        assert picked.shape == (budget,)
        assert np.isin(picked, omega.indices).all()
        again = sample_budget(omega, budget, item_seed_sequence(3, case)).indices
        assert np.array_equal(picked, again)
        if omega.m > budget:
            assert np.unique(picked).size == budget


def check_rasterization():
    rng = np.random.default_rng(4)
    for _ in range(5):
        h, w = 24, 20
        specs = []
        for k in range(2):
            mask = np.zeros((h, w), dtype=bool)
            y, x = rng.integers(4, h - 6), rng.integers(4, w - 6)
            mask[y: y + 5, x: x + 5] = True
            specs.append(
                InstanceSpec(
                    mask=mask,
                    arrow=Arrow(
                        (float(x), float(y)),
                        (float(x) + 3.0, float(y) + 1.0),
                        depth_delta=float(rng.uniform(-1, 1)),
                    ),
                    mass=float(rng.uniform(0.5, 2.0)),
                )
            )
        field = compose_cue_field(specs)
        inplane = np.hypot(field.u, field.v)
        assert np.all(inplane <= 1.0 + 1e-12)
        union = specs[0].mask | specs[1].mask
        assert np.all(field.planes[:, ~union] == 0.0)
        alpha, single = rasterize_instance(specs[0])
        assert np.all(alpha[specs[0].mask] <= 1.0) and np.all(alpha >= 0.0)
        assert np.all(single.planes[:, ~specs[0].mask] == 0.0)


def check_collisions():
    rng = np.random.default_rng(5)
    hits = 0
    for trial in range(50):
        scene = random_scene(int(rng.integers(0, 10_000)), speed=2.5)
        balls = scene.balls
        p0 = sum(b.mass * np.array(b.velocity) for b in balls)
        ke0 = sum(0.5 * b.mass * np.dot(b.velocity, b.velocity) for b in balls)
        for _ in range(40):
            nxt = step(balls, scene.dt)
            if any(a.velocity != b.velocity for a, b in zip(nxt, balls)):
                hits += 1
            balls = nxt
        p1 = sum(b.mass * np.array(b.velocity) for b in balls)
        ke1 = sum(0.5 * b.mass * np.dot(b.velocity, b.velocity) for b in balls)
        assert np.max(np.abs(p1 - p0)) <= 1e-12 * max(1.0, np.max(np.abs(p0)))
        assert abs(ke1 - ke0) <= 1e-9 * max(1.0, ke0)
    assert hits > 0


def check_mass_sweep():
    scene = head_on_scene()
    assert mass_sweep_outcome(scene, 0.5) == "deflected"
    assert mass_sweep_outcome(scene, 2.0) == "pushes_through"


def check_noising():
    rng = np.random.default_rng(6)
    sched = linear_alpha_bar()
    x0 = rng.normal(size=(6, 6))
    for t in (1, 20, 48):
        s = noise_sample(x0, t, sched, 7 + t)
        assert np.max(np.abs(reconstruct_clean(s) - x0)) <= 1e-10
    eps = rng.normal(size=(4, 4))
    assert joint_loss(eps, eps, eps) == 0.0
    assert abs(joint_loss(eps + 1.0, eps, eps, 0.5) - 1.0) <= 1e-12


def check_metrics():
    rng = np.random.default_rng(8)
    clip = rng.uniform(size=(4, 12, 12))
    assert score(clip, clip)["aggregate"] == 100.0
    a = np.zeros((3, 12, 12))
    b = np.zeros((3, 12, 12))
    a[1:, 1:3, 1:3] = 1.0
    b[1:, 8:10, 8:10] = 1.0
    assert score(a, b)["spatial_iou"] == 0.0


def check_cue1_roundtrip():
    rng = np.random.default_rng(9)
    tensor = rng.normal(size=(7, 5, 3)).astype(np.float32)
    fd, path = tempfile.mkstemp(suffix=".cue1")
    os.close(fd)
    try:
        write_cue1(path, tensor)
        back = read_cue1(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, tensor)
    finally:
        os.unlink(path)


def check_kernel_backends():
    rng = np.random.default_rng(10)
    from ._kernels import _fallback

    for _ in range(5):
        args = (12, 10, *rng.uniform(0, 10, size=4))
        a = _kernels.segment_distance_field(*args)
        b = _fallback.segment_distance_field(*args)
        assert np.array_equal(a, b)


def check_positional_encoding():
    pe = absolute_pe(5.0, 8)
    assert pe.shape == (8,)
    assert np.all(np.abs(pe) <= 1.0)
    assert np.allclose(pe[0::2] ** 2 + pe[1::2] ** 2, 1.0, atol=1e-12)


CHECKS = [
    ("rope isometry", check_rope_isometry),
    ("rope shift invariance", check_rope_shift_invariance),
    ("budget sampling", check_budget_sampling),
    ("cue rasterization", check_rasterization),
    ("collision conservation", check_collisions),
    ("mass sweep outcomes", check_mass_sweep),
    ("noising identities", check_noising),
    ("metric conventions", check_metrics),
    ("cue1 roundtrip", check_cue1_roundtrip),
    ("kernel backend parity", check_kernel_backends),
    ("absolute positional encoding", check_positional_encoding),
]


def run(out=print) -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # report every failure, keep going
            failures += 1
            out(f"FAIL {name}: {exc!r}")
        else:
            out(f"ok   {name}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed (backend: {_kernels.BACKEND})")
    return 0 if failures == 0 else 1
