import math

import numpy as np
import pytest

from motioncue.cue_field import (
    Arrow,
    CueField,
    InstanceSpec,
    compose_cue_field,
    default_sigma,
    derive_delta_depth,
    derive_mean_flow,
    paint_training_cue,
    rasterize_instance,
)
from motioncue.errors import DegenerateArrow, DimensionMismatch, EmptyMask


def full_mask(h, w):
    return np.ones((h, w), dtype=bool)


def brute_force_alpha(mask, arrow, sigma):
    """Per-pixel distance + falloff, written independently of the kernels."""
    h, w = mask.shape
    out = np.zeros((h, w))
    ax, ay = arrow.start
    bx, by = arrow.end
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            px, py = x + 0.5, y + 0.5
            seg2 = (bx - ax) ** 2 + (by - ay) ** 2
            if seg2 == 0:
                d = math.hypot(px - ax, py - ay)
            else:
                t = max(0.0, min(1.0, ((px - ax) * (bx - ax) + (py - ay) * (by - ay)) / seg2))
                d = math.hypot(px - (ax + t * (bx - ax)), py - (ay + t * (by - ay)))
            out[y, x] = math.exp(-(d * d) / (2 * sigma * sigma))
    return out


def brute_force_compose(specs, sigma):
    """Per-pixel argmax over alpha, ties to the lowest spec index."""
    h, w = specs[0].mask.shape
    planes = np.zeros((4, h, w))
    alphas = [brute_force_alpha(s.mask, s.arrow, sigma) for s in specs]
    for y in range(h):
        for x in range(w):
            best, best_a = -1, 0.0
            for k, a in enumerate(alphas):
                if a[y, x] > best_a:
                    best, best_a = k, a[y, x]
            if best < 0:
                continue
            s = specs[best]
            ux, uy = s.arrow.direction
            planes[0, y, x] = best_a * ux
            planes[1, y, x] = best_a * uy
            planes[2, y, x] = s.arrow.depth_delta
            planes[3, y, x] = s.mass
    return planes


def test_alpha_one_on_segment():
    # the segment passes through the center of pixel (4, y=2): d = 0
    spec = InstanceSpec(full_mask(6, 10), Arrow((1.5, 2.5), (8.5, 2.5)))
    alpha, contribution = rasterize_instance(spec, sigma=2.0)
    assert alpha[2, 4] == 1.0
    assert contribution.u[2, 4] == 1.0 and contribution.v[2, 4] == 0.0


def test_zero_outside_mask():
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:5, 2:5] = True
    spec = InstanceSpec(mask, Arrow((2.0, 3.0), (5.0, 3.0)), mass=0.7)
    alpha, contribution = rasterize_instance(spec, sigma=1.5)
    outside = ~mask
    assert np.all(alpha[outside] == 0.0)
    assert np.all(contribution.planes[:, outside] == 0.0)


def test_alpha_at_one_sigma():
    # horizontal segment along y=0.5; pixel row y=2 has centers at distance 2
    sigma = 2.0
    spec = InstanceSpec(full_mask(6, 6), Arrow((0.5, 0.5), (5.5, 0.5)))
    alpha, _ = rasterize_instance(spec, sigma=sigma)
    assert math.isclose(alpha[2, 3], math.exp(-0.5), rel_tol=1e-12)
    np.testing.assert_allclose(alpha, brute_force_alpha(spec.mask, spec.arrow, sigma), atol=1e-12)


def test_pure_out_of_plane_arrow():
    spec = InstanceSpec(full_mask(4, 4), Arrow((2.0, 2.0), (2.0, 2.0), depth_delta=-0.4))
    alpha, contribution = rasterize_instance(spec, sigma=1.0)
    assert np.all(contribution.u == 0.0) and np.all(contribution.v == 0.0)
    assert np.all(contribution.dz == -0.4)
    assert alpha.max() <= 1.0 and alpha.min() > 0.0


def test_degenerate_arrow_and_empty_mask():
    with pytest.raises(DegenerateArrow):
        rasterize_instance(InstanceSpec(full_mask(3, 3), Arrow((1, 1), (1, 1))))
    with pytest.raises(EmptyMask):
        rasterize_instance(InstanceSpec(np.zeros((3, 3), bool), Arrow((0, 0), (1, 1))))


def test_compose_single_spec_is_rasterize():
    spec = InstanceSpec(full_mask(7, 9), Arrow((1, 1), (6, 5)), mass=0.3)
    _, single = rasterize_instance(spec, sigma=1.2)
    composed = compose_cue_field([spec], sigma=1.2)
    assert np.array_equal(composed.planes, single.planes)


def test_closest_arrow_wins_on_overlap():
    mask = full_mask(6, 12)
    near = InstanceSpec(mask, Arrow((1.5, 3.5), (4.5, 3.5)), mass=0.2)
    far = InstanceSpec(mask, Arrow((1.5, 0.5), (10.5, 0.5)), mass=0.9)
    composed = compose_cue_field([far, near], sigma=1.0)
    # pixel (3, 3) lies on near's segment and three pixels from far's
    assert composed.mass[3, 3] == 0.2
    assert composed.u[3, 3] == 1.0


def test_exact_alpha_tie_goes_to_lower_index():
    mask = full_mask(5, 5)
    # two point arrows placed symmetrically around the center pixel (2, 2)
    a = InstanceSpec(mask, Arrow((1.5, 2.5), (1.5, 2.5), depth_delta=0.5), mass=0.4)
    b = InstanceSpec(mask, Arrow((3.5, 2.5), (3.5, 2.5), depth_delta=-0.5), mass=0.8)
    composed = compose_cue_field([a, b], sigma=1.0)
    assert composed.dz[2, 2] == 0.5
    assert composed.mass[2, 2] == 0.4


def test_compose_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(8):
        h, w = int(rng.integers(6, 16)), int(rng.integers(6, 16))
        sigma = float(rng.uniform(0.8, 3.0))
        specs = []
        for k in range(int(rng.integers(1, 4))):
            mask = rng.random((h, w)) < rng.uniform(0.3, 0.9)
            if not mask.any():
                mask[0, 0] = True
            start = tuple(rng.uniform(0, [w, h]))
            end = tuple(rng.uniform(0, [w, h]))
            if start == end:
                end = (start[0] + 1.0, start[1])
            specs.append(
                InstanceSpec(mask, Arrow(start, end, float(rng.uniform(-1, 1))), float(rng.uniform(0.1, 1)))
            )
        composed = compose_cue_field(specs, sigma=sigma)
        expected = brute_force_compose(specs, sigma)
        np.testing.assert_allclose(composed.planes, expected, atol=1e-12)
        # boundedness
        assert np.all(np.hypot(composed.u, composed.v) <= 1.0 + 1e-15)
        assert composed.dz.min() >= -1.0 and composed.dz.max() <= 1.0


def test_compose_rejects_dimension_mismatch():
    a = InstanceSpec(full_mask(4, 4), Arrow((0, 0), (1, 1)))
    b = InstanceSpec(full_mask(4, 5), Arrow((0, 0), (1, 1)))
    with pytest.raises(DimensionMismatch):
        compose_cue_field([a, b])


def test_mean_flow_constant_and_two_pixel():
    mask = full_mask(3, 3)
    flow = np.zeros((3, 3, 2))
    flow[..., 0], flow[..., 1] = 2.0, -1.0
    assert derive_mean_flow(flow, mask) == (2.0, -1.0)

    mask2 = np.zeros((2, 2), bool)
    mask2[0, 0] = mask2[1, 1] = True
    flow2 = np.zeros((2, 2, 2))
    flow2[0, 0] = (1.0, 0.0)
    flow2[1, 1] = (3.0, 4.0)
    assert derive_mean_flow(flow2, mask2) == (2.0, 2.0)


def test_mean_flow_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(20):
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        flow = rng.normal(size=(h, w, 2))
        mask = rng.random((h, w)) < 0.5
        if not mask.any():
            mask[0, 0] = True
        sx = sy = 0.0
        count = 0
        for y in range(h):
            for x in range(w):
                if mask[y, x]:
                    sx += flow[y, x, 0]
                    sy += flow[y, x, 1]
                    count += 1
        got = derive_mean_flow(flow, mask)
        assert math.isclose(got[0], sx / count, rel_tol=1e-13, abs_tol=1e-13)
        assert math.isclose(got[1], sy / count, rel_tol=1e-13, abs_tol=1e-13)


def test_mean_flow_linearity():
    rng = np.random.default_rng(6)
    mask = rng.random((9, 9)) < 0.6
    mask[4, 4] = True
    f1, f2 = rng.normal(size=(9, 9, 2)), rng.normal(size=(9, 9, 2))
    a, b = 2.5, -0.75
    lhs = derive_mean_flow(a * f1 + b * f2, mask)
    m1, m2 = derive_mean_flow(f1, mask), derive_mean_flow(f2, mask)
    np.testing.assert_allclose(lhs, (a * m1[0] + b * m2[0], a * m1[1] + b * m2[1]), atol=1e-12)


def test_delta_depth_cases():
    mask = full_mask(4, 4)
    d0 = np.random.default_rng(7).random((4, 4))
    assert derive_delta_depth(d0, d0, mask) == 0.0
    assert math.isclose(derive_delta_depth(d0, d0 + 0.3, mask), 0.3, rel_tol=1e-12)

    rng = np.random.default_rng(8)
    d1, d2 = rng.random((5, 5)), rng.random((5, 5))
    m = rng.random((5, 5)) < 0.5
    m[0, 0] = True
    expected = sum(d2[y, x] - d1[y, x] for y in range(5) for x in range(5) if m[y, x]) / m.sum()
    assert math.isclose(derive_delta_depth(d1, d2, m), expected, rel_tol=1e-12, abs_tol=1e-13)


def test_paint_training_cue_constants():
    mask = np.zeros((4, 6), bool)
    mask[1:3, 2:5] = True
    painted = paint_training_cue((0.0, 0.0), 0.0, 1.0, mask)
    assert np.all(painted.planes[:3] == 0.0)
    assert np.all(painted.mass[mask] == 1.0)

    painted = paint_training_cue((0.5, 0.0), -0.2, 1.0, mask)
    assert np.all(painted.u[mask] == 0.5)
    assert np.all(painted.v[mask] == 0.0)
    assert np.all(painted.dz[mask] == -0.2)
    assert np.all(painted.planes[:, ~mask] == 0.0)


def test_paint_speed_normalization_and_clipping():
    mask = full_mask(2, 2)
    painted = paint_training_cue((6.0, 8.0), 0.0, 0.5, mask, max_speed=5.0)
    # (1.2, 1.6) exceeds unit norm -> rescaled to norm 1
    assert math.isclose(math.hypot(painted.u[0, 0], painted.v[0, 0]), 1.0, rel_tol=1e-12)
    assert math.isclose(painted.u[0, 0] / painted.v[0, 0], 6.0 / 8.0, rel_tol=1e-12)

    painted = paint_training_cue((1.0, 0.0), 3.0, 0.5, mask)
    assert np.all(painted.dz[mask] == 1.0)


def test_paint_two_instances_matches_per_instance_values():
    m1 = np.zeros((5, 5), bool)
    m2 = np.zeros((5, 5), bool)
    m1[:2], m2[3:] = True, True
    p1 = paint_training_cue((0.3, 0.1), 0.2, 0.5, m1)
    p2 = paint_training_cue((-0.4, 0.0), -0.1, 1.0, m2)
    combined = CueField(p1.planes + p2.planes)  # disjoint masks
    for y in range(5):
        for x in range(5):
            if m1[y, x]:
                assert combined.mass[y, x] == 0.5 and combined.u[y, x] == 0.3
            elif m2[y, x]:
                assert combined.mass[y, x] == 1.0 and combined.u[y, x] == -0.4
            else:
                assert np.all(combined.planes[:, y, x] == 0.0)


def test_rotation_covariance_of_direction():
    # rotating the arrow rotates the in-plane field; alpha is unchanged when
    # the rotated segment occupies the same geometry relative to the pixels
    mask = full_mask(21, 21)
    c = 10.5
    for phi in (0.3, 1.1, 2.0):
        base = InstanceSpec(mask, Arrow((c - 3, c), (c + 3, c)))
        rot = InstanceSpec(
            mask,
            Arrow(
                (c - 3 * math.cos(phi), c - 3 * math.sin(phi)),
                (c + 3 * math.cos(phi), c + 3 * math.sin(phi)),
            ),
        )
        _, f0 = rasterize_instance(base, sigma=2.0)
        _, f1 = rasterize_instance(rot, sigma=2.0)
        u0, v0 = f0.u[10, 10], f0.v[10, 10]
        exp_u = u0 * math.cos(phi) - v0 * math.sin(phi)
        exp_v = u0 * math.sin(phi) + v0 * math.cos(phi)
        assert math.isclose(f1.u[10, 10], exp_u, abs_tol=1e-12)
        assert math.isclose(f1.v[10, 10], exp_v, abs_tol=1e-12)


def test_default_sigma_rule():
    assert default_sigma(100, 60) == 3.0
    assert default_sigma(40, 200) == 2.0
