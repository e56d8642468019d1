import numpy as np
import pytest

from polarkit.fresnel import MaterialConfig
from polarkit.imaging import PolarStack
from polarkit.oracle import OracleMaterial, PlaneGeometry, SceneSpec, SphereGeometry, render_synthetic
from polarkit.separation import ReflectionPair, diffuse_profile, separate, specular_profile
from polarkit.stokes import compute_stokes

M15 = MaterialConfig(1.5)


def pearson(a, b):
    a = np.asarray(a, float) - np.mean(a)
    b = np.asarray(b, float) - np.mean(b)
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / denom) if denom > 0 else 0.0


def test_specular_profile_examples():
    ex = (0.9, 0.3)
    assert specular_profile(ex, 0.0) == pytest.approx(0.9)
    assert specular_profile(ex, np.pi / 2) == pytest.approx(0.3)
    assert specular_profile(ex, np.pi / 4) == pytest.approx(0.6)


def test_diffuse_profile_examples():
    ex = (0.9, 0.3)
    assert diffuse_profile(ex, np.pi / 2) == pytest.approx(0.9)
    assert diffuse_profile(ex, 0.0) == pytest.approx(0.3)
    assert diffuse_profile(ex, np.pi / 4) == pytest.approx(0.6)


def test_profiles_phase_shifted_by_half_pi():
    ex = (1.2, 0.4)
    thetas = np.linspace(0, np.pi, 50)
    np.testing.assert_allclose(
        specular_profile(ex, thetas), diffuse_profile(ex, thetas + np.pi / 2), atol=1e-12
    )


def test_pure_diffuse_plane_gives_zero_specular():
    spec = SceneSpec(
        geometry=PlaneGeometry(),
        material=OracleMaterial(albedo=0.7, specular_weight=0.0),
        resolution=32,
    )
    bundle = render_synthetic(spec)
    pair = separate(bundle.stack, M15)
    scene_level = float(np.max(0.5 * compute_stokes(bundle.stack).s0))
    assert np.max(pair.i_sp) < 1e-3 * scene_level


def test_mixed_sphere_specular_correlation():
    spec = SceneSpec(
        geometry=SphereGeometry(radius=1.5),
        material=OracleMaterial(albedo=0.65, specular_weight=0.08),
        ambient=1.0,
        resolution=128,
    )
    bundle = render_synthetic(spec)
    pair = separate(bundle.stack, M15)
    sel = ~pair.degenerate & bundle.foreground
    assert sel.sum() > 5000
    assert pearson(pair.i_sp[sel], bundle.gt_sp[sel]) > 0.95


def test_unpolarized_pixel_falls_back():
    stack = PolarStack(*(np.full((4, 4), 0.25) for _ in range(4)))
    pair = separate(stack, M15)
    s0 = compute_stokes(stack).s0
    np.testing.assert_allclose(pair.i_sp, 0.0, atol=1e-15)
    np.testing.assert_allclose(pair.i_dp, 0.5 * s0, atol=1e-15)
    assert pair.degenerate.all()


def test_fusion_closure_exact():
    rng = np.random.default_rng(0)
    stack = PolarStack(*(rng.uniform(0.05, 1.0, (32, 32)) for _ in range(4)))
    pair = separate(stack, M15)
    s0 = compute_stokes(stack).s0
    np.testing.assert_allclose(pair.i_sp + pair.i_dp, 0.5 * s0, rtol=0, atol=1e-12)


def test_nonnegative_and_finite_everywhere():
    rng = np.random.default_rng(1)
    # adversarial mix: dark pixels, saturated-polarization pixels, normal pixels
    i0 = rng.uniform(0, 1, (24, 24))
    i90 = np.where(rng.uniform(size=(24, 24)) < 0.3, 0.0, rng.uniform(0, 1, (24, 24)))
    i45 = rng.uniform(0, 1, (24, 24))
    i135 = i45.copy()
    i0[0, :] = 0.0
    i90[0, :] = 0.0
    i45[0, :] = 0.0
    i135[0, :] = 0.0
    pair = separate(PolarStack(i0, i45, i90, i135), M15)
    assert np.all(np.isfinite(pair.i_sp)) and np.all(np.isfinite(pair.i_dp))
    assert np.all(pair.i_sp >= 0) and np.all(pair.i_dp >= 0)


def test_saturated_dolp_marked_degenerate():
    # fully polarized pixel: DoLP ~ 1 exceeds the diffuse model's range
    stack = PolarStack(
        np.full((2, 2), 1.0), np.full((2, 2), 0.5),
        np.full((2, 2), 0.0), np.full((2, 2), 0.5),
    )
    pair = separate(stack, M15)
    assert pair.degenerate.all()
    s0 = compute_stokes(stack).s0
    np.testing.assert_allclose(pair.i_dp, 0.5 * s0, atol=1e-15)


def test_scale_equivariance():
    spec = SceneSpec(
        geometry=SphereGeometry(radius=1.4),
        material=OracleMaterial(albedo=0.5, specular_weight=0.1),
        ambient=1.0,
        resolution=48,
    )
    stack = render_synthetic(spec).stack
    pair1 = separate(stack, M15)
    c = 2.7
    pair2 = separate(stack.scaled(c), M15)
    np.testing.assert_allclose(pair2.i_sp, c * pair1.i_sp, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(pair2.i_dp, c * pair1.i_dp, rtol=1e-10, atol=1e-14)
    np.testing.assert_array_equal(pair2.degenerate, pair1.degenerate)


def test_reflection_pair_invariants():
    with pytest.raises(ValueError):
        ReflectionPair(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros((2, 2), dtype=bool))
    with pytest.raises(ValueError):
        ReflectionPair(
            np.full((2, 2), -0.1), np.zeros((2, 2)), np.zeros((2, 2), dtype=bool)
        )
