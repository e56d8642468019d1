import numpy as np
import pytest

from polarkit import fresnel
from polarkit.fresnel import (
    DegenerateGeometryError,
    MaterialConfig,
    SaturationError,
    diffuse_dolp_forward,
    diffuse_dolp_max,
    fresnel_extrema_dp,
    fresnel_extrema_sp,
    incidence_from_dolp,
    refraction_angle,
)

M15 = MaterialConfig(1.5)


def test_material_requires_k_above_one():
    with pytest.raises(ValueError):
        MaterialConfig(1.0)
    with pytest.raises(ValueError):
        MaterialConfig(0.9)


def test_refraction_angle_examples():
    assert refraction_angle(0.0, M15) == 0.0
    assert np.degrees(refraction_angle(np.radians(30), M15)) == pytest.approx(
        np.degrees(np.arcsin(1.0 / 3.0)), abs=1e-9
    )
    assert np.degrees(refraction_angle(np.radians(30), M15)) == pytest.approx(19.471, abs=1e-3)
    assert np.degrees(refraction_angle(np.radians(80), M15)) == pytest.approx(41.03, abs=0.01)


def test_refraction_angle_domain():
    with pytest.raises(ValueError):
        refraction_angle(-0.1, M15)
    with pytest.raises(ValueError):
        refraction_angle(np.pi / 2, M15)


def test_angle_pair_invariants():
    pair = fresnel.angle_pair(np.radians(45), M15)
    assert pair.alpha_plus >= pair.alpha_minus >= 0
    assert pair.alpha_plus == pytest.approx(pair.incidence + pair.refraction)
    with pytest.raises(ValueError):
        fresnel.AnglePair(0.3, 0.4)  # refraction exceeding incidence


def test_diffuse_dolp_forward_examples():
    assert diffuse_dolp_forward(0.0, M15) == 0.0
    # frozen from the closed form evaluated at build time
    assert diffuse_dolp_forward(np.radians(45), M15) == pytest.approx(0.0439832, abs=1e-6)
    assert diffuse_dolp_forward(np.radians(75), M15) > diffuse_dolp_forward(
        np.radians(45), M15
    )


def test_diffuse_dolp_monotone_to_85deg():
    i = np.linspace(0.0, np.radians(85), 2000)
    d = diffuse_dolp_forward(i, M15)
    assert np.all(np.diff(d) > 0)


def test_dolp_max_is_supremum():
    for k in (1.3, 1.5, 1.8):
        m = MaterialConfig(k)
        dmax = diffuse_dolp_max(m)
        i = np.linspace(0, np.pi / 2 - 1e-9, 4000)
        assert np.all(diffuse_dolp_forward(i, m) <= dmax + 1e-12)
        # supremum approached at grazing incidence
        assert diffuse_dolp_forward(np.pi / 2 - 1e-7, m) == pytest.approx(dmax, abs=1e-6)


def test_incidence_from_dolp_examples():
    assert incidence_from_dolp(0.0, M15) == 0.0
    d45 = diffuse_dolp_forward(np.radians(45), M15)
    assert incidence_from_dolp(d45, M15) == pytest.approx(np.radians(45), abs=1e-6)
    d70 = diffuse_dolp_forward(np.radians(70), M15)
    assert incidence_from_dolp(d70, M15) == pytest.approx(np.radians(70), abs=1e-6)


def test_incidence_round_trip_grid():
    i = np.linspace(0.01, 1.45, 150)
    for k in (1.3, 1.5, 1.8):
        m = MaterialConfig(k)
        d = diffuse_dolp_forward(i, m)
        back = incidence_from_dolp(d, m)
        assert np.max(np.abs(back - i)) < 1e-6
        # forward(inverse(d)) matches d as well
        assert np.max(np.abs(diffuse_dolp_forward(back, m) - d)) < 1e-9


def test_incidence_saturation_error():
    with pytest.raises(SaturationError):
        incidence_from_dolp(diffuse_dolp_max(M15) + 1e-3, M15)
    with pytest.raises(SaturationError):
        incidence_from_dolp(-0.01, M15)
    # clamping to just below the supremum is the documented caller fallback
    incidence_from_dolp(diffuse_dolp_max(M15) - 1e-6, M15)


def test_specular_extrema_examples():
    # index-matched limit: i == r gives alpha_minus = 0 and no reflection
    imax, imin = fresnel_extrema_sp(1.0, 0.3, 0.3)
    assert imax == pytest.approx(0.0, abs=1e-15)
    assert imin == pytest.approx(0.0, abs=1e-15)
    # Brewster-like extinction: alpha_plus = pi/2 kills the parallel component
    am = 0.2
    i = (np.pi / 2 + am) / 2
    r = (np.pi / 2 - am) / 2
    imax, imin = fresnel_extrema_sp(1.0, i, r)
    assert imin == pytest.approx(0.0, abs=1e-15)
    assert imax > 0
    # generic k=1.5 geometry: positive pair, correct order
    i = np.radians(45)
    r = refraction_angle(i, M15)
    imax, imin = fresnel_extrema_sp(1.0, i, r)
    assert imax > imin > 0
    # equals (S0/2) * perpendicular/parallel Fresnel power reflectance
    ap, am = i + r, i - r
    assert imax == pytest.approx(0.5 * np.sin(am) ** 2 / np.sin(ap) ** 2, rel=1e-12)
    assert imin == pytest.approx(0.5 * np.tan(am) ** 2 / np.tan(ap) ** 2, rel=1e-12)


def test_specular_extrema_degeneracy_error():
    with pytest.raises(DegenerateGeometryError):
        fresnel_extrema_sp(1.0, 0.0, 0.0)


def test_specular_normal_incidence_limit():
    s0 = 0.8
    imax, imin = fresnel.specular_normal_incidence_extrema(s0, M15)
    expect = 0.5 * s0 * ((1.5 - 1) / (1.5 + 1)) ** 2
    assert imax == pytest.approx(expect, rel=1e-12)
    assert imin == pytest.approx(expect, rel=1e-12)
    # continuous with the exact formula just above the guard
    i = 1e-4
    r = refraction_angle(i, M15)
    near = fresnel_extrema_sp(s0, i, r)
    assert near[0] == pytest.approx(expect, rel=1e-4)


def test_diffuse_extrema_examples():
    # exact normal incidence returns (0, 0) via the degenerate branch
    assert fresnel_extrema_dp(1.0, 0.0, 0.0) == (0.0, 0.0)
    # alpha_minus = 0 (index-matched): Imin == Imax
    imax, imin = fresnel_extrema_dp(1.0, 0.4, 0.4)
    assert imin == pytest.approx(imax, rel=1e-12)
    # generic geometry: ratio Imin/Imax = cos^2(alpha_minus)
    i = np.radians(45)
    r = refraction_angle(i, M15)
    imax, imin = fresnel_extrema_dp(1.0, i, r)
    assert imax > imin > 0
    assert imin / imax == pytest.approx(np.cos(i - r) ** 2, rel=1e-12)


def test_extrema_homogeneous_degree_one():
    rng = np.random.default_rng(7)
    for _ in range(50):
        i = rng.uniform(0.05, 1.4)
        r = refraction_angle(i, M15)
        s = rng.uniform(0.1, 3.0)
        c = rng.uniform(0.1, 10.0)
        a = fresnel_extrema_sp(s, i, r)
        b = fresnel_extrema_sp(c * s, i, r)
        assert b[0] == pytest.approx(c * a[0], rel=1e-12)
        assert b[1] == pytest.approx(c * a[1], rel=1e-12)
        a = fresnel_extrema_dp(s, i, r)
        b = fresnel_extrema_dp(c * s, i, r)
        assert b[0] == pytest.approx(c * a[0], rel=1e-12)
        assert b[1] == pytest.approx(c * a[1], rel=1e-12)


def test_extrema_nonnegative_and_ordered():
    i = np.linspace(0.01, 1.55, 400)
    for k in (1.3, 1.5, 1.8):
        m = MaterialConfig(k)
        ii = np.minimum(i, np.pi / 2 - 1e-6)
        r = refraction_angle(ii, m)
        imax, imin = fresnel_extrema_sp(np.ones_like(ii), ii, r)
        assert np.all(imax >= imin) and np.all(imin >= 0)
        imax, imin = fresnel_extrema_dp(np.ones_like(ii), ii, r)
        assert np.all(imax >= imin) and np.all(imin >= 0)


def test_diffuse_extrema_consistent_with_forward_dolp():
    # DoLP of the diffuse extrema pair reproduces the Nayar forward model
    i = np.linspace(0.05, 1.5, 100)
    r = refraction_angle(i, M15)
    imax, imin = fresnel_extrema_dp(np.ones_like(i), i, r)
    dolp = (imax - imin) / (imax + imin)
    assert np.max(np.abs(dolp - diffuse_dolp_forward(i, M15))) < 1e-12
