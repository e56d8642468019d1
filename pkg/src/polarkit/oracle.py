"""Analytic forward renderer of polarized scenes: the verification oracle.

Plane or sphere under an orthographic camera looking along -z, so the
zenith angle of every pixel equals the polar angle of its normal. Per
pixel, the specular component reflects a uniform unpolarized environment
(drive = specular weight) and the diffuse component carries Lambert +
ambient shading; both are turned into polarizer-angle profiles via the
dielectric extrema and summed at the four capture angles. The profile
phase is tied to the pixel azimuth so that the recovered AoLP of
diffuse-dominant pixels equals the azimuth modulo pi (the specular
profile then sits at azimuth +- pi/2, the built-in phase offset between
the two profiles).

Ground-truth maps are computed from the same per-pixel extrema used to
synthesize the stack, so the bundle is exactly self-consistent.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from . import fresnel
from .fresnel import MaterialConfig
from .imaging import NormalMap, PolarStack
from .separation import diffuse_profile, specular_profile

CAPTURE_ANGLES = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)


@dataclass(frozen=True)
class PlaneGeometry:
    """Plane filling the frame, normal tilted from +z about x then y (radians)."""

    tilt_x: float = 0.0
    tilt_y: float = 0.0


@dataclass(frozen=True)
class SphereGeometry:
    """Sphere of given radius (frame units: half the image is 1.0), centered
    at (cx, cy). A radius > sqrt(2) keeps the limb outside the frame."""

    radius: float = 0.9
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class OracleMaterial:
    refractive_index: float = 1.5
    albedo: float = 0.65
    specular_weight: float = 0.08

    def __post_init__(self):
        MaterialConfig(self.refractive_index)  # validates k > 1
        if not (0.0 <= self.specular_weight <= 1.0):
            raise ValueError("specular weight must lie in [0, 1]")
        if self.albedo < 0:
            raise ValueError("albedo must be >= 0")


@dataclass(frozen=True)
class SceneSpec:
    geometry: object = field(default_factory=SphereGeometry)
    material: OracleMaterial = field(default_factory=OracleMaterial)
    light_direction: tuple = (0.0, 0.0, 1.0)
    ambient: float = 1.0  # 1.0 = uniform illumination, 0.0 = pure Lambert
    resolution: int = 128
    background: float = 0.05
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("resolution must be >= 16")
        if not (0.0 <= self.ambient <= 1.0):
            raise ValueError("ambient fraction must lie in [0, 1]")
        if self.background < 0 or self.noise_sigma < 0:
            raise ValueError("background and noise sigma must be >= 0")


@dataclass
class OracleBundle:
    stack: PolarStack
    gt_normals: NormalMap
    gt_dolp: np.ndarray
    gt_sp: np.ndarray
    gt_dp: np.ndarray
    foreground: np.ndarray  # bool; ~foreground is the unpolarized background


def _pixel_grid(resolution):
    # pixel centers; x grows rightward, y grows upward, frame spans [-1, 1]
    ys, xs = np.mgrid[0:resolution, 0:resolution]
    x = (xs + 0.5) / resolution * 2.0 - 1.0
    y = 1.0 - (ys + 0.5) / resolution * 2.0
    return x, y


def _geometry_normals(spec: SceneSpec):
    x, y = _pixel_grid(spec.resolution)
    if isinstance(spec.geometry, PlaneGeometry):
        g = spec.geometry
        n = np.array([0.0, 0.0, 1.0])
        cx, sx = np.cos(g.tilt_x), np.sin(g.tilt_x)
        cy, sy = np.cos(g.tilt_y), np.sin(g.tilt_y)
        n = np.array([n[0], cx * n[1] - sx * n[2], sx * n[1] + cx * n[2]])
        n = np.array([cy * n[0] + sy * n[2], n[1], -sy * n[0] + cy * n[2]])
        if n[2] <= 0:
            raise ValueError("plane tilt turns the surface away from the camera")
        normals = np.broadcast_to(n, (spec.resolution, spec.resolution, 3)).copy()
        foreground = np.ones((spec.resolution, spec.resolution), dtype=bool)
    elif isinstance(spec.geometry, SphereGeometry):
        g = spec.geometry
        nx = (x - g.center[0]) / g.radius
        ny = (y - g.center[1]) / g.radius
        rho2 = nx**2 + ny**2
        foreground = rho2 < 1.0
        nz = np.sqrt(np.clip(1.0 - rho2, 0.0, 1.0))
        normals = np.dstack([nx, ny, nz])
        normals[~foreground] = 0.0
    else:
        raise ValueError(f"unknown geometry {type(spec.geometry).__name__}")
    return normals, foreground


def render_synthetic(spec: SceneSpec) -> OracleBundle:
    normals, foreground = _geometry_normals(spec)
    mat = MaterialConfig(spec.material.refractive_index)

    nz = np.clip(normals[..., 2], 0.0, 1.0)
    zenith = np.arccos(np.where(foreground, nz, 1.0))
    azimuth = np.arctan2(normals[..., 1], normals[..., 0])

    light = np.asarray(spec.light_direction, dtype=float)
    light = light / np.linalg.norm(light)
    ndotl = np.clip(normals @ light, 0.0, None)
    shade = spec.ambient + (1.0 - spec.ambient) * ndotl

    diffuse_drive = spec.material.albedo * shade  # S_d entering the interface
    specular_drive = np.full_like(diffuse_drive, spec.material.specular_weight)

    # extrema from the dielectric model; analytic limits near zenith 0
    near_pole = zenith < fresnel.EPS_ALPHA
    work = foreground & ~near_pole
    sp_max = np.zeros_like(diffuse_drive)
    sp_min = np.zeros_like(diffuse_drive)
    dp_max = np.zeros_like(diffuse_drive)
    dp_min = np.zeros_like(diffuse_drive)
    if np.any(work):
        inc = zenith[work]
        ref = fresnel.refraction_angle(inc, mat)
        sp_max[work], sp_min[work] = fresnel.fresnel_extrema_sp(
            specular_drive[work], inc, ref
        )
        dp_max[work], dp_min[work] = fresnel.fresnel_extrema_dp(
            diffuse_drive[work], inc, ref
        )
    pole = foreground & near_pole
    if np.any(pole):
        sp_max[pole], sp_min[pole] = fresnel.specular_normal_incidence_extrema(
            specular_drive[pole], mat
        )
        dp_max[pole], dp_min[pole] = fresnel.diffuse_normal_incidence_extrema(
            diffuse_drive[pole], mat
        )

    # profile phase: evaluating at (theta_c - shift) with shift = azimuth - pi/2
    # puts the diffuse maximum at the azimuth, so AoLP == azimuth mod pi
    shift = azimuth - np.pi / 2
    rng = np.random.default_rng(spec.seed)
    channels = []
    for theta_c in CAPTURE_ANGLES:
        theta = theta_c - shift
        c = specular_profile((sp_max, sp_min), theta) + diffuse_profile(
            (dp_max, dp_min), theta
        )
        c = np.where(foreground, c, spec.background)
        if spec.noise_sigma > 0:
            c = np.maximum(c + rng.normal(0.0, spec.noise_sigma, c.shape), 0.0)
        channels.append(c)
    stack = PolarStack(*channels)

    # mixture DoLP from the same extrema (specular and diffuse polarized
    # contributions are phase-orthogonal, so their amplitudes subtract)
    s0_beam = sp_max + sp_min + dp_max + dp_min
    pol_amp = np.abs((dp_max - dp_min) - (sp_max - sp_min))
    gt_dolp = np.where(s0_beam > 0, pol_amp / np.where(s0_beam > 0, s0_beam, 1.0), 0.0)
    gt_dolp = np.where(foreground, gt_dolp, 0.0)

    gt_sp = np.where(foreground, 0.5 * (sp_max + sp_min), 0.0)
    gt_dp = np.where(foreground, 0.5 * (dp_max + dp_min), 0.0)
    gt_normals = NormalMap(normals, foreground.copy())
    return OracleBundle(stack, gt_normals, gt_dolp, gt_sp, gt_dp, foreground)


def scene_manifest(spec: SceneSpec) -> str:
    """Human-readable description of a scene, written next to synth outputs."""
    buf = io.StringIO()
    print(f"geometry: {spec.geometry}", file=buf)
    print(f"material: {spec.material}", file=buf)
    print(f"light_direction: {tuple(spec.light_direction)}", file=buf)
    print(f"ambient: {spec.ambient}", file=buf)
    print(f"resolution: {spec.resolution}", file=buf)
    print(f"background: {spec.background}", file=buf)
    print(f"noise_sigma: {spec.noise_sigma}  seed: {spec.seed}", file=buf)
    return buf.getvalue()
