"""Dielectric reflection/transmission model for a smooth surface.

Snell refraction, the Nayar diffuse-polarization model (degree of linear
polarization as a function of incidence angle), its closed-form inversion,
and the polarizer-filtered intensity extrema of the specular and diffuse
components. All functions accept scalars or numpy arrays and are pure.

Angles are radians. Incidence angles live in [0, pi/2).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

# degeneracy guard for alpha_plus = i + r near zero, where the specular
# amplitude ratio tan(a-)/sin(a+) is 0/0
EPS_ALPHA = 1e-6


class SaturationError(ValueError):
    """DoLP outside the invertible range of the diffuse model."""


class DegenerateGeometryError(ValueError):
    """Reflection geometry too close to normal incidence to evaluate."""


@dataclass(frozen=True)
class MaterialConfig:
    """Surface material: a single fixed refractive index (> 1)."""

    refractive_index: float = 1.5

    def __post_init__(self):
        if not np.isfinite(self.refractive_index) or self.refractive_index <= 1.0:
            raise ValueError(
                f"refractive index must be a finite value > 1, got {self.refractive_index}"
            )


@dataclass(frozen=True)
class AnglePair:
    """Incidence/refraction angle pair with their sum and difference."""

    incidence: float
    refraction: float

    def __post_init__(self):
        if not (0.0 <= self.refraction <= self.incidence < np.pi / 2):
            raise ValueError(
                f"require 0 <= refraction <= incidence < pi/2, got "
                f"i={self.incidence}, r={self.refraction}"
            )

    @property
    def alpha_plus(self):
        return self.incidence + self.refraction

    @property
    def alpha_minus(self):
        return self.incidence - self.refraction


def refraction_angle(i, m: MaterialConfig):
    """Refraction angle r = asin(sin i / k) for incidence i in [0, pi/2)."""
    i = np.asarray(i, dtype=float)
    if np.any(i < 0) or np.any(i >= np.pi / 2):
        raise ValueError("incidence angle must lie in [0, pi/2)")
    r = np.arcsin(np.sin(i) / m.refractive_index)
    return r if r.ndim else float(r)


def angle_pair(i: float, m: MaterialConfig) -> AnglePair:
    return AnglePair(float(i), refraction_angle(i, m))


def diffuse_dolp_forward(i, m: MaterialConfig):
    """Diffuse-reflection DoLP at incidence i (Nayar model).

    Strictly increasing in i for the dielectric range used here; this is
    the oracle the closed-form inversion is tested against.
    """
    i = np.asarray(i, dtype=float)
    if np.any(i < 0) or np.any(i >= np.pi / 2):
        raise ValueError("incidence angle must lie in [0, pi/2)")
    k = m.refractive_index
    s2 = np.sin(i) ** 2
    num = (k - 1.0 / k) ** 2 * s2
    den = 2.0 + 2.0 * k**2 - (k + 1.0 / k) ** 2 * s2 + 4.0 * np.cos(i) * np.sqrt(k**2 - s2)
    d = num / den
    return d if d.ndim else float(d)


@lru_cache(maxsize=32)
def _dolp_max(k: float) -> float:
    # supremum of the forward model on [0, pi/2); attained in the i -> pi/2
    # limit, which the bounded search does not evaluate, so take the max with
    # the boundary value
    m = MaterialConfig(k)
    res = minimize_scalar(
        lambda i: -diffuse_dolp_forward(i, m),
        bounds=(0.0, np.pi / 2 - 1e-12),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(max(-res.fun, diffuse_dolp_forward(np.pi / 2 - 1e-12, m)))


def diffuse_dolp_max(m: MaterialConfig) -> float:
    """Largest DoLP the diffuse model can produce for this material."""
    return _dolp_max(m.refractive_index)


def incidence_from_dolp(d, m: MaterialConfig):
    """Invert the diffuse DoLP model: the incidence angle i with forward(i) = d.

    Closed form: with A = 2(1-d) - (1+d)(k^2 + 1/k^2), B = 4d, C = 1+k^2,
    D = 1-k^2, squaring the forward relation gives the quadratic

        s^2 (A^2 - B^2) + s BC(A+B) + B^2 D^2 / 4 = 0,   s = sin^2 i,

    whose physical root is

        s = (-BC(A+B) + B sqrt(C^2 (A+B)^2 - D^2 (A^2-B^2))) / (2 (A^2-B^2)).

    Raises SaturationError for d outside [0, d_max] or on a negative
    discriminant; callers that tolerate out-of-gamut input should clamp to
    diffuse_dolp_max(m) - eps first.
    """
    d = np.asarray(d, dtype=float)
    dmax = diffuse_dolp_max(m)
    if np.any(d < 0) or np.any(d > dmax):
        raise SaturationError(
            f"DoLP outside invertible range [0, {dmax:.6f}] for k={m.refractive_index}"
        )
    k = m.refractive_index
    A = 2.0 * (1.0 - d) - (1.0 + d) * (k**2 + 1.0 / k**2)
    B = 4.0 * d
    C = 1.0 + k**2
    D = 1.0 - k**2
    disc = C**2 * (A + B) ** 2 - D**2 * (A**2 - B**2)
    if np.any(disc < 0):
        raise SaturationError("negative discriminant in incidence inversion")
    s = (-B * C * (A + B) + B * np.sqrt(disc)) / (2.0 * (A**2 - B**2))
    i = np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))
    return i if i.ndim else float(i)


def fresnel_extrema_sp(s0, i, r):
    """Polarizer-filtered intensity extrema of the specular component.

    Imax = (S0/2) (tan a- / sin a+)^2 cos^2 a-,  Imin likewise with cos^2 a+,
    a+- = i +- r. These equal (S0/2) times the perpendicular / parallel
    Fresnel power reflectances. Homogeneous degree 1 in s0.
    """
    s0 = np.asarray(s0, dtype=float)
    i = np.asarray(i, dtype=float)
    r = np.asarray(r, dtype=float)
    ap = i + r
    am = i - r
    if np.any(ap <= EPS_ALPHA):
        raise DegenerateGeometryError(
            "alpha_plus <= eps: specular extrema are 0/0 at normal incidence; "
            "use specular_normal_incidence_extrema"
        )
    f = (np.tan(am) / np.sin(ap)) ** 2
    imax = 0.5 * s0 * f * np.cos(am) ** 2
    imin = 0.5 * s0 * f * np.cos(ap) ** 2
    if imax.ndim:
        return imax, imin
    return float(imax), float(imin)


def specular_normal_incidence_extrema(s0, m: MaterialConfig):
    """Analytic i -> 0 limit of fresnel_extrema_sp: both extrema equal
    (S0/2) ((k-1)/(k+1))^2 (the reflection is unpolarized at the pole)."""
    k = m.refractive_index
    v = 0.5 * np.asarray(s0, dtype=float) * ((k - 1.0) / (k + 1.0)) ** 2
    return (v, v.copy()) if v.ndim else (float(v), float(v))


def diffuse_normal_incidence_extrema(sd, m: MaterialConfig):
    """Analytic i -> 0 limit of the diffuse transmission factor: both extrema
    equal (Sd/2) * 4k/(k+1)^2."""
    k = m.refractive_index
    v = 0.5 * np.asarray(sd, dtype=float) * 4.0 * k / (k + 1.0) ** 2
    return (v, v.copy()) if v.ndim else (float(v), float(v))


def fresnel_extrema_dp(sd, i, r):
    """Polarizer-filtered intensity extrema of the diffuse component.

    Imax = (Sd/2) sin 2i sin 2r / (sin a+ cos a-)^2,  Imin = Imax cos^2 a-.
    At exact normal incidence the numerator vanishes and (0, 0) is returned.
    Homogeneous degree 1 in sd.
    """
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("diffuse Stokes magnitude must be >= 0")
    i = np.asarray(i, dtype=float)
    r = np.asarray(r, dtype=float)
    ap = i + r
    am = i - r
    degenerate = ap <= EPS_ALPHA  # only happens as i -> 0, where sin 2i -> 0
    ap_safe = np.where(degenerate, 1.0, ap)
    imax = 0.5 * sd * np.sin(2 * i) * np.sin(2 * r) / (np.sin(ap_safe) * np.cos(am)) ** 2
    imax = np.where(degenerate, 0.0, imax)
    imin = imax * np.cos(am) ** 2
    if imax.ndim:
        return imax, imin
    return float(imax), float(imin)
