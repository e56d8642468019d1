"""Specular/diffuse reflection separation from a four-angle stack.

Per pixel: DoLP -> incidence angle (diffuse-model inversion) -> Snell
refraction -> specular extrema from the measured S0 -> residual diffuse
Stokes magnitude S_d = max(S0 - s_sp, 0) -> diffuse extrema. The emitted
images are the polarizer-averaged intensities of the two profiles,
rescaled so I_sp + I_dp = S0/2 exactly (intensity fusion; absorbs the
S_d ~ S_i - S_sp approximation error). Pixels where the inversion is
meaningless (DoLP below threshold, degenerate geometry, saturated DoLP)
fall back to I_sp = 0, I_dp = S0/2 and are flagged, never NaN-poisoned.
"""

from dataclasses import dataclass

import numpy as np

from . import fresnel
from .fresnel import MaterialConfig
from .imaging import PolarStack
from .stokes import compute_dolp, compute_stokes

# below this DoLP the incidence inversion is under the sensor noise floor
DOLP_DEGENERATE = 1e-4
# margin kept below the diffuse model's DoLP supremum when clamping
SATURATION_MARGIN = 1e-6


@dataclass
class ReflectionPair:
    """Separated specular (i_sp) and diffuse (i_dp) intensity images."""

    i_sp: np.ndarray
    i_dp: np.ndarray
    degenerate: np.ndarray  # bool mask of fallback pixels

    def __post_init__(self):
        if not (self.i_sp.shape == self.i_dp.shape == self.degenerate.shape):
            raise ValueError("reflection pair components disagree in shape")
        for name, img in (("i_sp", self.i_sp), ("i_dp", self.i_dp)):
            if not np.all(np.isfinite(img)) or np.any(img < 0):
                raise ValueError(f"{name} must be finite and >= 0")


def specular_profile(extrema, theta):
    """Specular intensity behind a polarizer at angle theta:
    (Imax + Imin)/2 + (Imax - Imin)/2 * cos(2 theta)."""
    imax, imin = extrema
    return 0.5 * (imax + imin) + 0.5 * (imax - imin) * np.cos(2.0 * np.asarray(theta, float))


def diffuse_profile(extrema, theta):
    """Diffuse intensity behind a polarizer, phase-shifted pi/2 from the
    specular profile: (Imax + Imin)/2 + (Imax - Imin)/2 * cos(2(theta - pi/2))."""
    imax, imin = extrema
    return 0.5 * (imax + imin) + 0.5 * (imax - imin) * np.cos(
        2.0 * (np.asarray(theta, float) - np.pi / 2)
    )


def separate(stack: PolarStack, m: MaterialConfig) -> ReflectionPair:
    s = compute_stokes(stack)
    dolp = compute_dolp(s)
    s0 = s.s0

    dmax = fresnel.diffuse_dolp_max(m)
    saturated = dolp > dmax - SATURATION_MARGIN
    d = np.minimum(dolp, dmax - SATURATION_MARGIN)
    inc = fresnel.incidence_from_dolp(d, m)
    ref = fresnel.refraction_angle(inc, m)

    degenerate = (dolp < DOLP_DEGENERATE) | (inc + ref < fresnel.EPS_ALPHA) | saturated

    # placeholder angles on degenerate pixels keep the vectorized extrema
    # finite; their outputs are overwritten by the fallback below
    inc_safe = np.where(degenerate, 0.5, inc)
    ref_safe = np.where(degenerate, fresnel.refraction_angle(0.5, m), ref)

    sp_max, sp_min = fresnel.fresnel_extrema_sp(s0, inc_safe, ref_safe)
    s_sp = sp_max + sp_min  # specular Stokes magnitude
    s_d = np.maximum(s0 - s_sp, 0.0)
    dp_max, dp_min = fresnel.fresnel_extrema_dp(s_d, inc_safe, ref_safe)

    i_sp_raw = 0.5 * (sp_max + sp_min)  # polarizer-averaged intensities
    i_dp_raw = 0.5 * (dp_max + dp_min)
    total = i_sp_raw + i_dp_raw
    fallback = degenerate | (total <= 0.0)

    # fusion: rescale the pair so I_sp + I_dp = S0/2 exactly
    scale = np.where(fallback, 0.0, (0.5 * s0) / np.where(total > 0.0, total, 1.0))
    i_sp = np.where(fallback, 0.0, i_sp_raw * scale)
    i_dp = np.where(fallback, 0.5 * s0, i_dp_raw * scale)
    return ReflectionPair(i_sp, i_dp, fallback)
