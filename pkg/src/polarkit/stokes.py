"""Linear Stokes parameters, DoLP, and AoLP from a four-angle stack.

S0 = 0.5 (I0 + I45 + I90 + I135), S1 = I0 - I90, S2 = I45 - I135, per pixel.
Color stacks are reduced to luminance (channel mean) before the Stokes
computation; the circular component S3 is not represented.
"""

from dataclasses import dataclass

import numpy as np

from .imaging import PolarStack, to_luminance

# DoLP ceiling: the incidence inversion is singular as DoLP -> 1
DOLP_CEILING = 1.0 - 1e-3
# below this S0 a pixel is treated as unpolarized (division noise floor)
S0_FLOOR = 1e-6


@dataclass
class StokesMap:
    """Per-pixel (S0, S1, S2), same spatial dimensions as the source stack."""

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        if not (self.s0.shape == self.s1.shape == self.s2.shape):
            raise ValueError("Stokes components disagree in shape")
        if np.any(self.s0 < 0) or not all(
            np.all(np.isfinite(c)) for c in (self.s0, self.s1, self.s2)
        ):
            raise ValueError("Stokes map must be finite with S0 >= 0")

    @property
    def shape(self):
        return self.s0.shape


def compute_stokes(stack: PolarStack) -> StokesMap:
    i0, i45, i90, i135 = (to_luminance(c) for c in stack.channels())
    s0 = 0.5 * (i0 + i45 + i90 + i135)
    s1 = i0 - i90
    s2 = i45 - i135
    return StokesMap(s0, s1, s2)


def compute_dolp(s: StokesMap) -> np.ndarray:
    """DoLP = sqrt(S1^2 + S2^2) / S0, clamped to [0, 1 - 1e-3].

    Pixels with S0 below the noise floor map to 0.
    """
    mag = np.hypot(s.s1, s.s2)
    dolp = np.where(s.s0 < S0_FLOOR, 0.0, mag / np.maximum(s.s0, S0_FLOOR))
    return np.clip(dolp, 0.0, DOLP_CEILING)


def compute_aolp(s: StokesMap) -> np.ndarray:
    """AoLP = 0.5 atan2(S2, S1), wrapped to (-pi/2, pi/2].

    Pixels with S1 = S2 = 0 map to 0 (see aolp_low_confidence).
    """
    aolp = 0.5 * np.arctan2(s.s2, s.s1)
    # atan2(-0, -x) = -pi gives -pi/2, the excluded endpoint
    aolp = np.where(aolp <= -np.pi / 2, aolp + np.pi, aolp)
    return np.where((s.s1 == 0.0) & (s.s2 == 0.0), 0.0, aolp)


def aolp_low_confidence(s: StokesMap) -> np.ndarray:
    """Mask of pixels whose AoLP is undefined (S1 = S2 = 0)."""
    return (s.s1 == 0.0) & (s.s2 == 0.0)
