"""Polarization normal estimation and prior-guided ambiguity correction.

The azimuth recovered from AoLP is periodic: the same stack is consistent
with the azimuth rotated by multiples of pi/2 (pi from the AoLP period,
pi/2 from specular/diffuse phase exchange). The candidate set therefore
holds the four azimuthal rotations of the estimated normal about the
camera axis, zenith unchanged:

    C = { n,  R_pi(n),  R_+pi/2(n),  R_-pi/2(n) }

in that order (ties in the argmax resolve to the earliest entry). The set
is closed under the generating rotations, which makes disambiguation
idempotent and the normal loss invariant under exchanging the reference
normal with any of its own candidates.
"""

from dataclasses import dataclass

import numpy as np

from . import fresnel
from .fresnel import MaterialConfig
from .imaging import NormalMap, PolarStack
from .separation import SATURATION_MARGIN
from .stokes import compute_aolp, compute_dolp, compute_stokes


@dataclass(frozen=True)
class DisambiguationConfig:
    """DoLP gate for normal supervision: pixels with DoLP <= tau are dropped."""

    tau: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.tau < 1.0):
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")


def normal_from_angles(i, sigma):
    """Unit normal [sin i cos sigma, sin i sin sigma, cos i] from zenith i
    and azimuth sigma. Broadcasts; result has a trailing axis of size 3."""
    i = np.asarray(i, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    si = np.sin(i)
    return np.stack(
        np.broadcast_arrays(si * np.cos(sigma), si * np.sin(sigma), np.cos(i)), axis=-1
    )


def _rot_z(v, angle):
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([c * x - s * y, s * x + c * y, z], axis=-1)


def candidate_set(n):
    """The four azimuthal-rotation candidates of a normal, stacked on a new
    leading axis: [n, azimuth+pi, azimuth+pi/2, azimuth-pi/2]."""
    n = np.asarray(n, dtype=float)
    return np.stack(
        [n, _rot_z(n, np.pi), _rot_z(n, np.pi / 2), _rot_z(n, -np.pi / 2)], axis=0
    )


def estimate_polar_normals(stack: PolarStack, m: MaterialConfig) -> NormalMap:
    """Per-pixel normal from AoLP (azimuth) and inverted DoLP (zenith).

    Pixels whose DoLP exceeds the diffuse model's invertible range are
    marked invalid; unpolarized pixels resolve benignly to zenith 0.
    """
    s = compute_stokes(stack)
    dolp = compute_dolp(s)
    sigma = compute_aolp(s)

    dmax = fresnel.diffuse_dolp_max(m)
    valid = dolp <= dmax - SATURATION_MARGIN
    d = np.minimum(dolp, dmax - SATURATION_MARGIN)
    zenith = fresnel.incidence_from_dolp(d, m)

    vectors = normal_from_angles(zenith, sigma)
    vectors[~valid] = 0.0
    return NormalMap(vectors, valid)


def disambiguate(
    n_pol: NormalMap, prior: NormalMap, dolp: np.ndarray, cfg: DisambiguationConfig
) -> NormalMap:
    """Select, per pixel, the candidate of n_pol most aligned with the prior.

    Output pixels are valid only where DoLP > tau (strict), n_pol is valid,
    and the prior is valid; everything else is excluded from supervision.
    """
    if n_pol.shape != prior.shape or n_pol.shape != np.asarray(dolp).shape:
        raise ValueError(
            f"shape mismatch: n_pol {n_pol.shape}, prior {prior.shape}, dolp {np.shape(dolp)}"
        )
    cands = candidate_set(n_pol.vectors)  # (4, H, W, 3)
    scores = np.einsum("chwk,hwk->chw", cands, prior.vectors)
    best = np.argmax(scores, axis=0)  # first max wins ties
    chosen = np.take_along_axis(cands, best[None, :, :, None], axis=0)[0]

    valid = (np.asarray(dolp) > cfg.tau) & n_pol.valid & prior.valid
    chosen[~valid] = 0.0
    return NormalMap(chosen, valid)
