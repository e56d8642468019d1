"""Supervision losses: L1, D-SSIM, their weighted blend, the gated normal
loss, and the four-term weighted total, all with analytic gradients with
respect to the predicted buffers.

D-SSIM = (1 - mean SSIM)/2 with an 11x11 Gaussian window (sigma 1.5) and
stabilizers C1 = 0.01^2, C2 = 0.03^2 on the [0, 1] range; the SSIM map is
evaluated on the valid (fully-windowed) interior and averaged there, so
constant images match the closed form exactly. Reductions use numpy's
pairwise summation, so results do not depend on any partitioning.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imaging import NormalMap
from .normals import candidate_set

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossConfig:
    """Mixing weights (lambda, inside each image term), term weights (eta),
    and the DoLP gate for the normal term."""

    lambda_rgb: float = 0.2
    lambda_refl: float = 0.2
    lambda_base: float = 0.2
    eta_rgb: float = 1.0
    eta_refl: float = 0.5
    eta_base: float = 0.5
    eta_normal: float = 0.1
    tau: float = 0.1

    def __post_init__(self):
        for name in ("lambda_rgb", "lambda_refl", "lambda_base"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("eta_rgb", "eta_refl", "eta_base", "eta_normal"):
            v = getattr(self, name)
            if v < 0 or not np.isfinite(v):
                raise ValueError(f"{name} must be a finite value >= 0, got {v}")


@dataclass
class LossReport:
    rgb: float
    refl: float
    base: float
    normal: float
    total: float
    gradients: dict = field(default_factory=dict)

    def terms(self):
        return {"rgb": self.rgb, "refl": self.refl, "base": self.base, "normal": self.normal}


def _check_same_shape(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def l1(a, b) -> float:
    """Mean absolute difference over all pixels and channels."""
    a, b = _check_same_shape(a, b)
    return float(np.mean(np.abs(a - b)))


def l1_gradient(a, b) -> np.ndarray:
    """d l1 / d a (subgradient 0 where a == b)."""
    a, b = _check_same_shape(a, b)
    return np.sign(a - b) / a.size


# -- separable Gaussian windowing ------------------------------------------

def _gaussian_kernel(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - size // 2
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()

_KERNEL = _gaussian_kernel()


def _window_valid(img):
    """Separable valid-mode correlation with the Gaussian window over the
    two leading (spatial) axes; trailing channel axes pass through."""
    v = sliding_window_view(img, SSIM_WINDOW, axis=0) @ _KERNEL
    v = sliding_window_view(v, SSIM_WINDOW, axis=1) @ _KERNEL
    return v


def _window_adjoint(g):
    """Adjoint of _window_valid: zero-padded full convolution back to the
    input grid (the kernel is symmetric)."""
    pad = [(SSIM_WINDOW - 1, SSIM_WINDOW - 1), (0, 0)] + [(0, 0)] * (g.ndim - 2)
    gp = np.pad(g, pad)
    v = sliding_window_view(gp, SSIM_WINDOW, axis=0) @ _KERNEL[::-1]
    pad = [(0, 0), (SSIM_WINDOW - 1, SSIM_WINDOW - 1)] + [(0, 0)] * (g.ndim - 2)
    vp = np.pad(v, pad)
    return sliding_window_view(vp, SSIM_WINDOW, axis=1) @ _KERNEL[::-1]


def _ssim_stats(a, b):
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(
            f"image {a.shape[1]}x{a.shape[0]} smaller than the {SSIM_WINDOW}-pixel SSIM window"
        )
    mu_a = _window_valid(a)
    mu_b = _window_valid(b)
    var_a = _window_valid(a * a) - mu_a**2
    var_b = _window_valid(b * b) - mu_b**2
    cov = _window_valid(a * b) - mu_a * mu_b
    a1 = 2.0 * mu_a * mu_b + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b1 = mu_a**2 + mu_b**2 + SSIM_C1
    b2 = var_a + var_b + SSIM_C2
    return mu_a, mu_b, a1, a2, b1, b2


def dssim(a, b) -> float:
    """(1 - mean SSIM)/2 over the valid-window interior."""
    a, b = _check_same_shape(a, b)
    _, _, a1, a2, b1, b2 = _ssim_stats(a, b)
    ssim_map = (a1 * a2) / (b1 * b2)
    return float((1.0 - ssim_map.mean()) / 2.0)


def dssim_gradient(a, b) -> np.ndarray:
    """d dssim / d a, exact (matches the valid-window forward)."""
    a, b = _check_same_shape(a, b)
    mu_a, mu_b, a1, a2, b1, b2 = _ssim_stats(a, b)
    denom = b1 * b2
    s = (a1 * a2) / denom
    p_mu = 2.0 * mu_b * a2 / denom - 2.0 * mu_a * s / b1
    p_var = -s / b2
    p_cov = 2.0 * a1 / denom
    # distribute through mu_a = W a, var_a = W(a^2) - mu_a^2, cov = W(ab) - mu_a mu_b
    core = _window_adjoint(p_mu - 2.0 * mu_a * p_var - mu_b * p_cov)
    grad_ssim = core + 2.0 * a * _window_adjoint(p_var) + b * _window_adjoint(p_cov)
    n_valid = np.prod(b1.shape)
    return -0.5 * grad_ssim / n_valid


def weighted_image_loss(pred, target, lam) -> float:
    """(1 - lam) L1 + lam D-SSIM."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return (1.0 - lam) * l1(pred, target) + lam * dssim(pred, target)


def weighted_image_loss_gradient(pred, target, lam) -> np.ndarray:
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return (1.0 - lam) * l1_gradient(pred, target) + lam * dssim_gradient(pred, target)


# -- gated normal loss -------------------------------------------------------

def _normal_gate(n_pol: NormalMap, dolp, tau):
    dolp = np.asarray(dolp, dtype=float)
    if dolp.shape != n_pol.shape:
        raise ValueError(f"dolp shape {dolp.shape} does not match normals {n_pol.shape}")
    return (dolp > tau) & n_pol.valid


def _best_candidate_cos(n_pred: NormalMap, n_pol: NormalMap):
    """Per pixel: max over the candidate set of cos(n_pred, c), and the
    chosen candidate. Candidates are unit; n_pred need not be."""
    cands = candidate_set(n_pol.vectors)  # (4, H, W, 3)
    u = n_pred.vectors
    u_norm = np.maximum(np.linalg.norm(u, axis=-1), 1e-300)
    scores = np.einsum("chwk,hwk->chw", cands, u) / u_norm
    best = np.argmax(scores, axis=0)
    cos = np.take_along_axis(scores, best[None], axis=0)[0]
    chosen = np.take_along_axis(cands, best[None, :, :, None], axis=0)[0]
    return cos, chosen, u_norm


def loss_normal(n_pred: NormalMap, n_pol: NormalMap, dolp, cfg: LossConfig) -> float:
    """Mean over gated pixels of min over candidates of (1 - cos); 0 when the
    gate is empty. Gate: DoLP > tau (strict) and n_pol valid."""
    if n_pred.shape != n_pol.shape:
        raise ValueError(f"normal map shapes differ: {n_pred.shape} vs {n_pol.shape}")
    gate = _normal_gate(n_pol, dolp, cfg.tau)
    n = int(gate.sum())
    if n == 0:
        return 0.0
    cos, _, _ = _best_candidate_cos(n_pred, n_pol)
    return float(np.sum((1.0 - cos)[gate]) / n)


def loss_normal_gradient(n_pred: NormalMap, n_pol: NormalMap, dolp, cfg: LossConfig):
    """d loss_normal / d n_pred, (H, W, 3). The min follows the selected
    candidate (first in candidate order at ties)."""
    if n_pred.shape != n_pol.shape:
        raise ValueError(f"normal map shapes differ: {n_pred.shape} vs {n_pol.shape}")
    gate = _normal_gate(n_pol, dolp, cfg.tau)
    grad = np.zeros_like(n_pred.vectors)
    n = int(gate.sum())
    if n == 0:
        return grad
    cos, chosen, u_norm = _best_candidate_cos(n_pred, n_pol)
    u_hat = n_pred.vectors / u_norm[..., None]
    # d(1 - cos)/du = -(c - cos * u_hat)/|u|
    g = -(chosen - cos[..., None] * u_hat) / u_norm[..., None]
    grad[gate] = g[gate] / n
    return grad


def total_loss(images: dict, normals: dict, dolp, cfg: LossConfig,
               with_gradients: bool = False) -> LossReport:
    """Weighted four-term total.

    images: {"final", "rgb", "refl", "sp", "base", "dp"};
    normals: {"pred", "pol"} (NormalMap). Gradients, when requested, are
    with respect to final, refl, base, and the predicted normals.
    """
    required = {"final", "rgb", "refl", "sp", "base", "dp"}
    missing = required - images.keys()
    if missing:
        raise ValueError(f"missing image buffers: {sorted(missing)}")
    t_rgb = weighted_image_loss(images["final"], images["rgb"], cfg.lambda_rgb)
    t_refl = weighted_image_loss(images["refl"], images["sp"], cfg.lambda_refl)
    t_base = weighted_image_loss(images["base"], images["dp"], cfg.lambda_base)
    t_normal = loss_normal(normals["pred"], normals["pol"], dolp, cfg)
    total = (
        cfg.eta_rgb * t_rgb
        + cfg.eta_refl * t_refl
        + cfg.eta_base * t_base
        + cfg.eta_normal * t_normal
    )
    grads = {}
    if with_gradients:
        grads["final"] = cfg.eta_rgb * weighted_image_loss_gradient(
            images["final"], images["rgb"], cfg.lambda_rgb
        )
        grads["refl"] = cfg.eta_refl * weighted_image_loss_gradient(
            images["refl"], images["sp"], cfg.lambda_refl
        )
        grads["base"] = cfg.eta_base * weighted_image_loss_gradient(
            images["base"], images["dp"], cfg.lambda_base
        )
        grads["normals"] = cfg.eta_normal * loss_normal_gradient(
            normals["pred"], normals["pol"], dolp, cfg
        )
    return LossReport(t_rgb, t_refl, t_base, t_normal, float(total), grads)
