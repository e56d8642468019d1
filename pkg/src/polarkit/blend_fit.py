"""Deferred-reflection blend and a desk-scale gradient-descent map fit.

The fit optimizes free per-pixel buffers (base image, reflection image,
reflection-strength map, normal map) against the four supervision terms
over a three-phase schedule: image-only warmup, joint polarization-prior
supervision, then image+normal refinement. The polarization normal prior
is re-disambiguated against the current fitted normals at the start of
every phase that carries a normal term.

Updates step along the gradient of the pixel-summed objective (the
mean-convention loss gradients scaled by the pixel count); this keeps the
per-pixel step size independent of resolution so a fixed learning rate
transfers across scene sizes. The blend clamp uses a straight-through
subgradient: gradients pass where the pre-clamp value is interior, and
are zeroed where the clamp is active.
"""

from dataclasses import dataclass, field

import numpy as np

from .imaging import NormalMap
from .losses import LossConfig, total_loss
from .normals import DisambiguationConfig, disambiguate

DIVERGENCE_FACTOR = 10.0


class FitDivergenceError(RuntimeError):
    """Loss exceeded 10x its phase-start value."""


@dataclass(frozen=True)
class PhaseConfig:
    iterations: int
    loss: LossConfig

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iteration count must be >= 0")


def default_phases(iterations=(200, 1500, 300), loss: LossConfig = None) -> tuple:
    """The three-phase schedule: image-only, joint, image+normal."""
    base = loss if loss is not None else LossConfig()
    phase1 = LossConfig(
        lambda_rgb=base.lambda_rgb, lambda_refl=base.lambda_refl,
        lambda_base=base.lambda_base, eta_rgb=base.eta_rgb,
        eta_refl=0.0, eta_base=0.0, eta_normal=0.0, tau=base.tau,
    )
    phase3 = LossConfig(
        lambda_rgb=base.lambda_rgb, lambda_refl=base.lambda_refl,
        lambda_base=base.lambda_base, eta_rgb=base.eta_rgb,
        eta_refl=0.0, eta_base=0.0, eta_normal=base.eta_normal, tau=base.tau,
    )
    return (
        PhaseConfig(iterations[0], phase1),
        PhaseConfig(iterations[1], base),
        PhaseConfig(iterations[2], phase3),
    )


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 0.1
    phases: tuple = field(default_factory=default_phases)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if len(self.phases) != 3:
            raise ValueError("the schedule has exactly three phases")


@dataclass
class FitState:
    base: np.ndarray
    refl: np.ndarray
    strength: np.ndarray
    normals: NormalMap
    iteration: int = 0
    loss_history: list = field(default_factory=list)


@dataclass
class FitTargets:
    rgb: np.ndarray
    sp: np.ndarray
    dp: np.ndarray


@dataclass
class FitPriors:
    n_pol: NormalMap
    dolp: np.ndarray


def blend(base, refl, strength):
    """Final image: clamp(base + strength * refl, 0, 1), pixelwise."""
    base = np.asarray(base, dtype=float)
    refl = np.asarray(refl, dtype=float)
    strength = np.asarray(strength, dtype=float)
    if not (base.shape == refl.shape and strength.shape == base.shape[:2]):
        raise ValueError(
            f"blend shapes disagree: base {base.shape}, refl {refl.shape}, "
            f"strength {strength.shape}"
        )
    s = strength if base.ndim == 2 else strength[..., None]
    return np.clip(base + s * refl, 0.0, 1.0)


def _renormalized(vectors):
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    safe = np.where(norms > 1e-12, norms, 1.0)
    out = vectors / safe
    # pixels that collapsed to zero length snap back to the camera axis
    out[np.squeeze(norms, -1) <= 1e-12] = (0.0, 0.0, 1.0)
    return out


def initial_state(targets: FitTargets) -> FitState:
    shape = targets.rgb.shape[:2]
    normals = NormalMap(
        np.broadcast_to((0.0, 0.0, 1.0), shape + (3,)).copy(),
        np.ones(shape, dtype=bool),
    )
    return FitState(
        base=np.asarray(targets.rgb, dtype=float).copy(),
        refl=np.zeros_like(np.asarray(targets.rgb, dtype=float)),
        strength=np.zeros(shape),
        normals=normals,
    )


def fit_objective(state: FitState, targets: FitTargets, n_pol_sup: NormalMap,
                  dolp, loss_cfg: LossConfig, with_gradients=False):
    """Total loss of a fit state (and, optionally, gradients with respect to
    base, refl, strength, and normals, in the mean-loss convention)."""
    final = blend(state.base, state.refl, state.strength)
    images = {
        "final": final, "rgb": targets.rgb,
        "refl": state.refl, "sp": targets.sp,
        "base": state.base, "dp": targets.dp,
    }
    normals = {"pred": state.normals, "pol": n_pol_sup}
    report = total_loss(images, normals, dolp, loss_cfg, with_gradients=with_gradients)
    if not with_gradients:
        return report, None
    pre = state.base + (
        state.strength if state.base.ndim == 2 else state.strength[..., None]
    ) * state.refl
    passthrough = ((pre > 0.0) & (pre < 1.0)).astype(float)  # straight-through clamp
    g_final = report.gradients["final"] * passthrough
    s = state.strength if state.base.ndim == 2 else state.strength[..., None]
    grads = {
        "base": g_final + report.gradients["base"],
        "refl": g_final * s + report.gradients["refl"],
        "strength": (g_final * state.refl)
        if state.base.ndim == 2
        else (g_final * state.refl).sum(axis=-1),
        "normals": report.gradients["normals"],
    }
    return report, grads


def fit_maps(targets: FitTargets, priors: FitPriors, cfg: FitConfig) -> FitState:
    """Run the three-phase schedule; returns the final state with the
    per-iteration total-loss history. Raises FitDivergenceError if the loss
    exceeds 10x its phase-start value."""
    state = initial_state(targets)
    npix = state.base.shape[0] * state.base.shape[1]
    step = cfg.learning_rate * npix  # summed-objective convention

    for phase_idx, phase in enumerate(cfg.phases):
        loss_cfg = phase.loss
        if loss_cfg.eta_normal > 0.0:
            n_pol_sup = disambiguate(
                priors.n_pol, state.normals, priors.dolp,
                DisambiguationConfig(loss_cfg.tau),
            )
        else:
            n_pol_sup = priors.n_pol
        phase_start = None
        for _ in range(phase.iterations):
            report, grads = fit_objective(
                state, targets, n_pol_sup, priors.dolp, loss_cfg, with_gradients=True
            )
            if report.total == 0.0:
                # exact floor: stepping would only excite the L1 limit cycle
                state.loss_history.append(report.total)
                break
            if phase_start is None:
                phase_start = report.total
            if phase_start > 0 and report.total > DIVERGENCE_FACTOR * phase_start:
                raise FitDivergenceError(
                    f"phase {phase_idx + 1}: loss {report.total:.4g} exceeded "
                    f"10x phase start {phase_start:.4g} at iteration {state.iteration}"
                )
            state.base = np.maximum(state.base - step * grads["base"], 0.0)
            state.refl = np.maximum(state.refl - step * grads["refl"], 0.0)
            state.strength = np.clip(state.strength - step * grads["strength"], 0.0, 1.0)
            vectors = state.normals.vectors - step * grads["normals"]
            state.normals = NormalMap(_renormalized(vectors), state.normals.valid)
            state.iteration += 1
            state.loss_history.append(report.total)
    return state
