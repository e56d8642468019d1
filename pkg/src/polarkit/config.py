"""Pipeline configuration: one YAML tree with per-stage sections.

Sections (all optional, defaults apply): material, disambiguation, loss,
fit, synth, demosaic. Unknown keys are rejected with the offending field
named, so typos fail loudly.
"""

from dataclasses import dataclass, field, fields

import yaml

from .blend_fit import FitConfig, default_phases
from .fresnel import MaterialConfig
from .imaging import MOSAIC_LAYOUTS, DEFAULT_LAYOUT
from .losses import LossConfig
from .normals import DisambiguationConfig
from .oracle import OracleMaterial, PlaneGeometry, SceneSpec, SphereGeometry


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    material: MaterialConfig = field(default_factory=MaterialConfig)
    disambiguation: DisambiguationConfig = field(default_factory=DisambiguationConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    mosaic_layout: tuple = DEFAULT_LAYOUT
    threads: int = 0  # 0 = unset; outputs are independent of this


def _build(cls, section: dict, name: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from e


def _build_scene(section: dict) -> SceneSpec:
    section = dict(section)
    kind = section.pop("geometry", "sphere")
    if kind == "sphere":
        geom = SphereGeometry(
            radius=section.pop("radius", 0.9),
            center=tuple(section.pop("center", (0.0, 0.0))),
        )
    elif kind == "plane":
        geom = PlaneGeometry(
            tilt_x=section.pop("tilt_x", 0.0), tilt_y=section.pop("tilt_y", 0.0)
        )
    else:
        raise ConfigError(f"synth.geometry: expected 'sphere' or 'plane', got {kind!r}")
    material = OracleMaterial(
        refractive_index=section.pop("refractive_index", 1.5),
        albedo=section.pop("albedo", 0.65),
        specular_weight=section.pop("specular_weight", 0.08),
    )
    scene_kwargs = {}
    for key in ("light_direction", "ambient", "resolution", "background",
                "noise_sigma", "seed"):
        if key in section:
            scene_kwargs[key] = section.pop(key)
    if "light_direction" in scene_kwargs:
        scene_kwargs["light_direction"] = tuple(scene_kwargs["light_direction"])
    if section:
        raise ConfigError(f"synth: unknown field(s) {sorted(section)}")
    try:
        return SceneSpec(geometry=geom, material=material, **scene_kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"synth: {e}") from e


def _build_fit(section: dict, loss: LossConfig) -> FitConfig:
    section = dict(section)
    lr = section.pop("learning_rate", 0.1)
    iters = tuple(section.pop("phase_iterations", (200, 1500, 300)))
    if len(iters) != 3:
        raise ConfigError("fit.phase_iterations: expected three counts")
    if section:
        raise ConfigError(f"fit: unknown field(s) {sorted(section)}")
    try:
        return FitConfig(learning_rate=lr, phases=default_phases(iters, loss))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"fit: {e}") from e


def _build_layout(section: dict):
    layout = section.get("layout", "sony")
    if isinstance(layout, str):
        if layout not in MOSAIC_LAYOUTS:
            raise ConfigError(
                f"demosaic.layout: {layout!r} not one of {sorted(MOSAIC_LAYOUTS)}"
            )
        return MOSAIC_LAYOUTS[layout]
    layout = tuple(int(a) for a in layout)
    if sorted(layout) != [0, 45, 90, 135]:
        raise ConfigError("demosaic.layout: must be a permutation of (0, 45, 90, 135)")
    return layout


def load_config(path=None) -> PipelineConfig:
    """Load a YAML pipeline config; None yields defaults."""
    tree = {}
    if path is not None:
        try:
            with open(path) as f:
                tree = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: YAML parse error: {e}") from e
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    known = {"material", "disambiguation", "loss", "fit", "synth", "demosaic"}
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")

    cfg = PipelineConfig()
    if "material" in tree:
        cfg.material = _build(MaterialConfig, tree["material"], "material")
    if "disambiguation" in tree:
        cfg.disambiguation = _build(DisambiguationConfig, tree["disambiguation"],
                                    "disambiguation")
    if "loss" in tree:
        cfg.loss = _build(LossConfig, tree["loss"], "loss")
    cfg.fit = _build_fit(tree.get("fit", {}), cfg.loss)
    if "synth" in tree:
        cfg.scene = _build_scene(tree["synth"])
    if "demosaic" in tree:
        cfg.mosaic_layout = _build_layout(tree["demosaic"])
    return cfg
