"""Command-line entry point for the polarization pipeline.

Subcommands: synth, demosaic, stokes, separate, normals, disambiguate,
loss-eval, fit. Every subcommand is a pure function of its inputs and the
config, so re-running with identical inputs produces byte-identical PFM
outputs (independent of POLARKIT_THREADS, which merely caps worker
threads for any future parallel kernels; the current kernels are
vectorized and thread-free).
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import fresnel, imaging, losses, normals, oracle, separation, stokes
from .blend_fit import FitPriors, FitTargets, fit_maps
from .config import ConfigError, load_config
from .imaging import (
    PolarStack,
    RawMosaic,
    read_image,
    read_normal_pfm,
    read_pfm,
    write_normal_pfm,
    write_pfm,
    write_png,
)

STACK_NAMES = ("i0", "i45", "i90", "i135")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_stack(paths) -> PolarStack:
    return imaging.load_polar_stack(paths)


def _dolp_false_color(dolp):
    """Heat ramp (black-red-yellow-white) for DoLP previews."""
    d = np.clip(dolp, 0.0, 1.0)
    r = np.clip(3.0 * d, 0, 1)
    g = np.clip(3.0 * d - 1.0, 0, 1)
    b = np.clip(3.0 * d - 2.0, 0, 1)
    return np.dstack([r, g, b])


def _aolp_false_color(aolp):
    """Hue wheel over the pi-periodic angle for AoLP previews."""
    h = (np.asarray(aolp) + np.pi / 2) / np.pi  # [0, 1)
    hp = h * 6.0
    c = np.ones_like(hp)
    x = 1.0 - np.abs(hp % 2.0 - 1.0)
    zeros = np.zeros_like(hp)
    sector = np.floor(hp).astype(int) % 6
    rgb = [(c, x, zeros), (x, c, zeros), (zeros, c, x),
           (zeros, x, c), (x, zeros, c), (c, zeros, x)]
    out = np.zeros(hp.shape + (3,))
    for s, (r, g, b) in enumerate(rgb):
        m = sector == s
        out[m, 0], out[m, 1], out[m, 2] = r[m], g[m], b[m]
    return out


def _write_scalar(out: Path, name: str, arr, preview=True, color=None):
    write_pfm(out / f"{name}.pfm", arr)
    if preview:
        if color:  # false-color previews are 8-bit RGB
            write_png(out / f"{name}.png", color(arr), bits=8)
        else:  # grayscale previews keep 16-bit depth
            write_png(out / f"{name}.png", np.clip(arr, 0.0, 1.0), bits=16)


def cmd_synth(args, cfg):
    bundle = oracle.render_synthetic(cfg.scene)
    out = _outdir(args)
    for name, chan in zip(STACK_NAMES, bundle.stack.channels()):
        _write_scalar(out, name, chan)
    write_normal_pfm(out / "gt_normals.pfm", bundle.gt_normals)
    write_png(out / "gt_normals.png", imaging.encode_normal_map(bundle.gt_normals))
    _write_scalar(out, "gt_dolp", bundle.gt_dolp, color=_dolp_false_color)
    _write_scalar(out, "gt_sp", bundle.gt_sp)
    _write_scalar(out, "gt_dp", bundle.gt_dp)
    write_png(out / "foreground.png", bundle.foreground.astype(float))
    (out / "manifest.txt").write_text(oracle.scene_manifest(cfg.scene))
    print(f"synth: wrote oracle bundle to {out}")
    return 0


def cmd_demosaic(args, cfg):
    raw = RawMosaic(read_image(args.raw), layout=cfg.mosaic_layout)
    stack = imaging.demosaic(raw)
    out = _outdir(args)
    for name, chan in zip(STACK_NAMES, stack.channels()):
        _write_scalar(out, name, chan)
    print(f"demosaic: wrote four channels to {out}")
    return 0


def cmd_stokes(args, cfg):
    stack = _load_stack(args.stack)
    s = stokes.compute_stokes(stack)
    dolp = stokes.compute_dolp(s)
    aolp = stokes.compute_aolp(s)
    out = _outdir(args)
    for name, arr in (("s0", s.s0), ("s1", s.s1), ("s2", s.s2)):
        write_pfm(out / f"{name}.pfm", arr)
    _write_scalar(out, "dolp", dolp, color=_dolp_false_color)
    _write_scalar(out, "aolp", aolp, color=_aolp_false_color)
    print(f"stokes: wrote S0/S1/S2, DoLP, AoLP to {out}")
    return 0


def cmd_separate(args, cfg):
    stack = _load_stack(args.stack)
    pair = separation.separate(stack, cfg.material)
    out = _outdir(args)
    _write_scalar(out, "i_sp", pair.i_sp)
    _write_scalar(out, "i_dp", pair.i_dp)
    write_png(out / "degenerate_mask.png", pair.degenerate.astype(float))
    print(
        f"separate: wrote i_sp/i_dp to {out} "
        f"({int(pair.degenerate.sum())} degenerate pixels)"
    )
    return 0


def cmd_normals(args, cfg):
    stack = _load_stack(args.stack)
    n_pol = normals.estimate_polar_normals(stack, cfg.material)
    out = _outdir(args)
    write_normal_pfm(out / "n_pol.pfm", n_pol)
    write_png(out / "n_pol.png", imaging.encode_normal_map(n_pol))
    write_png(out / "n_pol_valid.png", n_pol.valid.astype(float))
    print(f"normals: wrote polarization normals to {out}")
    return 0


def cmd_disambiguate(args, cfg):
    n_pol = read_normal_pfm(args.normals)
    prior = read_normal_pfm(args.prior)
    dolp = read_pfm(args.dolp)
    corrected = normals.disambiguate(n_pol, prior, dolp, cfg.disambiguation)
    out = _outdir(args)
    write_normal_pfm(out / "n_corrected.pfm", corrected)
    write_png(out / "n_corrected.png", imaging.encode_normal_map(corrected))
    write_png(out / "n_corrected_valid.png", corrected.valid.astype(float))
    print(f"disambiguate: wrote corrected normals to {out} "
          f"({int(corrected.valid.sum())} valid pixels)")
    return 0


def cmd_loss_eval(args, cfg):
    images = {
        key: read_image(getattr(args, key))
        for key in ("final", "rgb", "refl", "sp", "base", "dp")
    }
    nmaps = {"pred": read_normal_pfm(args.normals_pred),
             "pol": read_normal_pfm(args.normals_pol)}
    dolp = read_pfm(args.dolp)
    report = losses.total_loss(images, nmaps, dolp, cfg.loss)
    for name, value in report.terms().items():
        eta = getattr(cfg.loss, f"eta_{name}")
        print(f"L_{name:<7} = {value:.10f}   (eta = {eta})")
    print(f"L_total   = {report.total:.10f}")
    return 0


def cmd_fit(args, cfg):
    scene = Path(args.scene_dir)
    targets = FitTargets(
        rgb=read_pfm(scene / "rgb.pfm"),
        sp=read_pfm(scene / "sp.pfm"),
        dp=read_pfm(scene / "dp.pfm"),
    )
    priors = FitPriors(
        n_pol=read_normal_pfm(scene / "n_pol.pfm"),
        dolp=read_pfm(scene / "dolp.pfm"),
    )
    state = fit_maps(targets, priors, cfg.fit)
    out = _outdir(args)
    write_pfm(out / "base.pfm", state.base)
    write_pfm(out / "refl.pfm", state.refl)
    write_pfm(out / "strength.pfm", state.strength)
    write_normal_pfm(out / "normals.pfm", state.normals)
    history = "\n".join(f"{i} {v:.12g}" for i, v in enumerate(state.loss_history))
    (out / "loss_history.txt").write_text(history + "\n")
    final = state.loss_history[-1] if state.loss_history else float("nan")
    print(f"fit: {state.iteration} iterations, final loss {final:.6g}; wrote {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polarkit",
        description="Polarization-prior toolkit: separation, normals, losses, fitting.",
    )
    parser.add_argument("--config", help="YAML pipeline config", default=None)
    parser.add_argument("--refractive-index", type=float, default=None,
                        help="override material refractive index")
    parser.add_argument("--tau", type=float, default=None,
                        help="override the DoLP gate threshold")
    for name in ("eta-rgb", "eta-refl", "eta-base", "eta-normal"):
        parser.add_argument(f"--{name}", type=float, default=None,
                            help=f"override loss weight {name.replace('-', '_')}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--out", required=True, help="output directory")
        return p

    add("synth", cmd_synth, help="render the analytic oracle scene")
    p = add("demosaic", cmd_demosaic, help="interpolate a filter-array mosaic")
    p.add_argument("--raw", required=True, help="mosaic image (PFM or PNG)")
    for name, fn, txt in (
        ("stokes", cmd_stokes, "Stokes parameters, DoLP, AoLP"),
        ("separate", cmd_separate, "specular/diffuse separation"),
        ("normals", cmd_normals, "polarization normal estimation"),
    ):
        p = add(name, fn, help=txt)
        p.add_argument("--stack", nargs=4, required=True,
                       metavar=("I0", "I45", "I90", "I135"),
                       help="four images at 0/45/90/135 degrees")
    p = add("disambiguate", cmd_disambiguate, help="prior-guided ambiguity correction")
    p.add_argument("--normals", required=True, help="polarization normals (PFM)")
    p.add_argument("--prior", required=True, help="prior normals (PFM)")
    p.add_argument("--dolp", required=True, help="DoLP map (PFM)")
    p = sub.add_parser("loss-eval", help="evaluate the four-term loss")
    p.set_defaults(fn=cmd_loss_eval)
    for key in ("final", "rgb", "refl", "sp", "base", "dp",
                "normals-pred", "normals-pol", "dolp"):
        p.add_argument(f"--{key}", required=True)
    p = add("fit", cmd_fit, help="three-phase per-pixel map fit")
    p.add_argument("--scene-dir", required=True,
                   help="directory with rgb/sp/dp/n_pol/dolp PFMs")
    return parser


def _apply_overrides(args, cfg):
    from dataclasses import replace

    if args.refractive_index is not None:
        cfg.material = fresnel.MaterialConfig(args.refractive_index)
    if args.tau is not None:
        cfg.disambiguation = normals.DisambiguationConfig(args.tau)
        cfg.loss = replace(cfg.loss, tau=args.tau)
    for name in ("eta_rgb", "eta_refl", "eta_base", "eta_normal"):
        v = getattr(args, name)
        if v is not None:
            cfg.loss = replace(cfg.loss, **{name: v})
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg.threads = int(os.environ.get("POLARKIT_THREADS", "0") or 0)
        cfg = _apply_overrides(args, cfg)
        return args.fn(args, cfg)
    except (ConfigError, ValueError, OSError, fresnel.SaturationError) as e:
        print(f"polarkit {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
