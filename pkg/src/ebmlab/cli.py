"""Command-line surface.

Commands: train, sample, analyze, denoise, preprocess, stats. Settings
come from built-in defaults, then an optional config file, then repeated
--set key=value overrides, then EBMLAB_* environment variables. Every
run is deterministic under a fixed master seed regardless of the
--threads setting.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import analysis, figures, persist
from .config import DEFAULTS, RECIPES, ConfigError, ExperimentConfig
from .denoise import iwf_image, make_denoise_job, wiener_baseline
from .pipeline import apply_whitener, extract_patches, fit_whitener, make_stereo_pairs, preprocess
from .recipes import RECIPE_RUNNERS, load_corpus, run_recipe
from .rng import stream
from .samplers import HmcConfig, annealed_sample, run_cd_negative_phase


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (results are seed-deterministic "
                        "regardless)")
    p.add_argument("--smoke", action="store_true",
                   help="shrink counts for a fast end-to-end run")


def _build_config(args):
    cfg = (ExperimentConfig.from_file(args.config) if args.config
           else ExperimentConfig())
    pairs = []
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append((key, value))
    if pairs:
        cfg.set_many(pairs)
    cfg.apply_env()
    if args.seed is not None:
        cfg.values["experiment.seed"] = args.seed
    if args.smoke:
        cfg.values["experiment.smoke"] = True
    if args.threads:
        cfg.values["experiment.threads"] = args.threads
    return cfg


def cmd_train(args):
    cfg = _build_config(args)
    if args.recipe:
        cfg.values["experiment.recipe"] = args.recipe
    if args.images:
        cfg.values["data.images"] = args.images
    if args.epochs is not None:
        cfg.values["train.epochs"] = args.epochs
    run_recipe(cfg, args.out)
    print(f"recipe {cfg['experiment.recipe']} written to {args.out}")
    return 0


def cmd_sample(args):
    cfg = _build_config(args)
    model = persist.load_model(args.model)
    seed = cfg["experiment.seed"]
    rng = stream(seed, "cli/sample")
    count = args.count
    if count == 0:
        persist.save_matrix(args.out, np.zeros((0, model.dim)),
                            meta={"mode": args.mode})
        print(f"wrote empty sample matrix to {args.out}")
        return 0
    if args.mode == "cd-negative":
        if not args.data:
            raise SystemExit("cd-negative sampling requires --data")
        data, _ = persist.load_matrix(args.data)
        rows = data[rng.integers(0, data.shape[0], size=count)]
        hmc = HmcConfig(n_leapfrog=cfg["hmc.n_leapfrog"],
                        step_size=cfg["hmc.step_size"])
        samples, _ = run_cd_negative_phase(model, rows, hmc, rng,
                                           n_steps=cfg["train.cd_steps"])
    elif args.mode == "annealed":
        steps = args.steps or cfg["sample.steps"]
        t_start = cfg["sample.t_start"]
        n_temps = max(int(steps), 1)
        schedule = np.geomspace(t_start, 1.0, n_temps)
        if model.has_stochastic_hiddens:
            X0 = (rng.random((count, model.dim)) < 0.5).astype(float)
        else:
            X0 = rng.standard_normal((count, model.dim))
        samples = annealed_sample(model, X0, schedule, rng,
                                  cfg=HmcConfig(step_size=cfg["hmc.step_size"],
                                                n_leapfrog=cfg["hmc.n_leapfrog"]))
    else:
        raise SystemExit(f"unknown sampling mode {args.mode!r}")
    persist.save_matrix(args.out, samples, meta={"mode": args.mode,
                                                 "seed": str(seed)})
    print(f"wrote {count} samples to {args.out}")
    return 0


def cmd_analyze(args):
    cfg = _build_config(args)
    model = persist.load_model(args.model)
    whitener = persist.load_whitener(args.whitener) if args.whitener else None
    os.makedirs(args.out, exist_ok=True)
    from .boltzmann import BoltzmannMachine
    from .pot import PotModel

    if isinstance(model, BoltzmannMachine):
        _analyze_bm(cfg, model, args.out)
    elif isinstance(model, PotModel):
        _analyze_pot(cfg, model, whitener, args.out)
    else:
        raise SystemExit(
            f"analyze supports PoT and Boltzmann models, not "
            f"{type(model).__name__}")
    print(f"analysis written to {args.out}")
    return 0


def _analyze_pot(cfg, model, whitener, outdir):
    from .recipes import _emit_filter_report, _write_csv

    pix = model.J @ whitener.forward if whitener is not None else model.J
    d_pix = pix.shape[1]
    side = int(round(np.sqrt(d_pix)))
    if side * side != d_pix:
        half = d_pix // 2
        side = int(round(np.sqrt(half)))
        oc = analysis.ocularity(pix[:, :half], pix[:, half:])
        _write_csv(os.path.join(outdir, "ocularity.csv"),
                   ["unit", "ocularity"], list(enumerate(oc)))
        figures.save_ocularity_figure(oc, os.path.join(outdir, "ocularity.png"))
        return
    fits = _emit_filter_report(outdir, model, whitener)
    shape = (side, side)
    # tuning curves for a handful of units (layer 1; layer 2 when pooled)
    grids = {
        "grating-phase": np.linspace(-np.pi, np.pi, 16, endpoint=False),
        "grating-orientation": np.linspace(0, np.pi, 16, endpoint=False),
        "grating-frequency": np.geomspace(0.05, 0.45, 12),
    }
    layers = (1, 2) if model.hierarchical else (1,)
    units = range(min(6, model.n_features))
    curves = {}
    for family, grid in grids.items():
        for layer in layers:
            resp = np.stack([
                analysis.tuning_curve(model, u, family, grid, shape,
                                      whitener=whitener, layer=layer)
                for u in units])
            curves[f"{family}-L{layer}"] = (grid, resp)
            _write_csv(os.path.join(outdir, f"tuning_{family}_L{layer}.csv"),
                       ["value"] + [f"unit{u}" for u in units],
                       [[g] + list(resp[:, i]) for i, g in enumerate(grid)])
    figures.save_tuning_figure(curves, os.path.join(outdir, "tuning.png"))
    if model.grid is not None:
        report = analysis.map_report(model, whitener,
                                     rng=stream(cfg["experiment.seed"], "analyze/null"))
        figures.save_map_figure(report["grids"], report["mask"], model.grid,
                                os.path.join(outdir, "maps.png"))
        _write_csv(os.path.join(outdir, "map_continuity.csv"),
                   ["property", "neighbor_stat", "shuffled_stat", "ratio"],
                   [[k, v[0], v[1], v[0] / v[1] if v[1] else np.nan]
                    for k, v in report["continuity"].items()])


def _analyze_bm(cfg, model, outdir):
    from .recipes import _write_csv

    n = model.n_v // 2 if model.n_v % 2 == 0 else model.n_v
    if model.n_v % 2 == 0:
        oc = analysis.ocularity(model.params["J"][:n].T, model.params["J"][n:].T)
        _write_csv(os.path.join(outdir, "ocularity.csv"), ["unit", "ocularity"],
                   list(enumerate(oc)))
        figures.save_ocularity_figure(oc, os.path.join(outdir, "ocularity.png"),
                                      grid=model.grid)
        changes, width = analysis.ocularity_band_stats(oc)
        _write_csv(os.path.join(outdir, "band_stats.csv"),
                   ["sign_changes", "mean_band_width"], [[changes, width]])
    J = model.params["J"]
    img = (J - J.min()) / (J.max() - J.min() + 1e-12)
    persist.write_pgm(os.path.join(outdir, "weights.pgm"), img)


def cmd_denoise(args):
    cfg = _build_config(args)
    if not os.path.exists(args.model):
        raise SystemExit(f"model file not found: {args.model}")
    model = persist.load_model(args.model)
    whitener = persist.load_whitener(args.whitener) if args.whitener else None
    image = persist.read_pgm(args.image)
    os.makedirs(args.out, exist_ok=True)
    seed = cfg["experiment.seed"]
    rows = []
    levels = ([args.noise_std] if args.noise_std is not None
              else [10 ** (-float(v) / 20.0)
                    for v in str(cfg["denoise.levels"]).split(",")])
    noise_rng = stream(seed, "cli/denoise")
    for sigma in levels:
        if sigma == 0:
            rows.append([0.0, "identical", float("inf"), float("inf")])
            continue
        noisy = image + sigma * noise_rng.standard_normal(image.shape)
        job = make_denoise_job(model, whitener, sigma,
                               tol=cfg["denoise.tol"],
                               max_iter=cfg["denoise.max_iter"])
        den, rep = iwf_image(job, noisy, whitener=whitener, reference=image,
                             s_max=1.0)
        wien, _ = wiener_baseline(noisy, sigma, reference=image, s_max=1.0)
        rows.append([rep["psnr_noisy"], "iwf", rep["psnr_denoised"], sigma])
        rows.append([rep["psnr_noisy"], "wiener",
                     analysis.psnr(image, wien, 1.0), sigma])
        persist.write_pgm(os.path.join(args.out, f"denoised_{sigma:.4g}.pgm"),
                          np.clip(den, 0, 1))
    with open(os.path.join(args.out, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["noise_psnr_db", "method", "psnr_db", "noise_std"])
        w.writerows(rows)
    plot_rows = [{"noise_psnr": r[0], "method": r[1], "psnr": r[2]}
                 for r in rows if r[1] in ("iwf", "wiener")]
    if plot_rows:
        figures.save_denoise_figure(plot_rows,
                                    os.path.join(args.out, "report.png"))
    print(f"denoising report written to {args.out}")
    return 0


def cmd_preprocess(args):
    cfg = _build_config(args)
    if args.images:
        cfg.values["data.images"] = args.images
    seed = cfg["experiment.seed"]
    rng = stream(seed, "cli/preprocess")
    images = load_corpus(cfg, rng)
    size = cfg["data.patch_size"]
    count = cfg["data.patch_count"]
    if args.stereo:
        batch = make_stereo_pairs(images, size, cfg["data.shift_std"], count, rng)
    else:
        batch = extract_patches(images, size, count, rng)
    centered, pixel_mean = preprocess(batch, apply_log=cfg["data.apply_log"])
    whitener = fit_whitener(centered, keep_dims=cfg["data.keep_dims"],
                            mode=cfg["data.whiten_mode"])
    whitened = apply_whitener(whitener, centered)
    os.makedirs(args.out, exist_ok=True)
    persist.save_matrix(os.path.join(args.out, "patches.ebm"), whitened.data,
                        meta={"stage": whitened.stage,
                              "height": str(size), "width": str(size),
                              "eyes": str(batch.eyes)})
    persist.save_whitener(os.path.join(args.out, "whitener.ebm"), whitener)
    print(f"wrote {count} whitened patches and the whitener to {args.out}")
    return 0


def cmd_stats(args):
    _ = _build_config(args)
    if args.model:
        model = persist.load_model(args.model)
        print(f"model: {type(model).__name__}, state dim {model.dim}")
        for name, value in model.params.items():
            print(f"  {name}: shape {value.shape}, norm {np.linalg.norm(value):.6g}")
        if args.data:
            data, _ = persist.load_matrix(args.data)
            e = model.energy_batch(data)
            print(f"data energy: mean {e.mean():.6g} +- {e.std():.3g} "
                  f"(n={len(e)})")
        if args.samples:
            samples, _ = persist.load_matrix(args.samples)
            e = model.energy_batch(samples)
            print(f"sample energy: mean {e.mean():.6g} +- {e.std():.3g} "
                  f"(n={len(e)})")
    elif args.data:
        data, meta = persist.load_matrix(args.data)
        print(f"matrix: {data.shape}, meta {meta}")
        print(f"  mean {data.mean():.6g}, std {data.std():.6g}")
    else:
        raise SystemExit("stats needs --model or --data")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ebmlab",
        description="Energy-based density models trained by contrastive "
                    "divergence: training recipes, samplers, analysis "
                    "reports and MAP denoising.")
    parser.add_argument("--dump-defaults", action="store_true",
                        help="print every config default and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="run a named experiment recipe")
    p.add_argument("--recipe", choices=sorted(RECIPE_RUNNERS),
                   help="experiment recipe")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--images", help="directory of PGM training images")
    p.add_argument("--epochs", type=int, help="override train.epochs")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw samples from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--mode", choices=["cd-negative", "annealed"],
                   default="annealed")
    p.add_argument("--data", help="matrix container of chain start rows "
                                  "(cd-negative mode)")
    p.add_argument("--steps", type=int, help="annealing schedule length")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="emit per-unit reports and mosaics")
    p.add_argument("--model", required=True)
    p.add_argument("--whitener")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("denoise", help="MAP-denoise an image under a "
                                       "trained prior")
    p.add_argument("--model", required=True)
    p.add_argument("--whitener")
    p.add_argument("--image", required=True, help="clean reference PGM; "
                   "noise is synthesized at the requested levels")
    p.add_argument("--noise-std", type=float, dest="noise_std")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("preprocess", help="extract, center and whiten patches")
    p.add_argument("--images", help="directory of PGM images")
    p.add_argument("--stereo", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("stats", help="summarise models / matrices; "
                                     "data-vs-sample energy diagnostic")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--samples")
    _add_common(p)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_defaults:
        for key in sorted(DEFAULTS):
            print(f"{key}={DEFAULTS[key]}")
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
