"""Named experiment recipes.

Each recipe turns an ExperimentConfig into files under an output
directory: model checkpoints and whiteners in the container format,
delimited CSV reports, PGM mosaics, and matplotlib figures rendered next
to every report. All randomness flows from the master seed. The
``--smoke`` flag shrinks counts while exercising every code path.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from . import analysis, figures, persist
from .boltzmann import (
    BoltzmannMachine,
    StereoInputConfig,
    dog_lateral_weights,
    gen_stereo_patterns,
    init_retinotopic_weights,
)
from .config import ExperimentConfig
from .denoise import iwf_image, make_denoise_job, wiener_baseline
from .models import BssIcaEnergy, SigmoidNetEnergy
from .pipeline import (
    PatchBatch,
    apply_whitener,
    extract_patches,
    fit_whitener,
    make_stereo_pairs,
    preprocess,
    synthesize_images,
)
from .pot import PotModel, build_topographic_pooling
from .rng import stream
from .samplers import HmcConfig, annealed_sample, run_cd_negative_phase
from .training import TrainSchedule, train

__all__ = ["run_recipe", "RECIPE_RUNNERS", "bss_anneal_schedule"]


# -- shared helpers ---------------------------------------------------------------


def _hmc_config(cfg):
    return HmcConfig(
        n_leapfrog=cfg["hmc.n_leapfrog"],
        step_size=cfg["hmc.step_size"],
        n_outer=cfg["hmc.n_outer"],
        accept_lo=cfg["hmc.accept_lo"],
        accept_hi=cfg["hmc.accept_hi"],
        adapt_factor=cfg["hmc.adapt_factor"],
    )


def load_corpus(cfg, rng):
    """PGM files from data.images, or the synthetic occlusion corpus."""
    path = cfg["data.images"]
    if path:
        files = sorted(f for f in os.listdir(path) if f.lower().endswith(".pgm"))
        if not files:
            raise FileNotFoundError(f"no PGM images under {path!r}")
        return [persist.read_pgm(os.path.join(path, f)) for f in files]
    return synthesize_images(cfg["data.synthetic_images"], cfg["data.image_side"], rng)


def patch_pipeline(cfg, rng, stereo=False):
    """corpus -> patches -> centering -> whitening. Returns
    (whitened PatchBatch, whitener)."""
    images = load_corpus(cfg, rng)
    size = cfg["data.patch_size"]
    count = cfg["data.patch_count"]
    if stereo:
        batch = make_stereo_pairs(images, size, cfg["data.shift_std"], count, rng)
    else:
        batch = extract_patches(images, size, count, rng)
    centered, _ = preprocess(batch, apply_log=cfg["data.apply_log"])
    whitener = fit_whitener(centered, keep_dims=cfg["data.keep_dims"],
                            mode=cfg["data.whiten_mode"])
    return apply_whitener(whitener, centered), whitener


def bss_anneal_schedule(total_iters):
    """Five equal stages at rates 0.05, 0.025, 0.005, 0.0025, 0.0005."""
    rates = [0.05, 0.025, 0.005, 0.0025, 0.0005]
    stage = max(total_iters // len(rates), 1)
    return [(i * stage, r) for i, r in enumerate(rates)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _save_history(outdir, history):
    history.write_csv(os.path.join(outdir, "history.csv"))
    figures.save_history_figure(history, os.path.join(outdir, "history.png"))


def _emit_filter_report(outdir, model, whitener, prefix="filters"):
    """Mosaic (PGM + PNG, ordered columnwise by fit orientation) and the
    per-unit fit table."""
    pix = model.J @ whitener.forward if whitener is not None else model.J
    side = int(round(np.sqrt(pix.shape[1])))
    fits = analysis.fit_filter_set(pix, (side, side))
    order = np.argsort([f.orientation for f in fits])
    tiles = analysis.mosaic(pix, (side, side), order=order)
    persist.write_pgm(os.path.join(outdir, f"{prefix}.pgm"), tiles)
    figures.save_mosaic_figure(tiles, os.path.join(outdir, f"{prefix}.png"))
    _write_csv(
        os.path.join(outdir, f"{prefix}_fits.csv"),
        ["unit", "center_x", "center_y", "orientation", "frequency", "phase",
         "sigma_w", "sigma_l", "amplitude", "residual", "good"],
        [[i] + f.as_row() for i, f in enumerate(fits)])
    figures.save_scatter_figure(
        [f.n_x for f in fits if f.good], [f.n_y for f in fits if f.good],
        os.path.join(outdir, f"{prefix}_shape.png"),
        xlabel="n_x", ylabel="n_y", title="envelope shape", lims=(0, 2.0))
    return fits


# -- chapter 4 recipes --------------------------------------------------------------


def make_bss_problem(n_sources, n_samples, rng):
    """Heavy-tailed synthetic sources, instamix-style mixing (unit
    diagonal, 1/9 off-diagonal), then whitening. Returns (whitened data,
    true unmixing matrix in the whitened space)."""
    S = rng.standard_t(3, size=(n_samples, n_sources))
    S /= S.std(axis=0)
    A = np.full((n_sources, n_sources), 1.0 / 9.0)
    np.fill_diagonal(A, 1.0)
    X = S @ A.T
    mean = X.mean(axis=0)
    cov = np.cov(X.T, bias=True)
    evals, evecs = np.linalg.eigh(cov)
    F = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
    Xw = (X - mean) @ F.T
    true_unmixing = np.linalg.inv(F @ A)
    return Xw, true_unmixing


def run_bss(cfg, outdir):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "bss/data")
    n_sources = 4 if smoke else 6
    n_samples = 4000 if smoke else 20000
    total_iters = 400 if smoke else 10000
    Xw, true_unmixing = make_bss_problem(n_sources, n_samples, rng)

    epochs = max(1, int(np.ceil(total_iters / (n_samples // 100))))
    results = {}
    for label, neg in (("exact", "exact"), ("hmc", "hmc")):
        model = BssIcaEnergy(0.1 * stream(seed, "bss/init").standard_normal(
            (n_sources, n_sources)))
        sched = TrainSchedule(batch_size=100, epochs=epochs, default_rate=0.05,
                              momentum=0.9, cd_steps=1,
                              anneal=bss_anneal_schedule(total_iters))
        hmc = _hmc_config(cfg)
        model, hist = train(model, Xw, sched, hmc, seed=seed,
                            negative_phase=neg,
                            reference_unmixing=true_unmixing,
                            record_every=max(total_iters // 200, 1))
        results[label] = (model, hist)
        persist.save_model(os.path.join(outdir, f"model_{label}.ebm"), model)
    _save_history(outdir, results["hmc"][1])
    rows = [[label, analysis.amari_distance(m.params["J"], true_unmixing)]
            for label, (m, _) in results.items()]
    _write_csv(os.path.join(outdir, "amari.csv"), ["method", "amari_distance"], rows)
    persist.save_matrix(os.path.join(outdir, "true_unmixing.ebm"), true_unmixing)
    return results


def make_toy2d_data(count, rng):
    """Equal mixture of three anisotropic Gaussians."""
    means = np.array([[4.0, 4.0], [-3.0, 2.0], [-3.0, 2.0]])
    covs = [np.diag([1.5, 0.5]), np.diag([4.0, 0.1]), np.diag([1.1, 4.0])]
    per = count // 3
    parts = [rng.multivariate_normal(means[i], covs[i], size=per)
             for i in range(3)]
    X = np.vstack(parts)
    return X[rng.permutation(X.shape[0])]


def run_toy2d(cfg, outdir):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "toy/data")
    data = make_toy2d_data(600 if smoke else 3000, rng)
    model = SigmoidNetEnergy(
        J=0.5 * stream(seed, "toy/init").standard_normal((20, 2)),
        b=np.zeros(20), a=np.zeros(20))
    passes = 30 if smoke else 500
    sched = TrainSchedule(batch_size=250, epochs=passes, default_rate=0.05,
                          cd_steps=5)
    hmc = HmcConfig(n_leapfrog=10, n_outer=5, step_size=cfg["hmc.step_size"],
                    accept_lo=0.60, accept_hi=0.80)
    model, hist = train(model, data, sched, hmc, seed=seed,
                        negative_phase="hmc",
                        record_every=max(passes // 50, 1))
    persist.save_model(os.path.join(outdir, "model.ebm"), model)
    _save_history(outdir, hist)
    # energy landscape + equilibrium sample figures
    g = np.linspace(-9, 9, 90)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    E = model.energy_batch(np.column_stack([xx.ravel(), yy.ravel()]))
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    axes[0].imshow(E.reshape(90, 90).T, origin="lower",
                   extent=[-9, 9, -9, 9], cmap="viridis")
    axes[0].set_title("energy landscape", fontsize=9)
    samp_rng = stream(seed, "toy/sample")
    X0 = data[samp_rng.integers(0, data.shape[0], 250)]
    fantasies = X0
    cfg_s = HmcConfig(n_leapfrog=10, step_size=0.2)
    for _ in range(60 if smoke else 400):
        from .samplers import hmc_step_batch
        fantasies, _, _ = hmc_step_batch(model, fantasies, cfg_s, samp_rng)
    axes[1].plot(fantasies[:, 0], fantasies[:, 1], ".", ms=3)
    axes[1].set_xlim(-9, 9)
    axes[1].set_ylim(-9, 9)
    axes[1].set_title("model samples", fontsize=9)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "landscape.png"), dpi=120)
    plt.close(fig)
    persist.save_matrix(os.path.join(outdir, "samples.ebm"), fantasies)
    return model, hist


# -- chapter 6 recipes ---------------------------------------------------------------


def _pot_schedule(cfg, smoke):
    epochs = 5 if smoke else cfg["train.epochs"]
    norm = cfg["train.filter_norm"] or None
    return TrainSchedule(
        batch_size=cfg["train.batch_size"], epochs=epochs,
        default_rate=cfg["train.rate"],
        rates={"alpha": cfg["train.rate_alpha"]},
        momentum=cfg["train.momentum"], weight_decay=cfg["train.weight_decay"],
        cd_steps=cfg["train.cd_steps"], filter_norm=norm,
        learn_filter_norm=cfg["train.learn_filter_norm"],
        filter_norm_rate=0.1 * cfg["train.rate"],
        anneal=cfg.anneal_schedule())


def run_pot_natural(cfg, outdir):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "pot/data")
    if smoke:
        cfg.values.update({"data.patch_size": 8, "data.keep_dims": 36,
                           "data.patch_count": 6000})
    data, whitener = patch_pipeline(cfg, rng)
    d = data.data.shape[1]
    n_filters = int(round(d * cfg["model.overcomplete"]))
    init_rng = stream(seed, "pot/init")
    J0 = init_rng.standard_normal((n_filters, d)) / np.sqrt(d)
    model = PotModel(J0, alpha=cfg["model.alpha"])
    sched = _pot_schedule(cfg, smoke)
    if n_filters > d and sched.filter_norm is None:
        sched.filter_norm = 1.0
        sched.learn_filter_norm = True
        sched.filter_norm_rate = 0.1 * sched.default_rate
    model, hist = train(model, data.data, sched, _hmc_config(cfg), seed=seed,
                        negative_phase="gibbs", record_every=20)
    persist.save_model(os.path.join(outdir, "model.ebm"), model)
    persist.save_whitener(os.path.join(outdir, "whitener.ebm"), whitener)
    _save_history(outdir, hist)
    _emit_filter_report(outdir, model, whitener)
    return model, whitener, hist


def run_pot_stereo(cfg, outdir):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "pot-stereo/data")
    if smoke:
        cfg.values.update({"data.patch_size": 6, "data.keep_dims": 40,
                           "data.patch_count": 6000})
    data, whitener = patch_pipeline(cfg, rng, stereo=True)
    d = data.data.shape[1]
    n_filters = int(round(d * cfg["model.overcomplete"]))
    J0 = stream(seed, "pot-stereo/init").standard_normal((n_filters, d)) / np.sqrt(d)
    model = PotModel(J0, alpha=cfg["model.alpha"])
    sched = _pot_schedule(cfg, smoke)
    model, hist = train(model, data.data, sched, _hmc_config(cfg), seed=seed,
                        negative_phase="gibbs", record_every=20)
    persist.save_model(os.path.join(outdir, "model.ebm"), model)
    persist.save_whitener(os.path.join(outdir, "whitener.ebm"), whitener)
    _save_history(outdir, hist)
    # per-eye pixel filters and stereo measures
    pix = model.J @ whitener.forward
    half = pix.shape[1] // 2
    size = int(round(np.sqrt(half)))
    oc = analysis.ocularity(pix[:, :half], pix[:, half:])
    _write_csv(os.path.join(outdir, "ocularity.csv"), ["unit", "ocularity"],
               list(enumerate(oc)))
    figures.save_ocularity_figure(oc, os.path.join(outdir, "ocularity.png"))
    fits_l = analysis.fit_filter_set(pix[:, :half], (size, size))
    fits_r = analysis.fit_filter_set(pix[:, half:], (size, size))
    rows = []
    for i, (fl, fr) in enumerate(zip(fits_l, fits_r)):
        if fl.good and fr.good:
            d_p, d_v, d_x = analysis.disparity_measures(fl, fr)
            rows.append([i, d_p, d_v, d_x])
    _write_csv(os.path.join(outdir, "disparity.csv"),
               ["unit", "d_phase", "d_phase_shift", "d_position"], rows)
    if rows:
        arr = np.array(rows)
        figures.save_scatter_figure(arr[:, 2], arr[:, 3],
                                    os.path.join(outdir, "disparity.png"),
                                    xlabel="phase shift (px)",
                                    ylabel="position shift (px)")
    return model, whitener, hist


def run_pot_topo(cfg, outdir):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "pot-topo/data")
    rows, cols = cfg["model.grid_rows"], cfg["model.grid_cols"]
    if smoke:
        cfg.values.update({"data.patch_size": 8, "data.keep_dims": 36,
                           "data.patch_count": 6000})
        rows, cols = 6, 6
    data, whitener = patch_pipeline(cfg, rng)
    d = data.data.shape[1]
    n_filters = rows * cols
    W = build_topographic_pooling(rows, cols, cfg["model.neighborhood"])
    J0 = stream(seed, "pot-topo/init").standard_normal((n_filters, d)) / np.sqrt(d)
    model = PotModel(J0, alpha=cfg["model.alpha"], W=W, grid=(rows, cols))
    sched = _pot_schedule(cfg, smoke)
    if sched.filter_norm is None:
        sched.filter_norm = 1.0
        sched.learn_filter_norm = True
        sched.filter_norm_rate = 0.1 * sched.default_rate
    model, hist = train(model, data.data, sched, _hmc_config(cfg), seed=seed,
                        negative_phase="gibbs", record_every=20)
    persist.save_model(os.path.join(outdir, "model.ebm"), model)
    persist.save_whitener(os.path.join(outdir, "whitener.ebm"), whitener)
    _save_history(outdir, hist)
    _emit_filter_report(outdir, model, whitener)
    report = analysis.map_report(model, whitener, rng=stream(seed, "pot-topo/null"))
    figures.save_map_figure(report["grids"], report["mask"], (rows, cols),
                            os.path.join(outdir, "maps.png"))
    _write_csv(os.path.join(outdir, "map_continuity.csv"),
               ["property", "neighbor_stat", "shuffled_stat", "ratio"],
               [[k, v[0], v[1], v[0] / v[1] if v[1] else np.nan]
                for k, v in report["continuity"].items()])
    return model, whitener, report


# -- chapter 5 recipes ----------------------------------------------------------------


def build_bm_model(cfg, seed, stereo=True, layout="ring"):
    n = cfg["model.n_v"]
    init_rng = stream(seed, "bm/init")
    J0 = init_retinotopic_weights(n, n, cfg["bm.sigma0"], cfg["bm.s0"],
                                  layout=layout)
    noise = cfg["bm.init_noise"]
    if stereo:
        J = np.vstack([J0 + noise * init_rng.standard_normal(J0.shape),
                       J0 + noise * init_rng.standard_normal(J0.shape)])
    else:
        J = J0 + noise * init_rng.standard_normal(J0.shape)
    J = np.clip(J, 0.0, None)
    K = dog_lateral_weights(n, cfg["bm.sigma1"], cfg["bm.sigma2"], cfg["bm.s_m"],
                            layout=layout)
    return J, K


def run_bm(cfg, outdir, layout="ring"):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "bm/data")
    if layout == "grid":
        side = 10 if smoke else 16
        cfg.values["model.n_v"] = side * side
        grid = (side, side)
        gen_cfg = StereoInputConfig(layout="grid", n_v=side,
                                    seeds=cfg["bm.input_seeds"],
                                    envelope_width=cfg["bm.envelope_width"],
                                    threshold=cfg["bm.threshold"],
                                    passes=cfg["bm.passes"],
                                    shift_std=cfg["bm.shift_std"] / 3.0,
                                    deprive_factor=cfg["bm.deprive_factor"])
    else:
        cfg.values["model.n_v"] = 51
        grid = None
        gen_cfg = StereoInputConfig(layout="ring", n_v=51,
                                    seeds=cfg["bm.input_seeds"],
                                    envelope_width=cfg["bm.envelope_width"],
                                    threshold=cfg["bm.threshold"],
                                    passes=cfg["bm.passes"],
                                    shift_std=cfg["bm.shift_std"],
                                    deprive_factor=cfg["bm.deprive_factor"])
    n = cfg["model.n_v"]
    count = 1000 if smoke else 4000
    data = gen_stereo_patterns(gen_cfg, count, rng)
    J, K = build_bm_model(cfg, seed, stereo=True, layout=layout)
    pbar = np.clip(data.mean(axis=0), 1e-3, 1 - 1e-3)
    bm = BoltzmannMachine(J, K, bias_v=np.log(pbar / (1 - pbar)),
                          bias_h=np.full(n, -1.0), nonneg_J=True, grid=grid)
    epochs = 6 if smoke else 30
    sched = TrainSchedule(default_rate=0.05, epochs=epochs, batch_size=50,
                          rates={"K": 0.0}, nonneg_params=("J",), cd_steps=1)
    bm, hist = train(bm, data, sched, _hmc_config(cfg), seed=seed,
                     record_every=50)
    persist.save_model(os.path.join(outdir, "model.ebm"), bm)
    _save_history(outdir, hist)
    # ocularity map and weight images
    oc = analysis.ocularity(bm.params["J"][:n].T, bm.params["J"][n:].T)
    _write_csv(os.path.join(outdir, "ocularity.csv"), ["unit", "ocularity"],
               list(enumerate(oc)))
    figures.save_ocularity_figure(oc, os.path.join(outdir, "ocularity.png"),
                                  grid=grid)
    for name, M in (("weights_left", bm.params["J"][:n]),
                    ("weights_right", bm.params["J"][n:]),
                    ("difference_mode", bm.params["J"][:n] - bm.params["J"][n:])):
        img = M - M.min()
        img = img / (img.max() + 1e-12)
        persist.write_pgm(os.path.join(outdir, f"{name}.pgm"), img)
    if grid is None:
        changes, width = analysis.ocularity_band_stats(oc)
        _write_csv(os.path.join(outdir, "band_stats.csv"),
                   ["sign_changes", "mean_band_width"], [[changes, width]])
    # reconstruction fidelity (mean-field round trip)
    probe = data[:200]
    M, _ = bm.mean_field_hidden(probe, damping=cfg["bm.damping"])
    recon = bm.mean_field_visible(M)
    err = np.abs(recon - probe)
    _write_csv(os.path.join(outdir, "reconstruction.csv"),
               ["mean_abs_error", "frac_units_below_0.2"],
               [[float(err.mean()), float((err < 0.2).mean())]])
    return bm, hist, oc


# -- chapter 7 recipes ----------------------------------------------------------------


def run_denoise_bench(cfg, outdir, model=None, whitener=None):
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "denoise/data")
    if model is None:
        if smoke:
            cfg.values.update({"data.patch_size": 6, "data.keep_dims": 30,
                               "data.patch_count": 5000, "train.epochs": 6})
        else:
            cfg.values.setdefault("data.patch_size", 12)
            cfg.values.update({"data.patch_size": 12, "data.keep_dims": 140,
                               "train.epochs": 60,
                               "train.anneal": "0:0.05,6000:0.02,10000:0.01"})
        data, whitener = patch_pipeline(cfg, rng)
        d = data.data.shape[1]
        J0 = stream(seed, "denoise/init").standard_normal((d, d)) / np.sqrt(d)
        model = PotModel(J0, alpha=cfg["model.alpha"])
        sched = _pot_schedule(cfg, smoke)
        # the square prior trains on the exact likelihood gradient (the
        # closed-form partition function makes it available and scale-stable)
        model, _ = train(model, data.data, sched, _hmc_config(cfg), seed=seed,
                         negative_phase="exact", record_every=10**9)
        persist.save_model(os.path.join(outdir, "model.ebm"), model)
        persist.save_whitener(os.path.join(outdir, "whitener.ebm"), whitener)
    # held-out test image
    test = synthesize_images(1, 72 if smoke else 120,
                             stream(seed, "denoise/test"))[0]
    levels = [float(v) for v in str(cfg["denoise.levels"]).split(",")]
    rows = []
    noise_rng = stream(seed, "denoise/noise")
    for level in levels:
        sigma = 10 ** (-level / 20.0)  # s_max = 1
        noisy = test + sigma * noise_rng.standard_normal(test.shape)
        job = make_denoise_job(model, whitener, sigma,
                               tol=cfg["denoise.tol"],
                               max_iter=cfg["denoise.max_iter"])
        den, rep = iwf_image(job, noisy, whitener=whitener, reference=test,
                             s_max=1.0)
        wien, _ = wiener_baseline(noisy, sigma, reference=test, s_max=1.0)
        rows.append({"noise_psnr": rep["psnr_noisy"], "method": "iwf",
                     "psnr": rep["psnr_denoised"]})
        rows.append({"noise_psnr": rep["psnr_noisy"], "method": "wiener",
                     "psnr": analysis.psnr(test, wien, 1.0)})
        persist.write_pgm(os.path.join(outdir, f"denoised_{level:g}dB.pgm"),
                          np.clip(den, 0, 1))
    _write_csv(os.path.join(outdir, "report.csv"),
               ["noise_psnr_db", "method", "psnr_db"],
               [[r["noise_psnr"], r["method"], r["psnr"]] for r in rows])
    figures.save_denoise_figure(rows, os.path.join(outdir, "report.png"))
    return rows


def run_feature_extract(cfg, outdir):
    """Generic unsupervised feature extraction: vectors -> whitening ->
    overcomplete PoT -> filter report plus most/least exciting inputs."""
    seed = cfg["experiment.seed"]
    smoke = cfg["experiment.smoke"]
    rng = stream(seed, "features/data")
    if smoke:
        cfg.values.update({"data.patch_size": 8, "data.keep_dims": 30,
                           "data.patch_count": 4000, "train.epochs": 5})
    data, whitener = patch_pipeline(cfg, rng)
    d = data.data.shape[1]
    n_filters = int(round(d * max(cfg["model.overcomplete"], 1.0)))
    J0 = stream(seed, "features/init").standard_normal((n_filters, d)) / np.sqrt(d)
    model = PotModel(J0, alpha=cfg["model.alpha"])
    sched = _pot_schedule(cfg, smoke)
    sched.rates.setdefault("alpha", 0.001)
    model, hist = train(model, data.data, sched, _hmc_config(cfg), seed=seed,
                        negative_phase="gibbs", record_every=20)
    persist.save_model(os.path.join(outdir, "model.ebm"), model)
    persist.save_whitener(os.path.join(outdir, "whitener.ebm"), whitener)
    _save_history(outdir, hist)
    _emit_filter_report(outdir, model, whitener)
    # most / least exciting inputs per unit (by |y|)
    Y, _ = model.features(data.data)
    k = min(12, data.data.shape[0])
    rows = []
    for i in range(min(n_filters, 64)):
        order = np.argsort(np.abs(Y[:, i]))
        rows.append([i] + list(order[-k:][::-1]) + list(order[:k]))
    _write_csv(os.path.join(outdir, "exciting_inputs.csv"),
               ["unit"] + [f"top{j}" for j in range(k)]
               + [f"bottom{j}" for j in range(k)], rows)
    return model, whitener


RECIPE_RUNNERS = {
    "bss": run_bss,
    "toy2d": run_toy2d,
    "pot-natural": run_pot_natural,
    "pot-stereo": run_pot_stereo,
    "pot-topo": run_pot_topo,
    "bm-1d": lambda cfg, out: run_bm(cfg, out, layout="ring"),
    "bm-2d": lambda cfg, out: run_bm(cfg, out, layout="grid"),
    "denoise-bench": run_denoise_bench,
    "feature-extract": run_feature_extract,
}


def run_recipe(cfg: ExperimentConfig, outdir):
    os.makedirs(outdir, exist_ok=True)
    name = cfg["experiment.recipe"]
    if name not in RECIPE_RUNNERS:
        raise ValueError(f"unknown recipe {name!r}; choose from "
                         f"{sorted(RECIPE_RUNNERS)}")
    return RECIPE_RUNNERS[name](cfg, outdir)
