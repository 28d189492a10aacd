"""CLI surface tests: every recipe end-to-end at smoke scale, command
flows, determinism, config plumbing, error paths."""

import os
import time

import numpy as np
import pytest

from ebmlab.cli import main
from ebmlab.config import ConfigError, ExperimentConfig
from ebmlab.persist import load_matrix, load_model, read_pgm, save_matrix, write_pgm
from ebmlab.pipeline import synthesize_images


@pytest.fixture(scope="module")
def trained_pot(tmp_path_factory):
    out = tmp_path_factory.mktemp("pot")
    assert main(["train", "--recipe", "pot-natural", "--out", str(out),
                 "--smoke", "--seed", "5"]) == 0
    return out


class TestRecipeSmoke:
    """Every recipe must complete end-to-end at reduced scale."""

    @pytest.mark.parametrize("recipe", [
        "bss", "toy2d", "pot-stereo", "pot-topo", "bm-1d", "bm-2d",
        "denoise-bench", "feature-extract",
    ])
    def test_recipe_runs_under_budget(self, recipe, tmp_path):
        start = time.time()
        rc = main(["train", "--recipe", recipe, "--out", str(tmp_path),
                   "--smoke", "--seed", "3"])
        elapsed = time.time() - start
        assert rc == 0
        assert elapsed < 300.0
        assert (tmp_path / "model.ebm").exists() or \
               (tmp_path / "model_hmc.ebm").exists()

    def test_pot_natural_covered_by_fixture(self, trained_pot):
        assert (trained_pot / "model.ebm").exists()
        assert (trained_pot / "filters.pgm").exists()
        assert (trained_pot / "filters.png").exists()
        assert (trained_pot / "history.csv").exists()
        assert (trained_pot / "history.png").exists()


class TestTrain:
    def test_zero_epochs_checkpoint_equals_init(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        for out in (out1, out2):
            rc = main(["train", "--recipe", "pot-natural", "--out", str(out),
                       "--smoke", "--seed", "9", "--epochs", "0",
                       "--set", "train.epochs=0"])
            assert rc == 0
        m1 = load_model(out1 / "model.ebm")
        m2 = load_model(out2 / "model.ebm")
        np.testing.assert_array_equal(m1.J, m2.J)

    def test_invalid_config_keys_listed(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig().set_many([("nope.key", "1"),
                                         ("train.rate", "fast")])
        msg = str(err.value)
        assert "nope.key" in msg and "train.rate" in msg

    def test_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EBMLAB_TRAIN_RATE", "0.125")
        cfg = ExperimentConfig().apply_env()
        assert cfg["train.rate"] == 0.125

    def test_config_file_roundtrip(self, tmp_path):
        cfg = ExperimentConfig()
        path = tmp_path / "run.cfg"
        path.write_text(cfg.dump())
        loaded = ExperimentConfig.from_file(path)
        assert loaded.values == cfg.values


class TestSample:
    def test_zero_count_valid_empty_file(self, trained_pot, tmp_path):
        out = tmp_path / "samples.ebm"
        rc = main(["sample", "--model", str(trained_pot / "model.ebm"),
                   "--count", "0", "--mode", "annealed", "--out", str(out)])
        assert rc == 0
        data, meta = load_matrix(out)
        assert data.shape[0] == 0
        assert meta["mode"] == "annealed"

    def test_same_seed_bit_identical(self, trained_pot, tmp_path):
        outs = []
        for name in ("s1.ebm", "s2.ebm"):
            out = tmp_path / name
            rc = main(["sample", "--model", str(trained_pot / "model.ebm"),
                       "--count", "8", "--mode", "annealed", "--steps", "40",
                       "--seed", "21", "--out", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_cd_negative_mode_needs_data(self, trained_pot, tmp_path):
        with pytest.raises(SystemExit):
            main(["sample", "--model", str(trained_pot / "model.ebm"),
                  "--count", "4", "--mode", "cd-negative",
                  "--out", str(tmp_path / "x.ebm")])

    def test_cd_negative_mode(self, trained_pot, tmp_path):
        model = load_model(trained_pot / "model.ebm")
        data = np.random.default_rng(0).standard_normal((50, model.dim))
        dpath = tmp_path / "data.ebm"
        save_matrix(dpath, data)
        out = tmp_path / "neg.ebm"
        rc = main(["sample", "--model", str(trained_pot / "model.ebm"),
                   "--count", "10", "--mode", "cd-negative",
                   "--data", str(dpath), "--seed", "2", "--out", str(out)])
        assert rc == 0
        samples, _ = load_matrix(out)
        assert samples.shape == (10, model.dim)


class TestAnalyze:
    def test_pot_analysis_outputs(self, trained_pot, tmp_path):
        out = tmp_path / "analysis"
        rc = main(["analyze", "--model", str(trained_pot / "model.ebm"),
                   "--whitener", str(trained_pot / "whitener.ebm"),
                   "--out", str(out)])
        assert rc == 0
        assert (out / "filters.pgm").exists()
        assert (out / "filters_fits.csv").exists()
        assert (out / "tuning.png").exists()
        header = (out / "filters_fits.csv").read_text().splitlines()[0]
        assert header.startswith("unit,center_x,center_y,orientation")

    def test_untrained_model_flags_mostly_bad(self, tmp_path):
        from ebmlab.persist import save_model
        from ebmlab.pot import PotModel
        rng = np.random.default_rng(0)
        model = PotModel(rng.standard_normal((16, 16)), alpha=1.5)
        mpath = tmp_path / "random.ebm"
        save_model(mpath, model)
        out = tmp_path / "analysis"
        rc = main(["analyze", "--model", str(mpath), "--out", str(out)])
        assert rc == 0
        rows = (out / "filters_fits.csv").read_text().splitlines()[1:]
        good = [int(r.split(",")[-1]) for r in rows]
        assert np.mean(good) < 0.5


class TestDenoise:
    def test_denoise_command_report(self, trained_pot, tmp_path, rng):
        img = synthesize_images(1, 48, rng)[0]
        ipath = tmp_path / "scene.pgm"
        write_pgm(ipath, img)
        out = tmp_path / "den"
        rc = main(["denoise", "--model", str(trained_pot / "model.ebm"),
                   "--whitener", str(trained_pot / "whitener.ebm"),
                   "--image", str(ipath), "--noise-std", "0.15",
                   "--seed", "4", "--out", str(out)])
        assert rc == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[0] == "noise_psnr_db,method,psnr_db,noise_std"
        assert len(report) == 3
        assert (out / "report.png").exists()

    def test_zero_noise_flagged_identical(self, trained_pot, tmp_path, rng):
        img = synthesize_images(1, 32, rng)[0]
        ipath = tmp_path / "scene.pgm"
        write_pgm(ipath, img)
        out = tmp_path / "den0"
        rc = main(["denoise", "--model", str(trained_pot / "model.ebm"),
                   "--whitener", str(trained_pot / "whitener.ebm"),
                   "--image", str(ipath), "--noise-std", "0",
                   "--out", str(out)])
        assert rc == 0
        assert "identical" in (out / "report.csv").read_text()

    def test_missing_model_clean_error(self, tmp_path, rng):
        img = synthesize_images(1, 16, rng)[0]
        ipath = tmp_path / "scene.pgm"
        write_pgm(ipath, img)
        with pytest.raises(SystemExit):
            main(["denoise", "--model", str(tmp_path / "missing.ebm"),
                  "--image", str(ipath), "--out", str(tmp_path / "o")])


class TestPreprocessAndStats:
    def test_preprocess_outputs(self, tmp_path, rng):
        imgdir = tmp_path / "imgs"
        imgdir.mkdir()
        for i, img in enumerate(synthesize_images(3, 40, rng)):
            write_pgm(imgdir / f"im{i}.pgm", img)
        out = tmp_path / "prep"
        rc = main(["preprocess", "--images", str(imgdir), "--out", str(out),
                   "--set", "data.patch_size=6", "--set", "data.patch_count=500",
                   "--set", "data.keep_dims=20"])
        assert rc == 0
        patches, meta = load_matrix(out / "patches.ebm")
        assert patches.shape == (500, 20)
        assert meta["stage"] == "whitened"

    def test_stats_command(self, trained_pot, capsys):
        rc = main(["stats", "--model", str(trained_pot / "model.ebm")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PotModel" in out and "norm" in out

    def test_stats_energy_diagnostic(self, trained_pot, tmp_path, capsys):
        model = load_model(trained_pot / "model.ebm")
        rng = np.random.default_rng(1)
        dpath = tmp_path / "d.ebm"
        save_matrix(dpath, rng.standard_normal((20, model.dim)))
        rc = main(["stats", "--model", str(trained_pot / "model.ebm"),
                   "--data", str(dpath), "--samples", str(dpath)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "data energy" in out and "sample energy" in out

    def test_dump_defaults(self, capsys):
        assert main(["--dump-defaults"]) == 0
        out = capsys.readouterr().out
        assert "train.rate=" in out and "hmc.step_size=" in out

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 2
