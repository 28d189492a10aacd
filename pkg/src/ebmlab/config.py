"""Experiment configuration.

Flat key=value text with section prefixes (``train.rate=0.05``,
``hmc.step_size=0.02`` ...). Defaults live in ``DEFAULTS``; a config file
and then command-line ``--set key=value`` pairs override them, and
environment variables override everything: ``EBMLAB_TRAIN_RATE=0.1``
matches the key ``train.rate`` (dots become underscores, case
insensitive). Validation collects every bad field before failing.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

__all__ = ["ExperimentConfig", "DEFAULTS", "RECIPES", "ConfigError"]

ENV_PREFIX = "EBMLAB_"

RECIPES = (
    "bss", "toy2d", "pot-natural", "pot-stereo", "pot-topo",
    "bm-1d", "bm-2d", "denoise-bench", "feature-extract",
)

DEFAULTS = {
    # experiment
    "experiment.recipe": "pot-natural",
    "experiment.seed": 0,
    "experiment.threads": 0,             # 0 = all available cores
    "experiment.smoke": False,
    # data
    "data.images": "",                   # directory of PGM files; empty = synthetic corpus
    "data.synthetic_images": 40,
    "data.image_side": 96,
    "data.patch_size": 12,
    "data.patch_count": 20000,
    "data.keep_dims": 64,
    "data.whiten_mode": "pca",
    "data.apply_log": False,
    "data.shift_std": 2.0,               # stereo pair extraction
    # model
    "model.n_features": 64,
    "model.alpha": 1.5,
    "model.overcomplete": 1.0,
    "model.grid_rows": 8,
    "model.grid_cols": 8,
    "model.neighborhood": "square:3",
    "model.hidden_units": 51,
    "model.n_v": 51,
    # train
    "train.batch_size": 100,
    "train.epochs": 10,
    "train.rate": 0.05,
    "train.rate_alpha": 0.0,
    "train.rate_k": 0.0,
    "train.momentum": 0.9,
    "train.weight_decay": 0.0,
    "train.cd_steps": 1,
    "train.filter_norm": 0.0,            # 0 disables the constraint
    "train.learn_filter_norm": False,
    "train.anneal": "",                  # "iter:rate,iter:rate,..."
    # hmc
    "hmc.n_leapfrog": 30,
    "hmc.step_size": 0.05,
    "hmc.n_outer": 1,
    "hmc.accept_lo": 0.90,
    "hmc.accept_hi": 0.95,
    "hmc.adapt_factor": 1.02,
    # bm
    "bm.sigma0": 30.0,
    "bm.s0": 0.1,
    "bm.sigma1": 4.77,
    "bm.sigma2": 4.66,
    "bm.s_m": 0.25,
    "bm.init_noise": 0.005,
    "bm.damping": 0.2,
    "bm.mf_tol": 1e-6,
    "bm.mf_max_iter": 200,
    "bm.input_seeds": 4,
    "bm.envelope_width": 1.5,
    "bm.threshold": 0.4,
    "bm.passes": 3,
    "bm.shift_std": 15.0,
    "bm.deprive_factor": 1.0,
    # denoise
    "denoise.noise_std": 0.1,
    "denoise.levels": "18,12,8.5,6",     # input PSNRs (dB) for the benchmark
    "denoise.tol": 1e-7,
    "denoise.max_iter": 200,
    # sample
    "sample.count": 100,
    "sample.steps": 1000,
    "sample.t_start": 10.0,
}


class ConfigError(ValueError):
    pass


def _coerce(key, raw, default):
    if isinstance(default, bool):
        if str(raw).lower() in ("1", "true", "yes", "on"):
            return True
        if str(raw).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}")
    return str(raw)


@dataclass
class ExperimentConfig:
    """All settings for one experiment run."""

    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def set_many(self, pairs):
        """Apply key=value overrides, collecting every error."""
        errors = []
        for key, raw in pairs:
            if key not in DEFAULTS:
                errors.append(f"unknown config key {key!r}")
                continue
            try:
                self.values[key] = _coerce(key, raw, DEFAULTS[key])
            except ConfigError as err:
                errors.append(str(err))
        if errors:
            raise ConfigError("invalid config fields: " + "; ".join(errors))
        return self

    def apply_env(self, environ=None):
        environ = os.environ if environ is None else environ
        pairs = []
        for key in DEFAULTS:
            env_key = ENV_PREFIX + key.replace(".", "_").upper()
            if env_key in environ:
                pairs.append((key, environ[env_key]))
        if pairs:
            self.set_many(pairs)
        return self

    @classmethod
    def from_file(cls, path):
        cfg = cls()
        pairs = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                pairs.append((key.strip(), value.strip()))
        return cfg.set_many(pairs)

    def dump(self):
        return "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values))

    def anneal_schedule(self):
        """Parse train.anneal 'iter:rate,...' into [(iteration, rate)]."""
        raw = str(self.values.get("train.anneal", "")).strip()
        if not raw:
            return []
        out = []
        for part in raw.split(","):
            it, _, rate = part.partition(":")
            out.append((int(it), float(rate)))
        return out
