"""Contrastive-divergence training loop.

One update per minibatch: average the energy's parameter gradient over
the data rows (positive phase), over n-step samples started at those rows
(negative phase), and step

    delta = (eta / N) * (-sum_data dE/dtheta + sum_samples dE/dtheta)

with optional momentum, weight decay, learning-rate annealing and a
filter-row norm constraint. The negative phase runs HMC or the model's
auxiliary Gibbs sweeps; square models with a closed-form partition
function can swap in the exact expectation (negative_phase="exact"),
which turns the update into the exact likelihood gradient.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import stream
from .samplers import HmcConfig, adapt_step_size, run_cd_negative_phase

__all__ = [
    "TrainSchedule",
    "TrainHistory",
    "apply_update",
    "enforce_filter_norm",
    "train",
]


@dataclass
class TrainSchedule:
    """Hyper-parameters for one training run.

    ``rates`` maps parameter names to learning rates; parameters without
    an entry use ``default_rate`` (a rate of 0 freezes the parameter).
    ``anneal`` is a list of (iteration, rate) pairs that reset the default
    rate when the global iteration counter reaches them; named rates are
    scaled by the same factor.
    """

    batch_size: int = 100
    epochs: int = 1
    default_rate: float = 0.01
    rates: dict = field(default_factory=dict)
    momentum: float = 0.0
    weight_decay: float = 0.0
    anneal: list = field(default_factory=list)
    cd_steps: int = 1
    filter_norm: float | None = None
    filter_norm_param: str = "J"
    learn_filter_norm: bool = False
    filter_norm_rate: float = 0.0
    nonneg_params: tuple = ()

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if self.default_rate < 0 or any(r < 0 for r in self.rates.values()):
            raise ValueError("learning rates must be >= 0")

    def rate_for(self, name: str, scale: float = 1.0) -> float:
        return self.rates.get(name, self.default_rate) * scale


@dataclass
class TrainHistory:
    """Per-iteration training record."""

    iteration: list = field(default_factory=list)
    data_energy: list = field(default_factory=list)
    sample_energy: list = field(default_factory=list)
    param_norms: dict = field(default_factory=dict)
    acceptance: list = field(default_factory=list)
    amari: list = field(default_factory=list)

    def append(self, it, e_data, e_samp, norms, accept, amari=None):
        self.iteration.append(int(it))
        self.data_energy.append(float(e_data))
        self.sample_energy.append(float(e_samp))
        for k, v in norms.items():
            self.param_norms.setdefault(k, []).append(float(v))
        self.acceptance.append(float(accept))
        if amari is not None:
            self.amari.append(float(amari))

    def write_csv(self, path):
        cols = ["iteration", "data_energy", "sample_energy", "acceptance"]
        cols += [f"norm_{k}" for k in sorted(self.param_norms)]
        if self.amari:
            cols.append("amari")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(len(self.iteration)):
                row = [self.iteration[i], self.data_energy[i],
                       self.sample_energy[i], self.acceptance[i]]
                row += [self.param_norms[k][i] for k in sorted(self.param_norms)]
                if self.amari:
                    row.append(self.amari[i])
                w.writerow(row)


def apply_update(params, grads, velocity, schedule: TrainSchedule, rate_scale=1.0):
    """One momentum / weight-decay step on every parameter in ``grads``.

    velocity <- momentum * velocity + rate * grad
    params   <- params + velocity - decay * params
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"unknown parameter {name!r}")
        if params[name].shape != g.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        eta = schedule.rate_for(name, rate_scale)
        v = velocity.setdefault(name, np.zeros_like(params[name]))
        v *= schedule.momentum
        v += eta * g
        params[name] += v
        if schedule.weight_decay:
            params[name] -= schedule.weight_decay * params[name]
    return params


def enforce_filter_norm(J, l):
    """Rescale every row of J to Euclidean norm ``l``, preserving
    directions. Zero rows cannot be normalised: they are left at zero and
    their indices returned."""
    if l <= 0:
        raise ValueError("target norm must be positive")
    J = np.asarray(J, dtype=float)
    norms = np.linalg.norm(J, axis=1)
    zero_rows = np.flatnonzero(norms == 0)
    safe = np.where(norms == 0, 1.0, norms)
    out = J * (l / safe)[:, None]
    out[zero_rows] = 0.0
    return out, zero_rows


def _cd_delta(model, batch, schedule, sampler_cfg, rng, negative_phase):
    """(-pos + neg)/N for each parameter, plus logging quantities."""
    N = batch.shape[0]
    used_hmc = False
    if model.has_stochastic_hiddens and negative_phase != "exact":
        # free-energy surrogate path: directions are already averaged and
        # oriented so that params += eta * delta ascends the likelihood
        delta, _converged = model.variational_cd_grads(batch, n=max(schedule.cd_steps, 1))
        return delta, None, 1.0, False
    pos = model.param_grads_batch(batch)
    if negative_phase == "exact":
        logz = model.log_partition_param_grads()
        # <dE/dtheta>_model = -d(log Z)/dtheta
        delta = {k: (-pos[k] / N) - logz.get(k, np.zeros_like(pos[k]))
                 for k in pos}
        samples, accept = None, 1.0
    else:
        if negative_phase == "gibbs":
            samples, accept = model.gibbs_chain(batch, schedule.cd_steps, rng), 1.0
        elif negative_phase == "hmc":
            samples = batch
            accept = 1.0
            if schedule.cd_steps > 0:
                from .samplers import hmc_step_batch
                total = acc_n = 0
                for _ in range(schedule.cd_steps):
                    samples, acc, _ = hmc_step_batch(model, samples, sampler_cfg, rng)
                    total += acc.size
                    acc_n += int(acc.sum())
                accept = acc_n / total
            used_hmc = True
        else:
            samples, accept = run_cd_negative_phase(
                model, batch, sampler_cfg, rng, n_steps=schedule.cd_steps)
            used_hmc = not model.supports_aux_gibbs
        neg = model.param_grads_batch(samples)
        delta = {k: (neg[k] - pos[k]) / N for k in pos}
    return delta, samples, accept, used_hmc


def train(model, dataset, schedule: TrainSchedule, sampler_cfg=None, *,
          seed=0, negative_phase="auto", reference_unmixing=None,
          record_every=1, callback=None):
    """Run CD training and return (model, TrainHistory).

    ``negative_phase`` is "auto" (Gibbs when the model supports it, else
    HMC), "hmc", "gibbs", or "exact". Minibatches are drawn without
    replacement within each epoch from a seeded shuffle, so the run is
    bit-reproducible for a fixed seed and schedule. Non-finite parameters
    abort with a diagnostic snapshot in the exception.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=float))
    if data.shape[1] != model.dim:
        raise ValueError("dataset row dimension does not match the model")
    sampler_cfg = sampler_cfg or HmcConfig()
    history = TrainHistory()
    velocity = {}
    shuffle_rng = stream(seed, "train/shuffle")
    iteration = 0
    rate_scale = 1.0
    anneal = sorted(schedule.anneal)
    base_rate = schedule.default_rate

    from .analysis import amari_distance  # local import to avoid a cycle

    for _epoch in range(schedule.epochs):
        order = shuffle_rng.permutation(data.shape[0])
        for start in range(0, data.shape[0], schedule.batch_size):
            batch = data[order[start:start + schedule.batch_size]]
            if batch.shape[0] == 0:
                continue
            while anneal and iteration >= anneal[0][0]:
                _, new_rate = anneal.pop(0)
                rate_scale = new_rate / base_rate if base_rate > 0 else 0.0
            chain_rng = stream(seed, "train/negative", iteration)
            delta, samples, accept, used_hmc = _cd_delta(
                model, batch, schedule, sampler_cfg, chain_rng, negative_phase)

            if schedule.filter_norm is not None and schedule.learn_filter_norm:
                name = schedule.filter_norm_param
                J = model.params[name]
                dirs = J / np.maximum(np.linalg.norm(J, axis=1), 1e-300)[:, None]
                # chain-rule gradient of the CD objective through the
                # projection J = l * dirs; delta already carries -dKL/dJ
                dl = float(np.sum(dirs * delta[name]))
                schedule.filter_norm += schedule.filter_norm_rate * rate_scale * dl
                schedule.filter_norm = max(schedule.filter_norm, 1e-6)

            apply_update(model.params, delta, velocity, schedule, rate_scale)

            for name in schedule.nonneg_params:
                np.maximum(model.params[name], 0.0, out=model.params[name])
            if schedule.filter_norm is not None:
                model.params[schedule.filter_norm_param], _ = enforce_filter_norm(
                    model.params[schedule.filter_norm_param], schedule.filter_norm)
            if hasattr(model, "invalidate_caches"):
                model.invalidate_caches()

            for name, value in model.params.items():
                if not np.all(np.isfinite(value)):
                    raise FloatingPointError(
                        f"non-finite parameter {name!r} at iteration {iteration}; "
                        f"snapshot norms: "
                        f"{ {k: float(np.linalg.norm(v)) for k, v in model.params.items()} }")

            if iteration % record_every == 0:
                e_data = float(np.mean(model.energy_batch(batch)))
                e_samp = (float(np.mean(model.energy_batch(samples)))
                          if samples is not None else np.nan)
                norms = {k: np.linalg.norm(v) for k, v in model.params.items()}
                am = None
                if reference_unmixing is not None:
                    am = amari_distance(model.params["J"], reference_unmixing)
                history.append(iteration, e_data, e_samp, norms, accept, am)

            if used_hmc:
                sampler_cfg.step_size = adapt_step_size(
                    sampler_cfg.step_size, accept,
                    (sampler_cfg.accept_lo, sampler_cfg.accept_hi),
                    sampler_cfg.adapt_factor)
            if callback is not None:
                callback(iteration, model, history)
            iteration += 1
    return model, history
