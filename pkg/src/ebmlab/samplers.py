"""Hybrid Monte Carlo and chain-running utilities.

The HMC transition simulates Hamiltonian dynamics with a leapfrog
integrator and corrects discretisation error with a Metropolis test, so
the chain leaves e^{-E}/Z invariant. Momenta are fully resampled from a
unit isotropic Gaussian at every outer step, and the trajectory direction
is drawn uniformly from {+1, -1}.

Chains are vectorised across rows: every row of a state matrix is an
independent chain sharing read-only model parameters. Random draws are
made in fixed row-major order from streams derived from the master seed,
so results are reproducible regardless of how work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import EnergyModel

__all__ = [
    "HmcConfig",
    "ChainState",
    "leapfrog",
    "leapfrog_batch",
    "hmc_step",
    "hmc_step_batch",
    "adapt_step_size",
    "run_cd_negative_phase",
    "run_chain",
    "annealed_sample",
]

# |delta H| beyond this aborts a trajectory (guards step-size blowup).
DIVERGENCE_THRESHOLD = 1000.0


@dataclass
class HmcConfig:
    """Settings for the HMC transition operator.

    ``n_leapfrog`` inner leapfrog iterations per trajectory, ``step_size``
    the leapfrog step, ``n_outer`` outer steps per sampling run (the n of
    CD-n when used for negative phases), and an acceptance band
    [``accept_lo``, ``accept_hi``] with multiplicative ``adapt_factor``
    used between sampling runs.
    """

    n_leapfrog: int = 30
    step_size: float = 0.1
    n_outer: int = 1
    accept_lo: float = 0.90
    accept_hi: float = 0.95
    adapt_factor: float = 1.02

    def __post_init__(self):
        if not (0.0 < self.accept_lo < self.accept_hi < 1.0):
            raise ValueError("acceptance band must satisfy 0 < lo < hi < 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.n_leapfrog < 1:
            raise ValueError("need at least one leapfrog step")


@dataclass
class ChainState:
    """One chain: current position, last accept flag, running accept rate."""

    q: np.ndarray
    accepted_last: bool = False
    n_proposals: int = 0
    n_accepted: int = 0
    diverged_last: bool = False

    @property
    def acceptance_rate(self) -> float:
        if self.n_proposals == 0:
            return 0.0
        return self.n_accepted / self.n_proposals


class DivergentTrajectory(Exception):
    """Raised when a trajectory hits non-finite gradients or energies."""


def leapfrog(model, q, p, step_size, n_leapfrog, direction=1):
    """Integrate n_leapfrog ordered half-kick / drift / half-kick updates.

    Exactly reversible: re-running from (q', p') with the opposite
    direction recovers (q, p) up to float roundoff. Raises
    DivergentTrajectory on non-finite gradients.
    """
    q1, p1 = leapfrog_batch(
        model, np.asarray(q, float)[None, :], np.asarray(p, float)[None, :],
        step_size, n_leapfrog, direction,
    )
    return q1[0], p1[0]


def leapfrog_batch(model, Q, P, step_size, n_leapfrog, direction=1):
    """Leapfrog all rows of (Q, P) simultaneously."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    lam_eps = direction * step_size
    Q = np.array(Q, dtype=float)
    P = np.array(P, dtype=float)
    for _ in range(int(n_leapfrog)):
        g = model.state_grad_batch(Q)
        if not np.all(np.isfinite(g)):
            raise DivergentTrajectory("non-finite gradient")
        P = P - 0.5 * lam_eps * g
        Q = Q + lam_eps * P
        g = model.state_grad_batch(Q)
        if not np.all(np.isfinite(g)):
            raise DivergentTrajectory("non-finite gradient")
        P = P - 0.5 * lam_eps * g
    return Q, P


def hmc_step(model, chain: ChainState, cfg: HmcConfig, rng: np.random.Generator) -> ChainState:
    """One outer HMC step on a single chain (resample momentum, integrate,
    Metropolis-accept). On rejection or divergence the state is unchanged."""
    Q = chain.q[None, :]
    Qn, acc, div = hmc_step_batch(model, Q, cfg, rng)
    chain.q = Qn[0]
    chain.accepted_last = bool(acc[0])
    chain.diverged_last = bool(div[0])
    chain.n_proposals += 1
    chain.n_accepted += int(acc[0])
    return chain


def hmc_step_batch(model, Q, cfg: HmcConfig, rng: np.random.Generator):
    """One outer HMC step applied to every row of Q.

    Returns (new states, accepted mask, diverged mask). A divergent
    trajectory counts as a rejection for every row of the batch it
    occurred in.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    P = rng.standard_normal(Q.shape)
    direction = 1 if rng.random() < 0.5 else -1
    h0 = model.energy_batch(Q) + 0.5 * np.sum(P * P, axis=1)
    try:
        Qs, Ps = leapfrog_batch(model, Q, P, cfg.step_size, cfg.n_leapfrog, direction)
    except DivergentTrajectory:
        return Q.copy(), np.zeros(n, bool), np.ones(n, bool)
    h1 = model.energy_batch(Qs) + 0.5 * np.sum(Ps * Ps, axis=1)
    dh = h1 - h0
    diverged = ~np.isfinite(dh) | (np.abs(dh) > DIVERGENCE_THRESHOLD)
    # accept with probability min(1, e^{H - H*})
    accept = (np.log(rng.random(n)) < -dh) & ~diverged
    Qn = np.where(accept[:, None], Qs, Q)
    return Qn, accept, diverged


def adapt_step_size(step_size, running_rate, band, factor=1.02):
    """Multiplicative step-size adaptation, applied between sampling runs
    only: grow when acceptance exceeds the band, shrink below it."""
    lo, hi = band
    if running_rate > hi:
        return step_size * factor
    if running_rate < lo:
        return step_size / factor
    return step_size


def run_cd_negative_phase(model, data_batch, cfg, rng, n_steps=None):
    """Advance one chain per data row by n steps of the model's transition
    operator, starting at that row.

    Uses the model's auxiliary-variable Gibbs sweeps when available,
    otherwise HMC outer steps with ``cfg``. Returns (final states,
    acceptance rate); for Gibbs models the rate is 1. n = 0 returns the
    data unchanged.
    """
    X = np.atleast_2d(np.asarray(data_batch, dtype=float))
    n = cfg.n_outer if n_steps is None else int(n_steps)
    if n == 0:
        return X.copy(), 1.0
    if model.supports_aux_gibbs:
        return model.gibbs_chain(X, n, rng), 1.0
    total, accepted = 0, 0
    for _ in range(n):
        X, acc, _div = hmc_step_batch(model, X, cfg, rng)
        total += acc.size
        accepted += int(acc.sum())
    return X, accepted / total


def run_chain(model, q0, cfg, n_outer, rng):
    """Run a single HMC chain for n_outer steps, returning all states and
    the realised acceptance rate."""
    chain = ChainState(q=np.asarray(q0, dtype=float).copy())
    states = np.empty((n_outer, chain.q.size))
    for t in range(n_outer):
        chain = hmc_step(model, chain, cfg, rng)
        states[t] = chain.q
    return states, chain.acceptance_rate


class _TemperedModel(EnergyModel):
    """Wrap a model so its energy is scaled by 1/T."""

    def __init__(self, base, temperature):
        self.base = base
        self.t = float(temperature)
        self.dim = base.dim
        self.params = base.params

    def energy_batch(self, X):
        return self.base.energy_batch(X) / self.t

    def state_grad_batch(self, X):
        return self.base.state_grad_batch(X) / self.t


def annealed_sample(model, X0, schedule, rng, cfg=None, sweeps_per_temp=1):
    """Approximate equilibrium samples via an annealing schedule.

    ``schedule`` is the list of temperatures, ending at 1. Boltzmann
    machines anneal their Gibbs conditionals; continuous models anneal the
    HMC target. A schedule of length 1 at T = 1 reduces to a plain chain.
    """
    X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    if model.has_stochastic_hiddens:
        return model.annealed_gibbs(X, schedule, rng, sweeps_per_temp)
    cfg = cfg or HmcConfig(step_size=0.05, n_leapfrog=10)
    for t in schedule:
        target = model if t == 1.0 else _TemperedModel(model, t)
        for _ in range(sweeps_per_temp):
            if model.supports_aux_gibbs and t == 1.0:
                X = model.gibbs_chain(X, 1, rng)
            else:
                X, _, _ = hmc_step_batch(target, X, cfg, rng)
    return X
