"""Energy-model contract and the sigmoid-net reference models.

An energy model assigns a scalar energy E(x) to every state vector x and
defines the unnormalized density e^{-E(x)}. Every model family implements
the same small surface: energy, gradient of the energy with respect to the
state (needed by Hamiltonian samplers), and gradients with respect to each
parameter (needed by contrastive-divergence training). All arithmetic is
float64.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "EnergyModel",
    "SigmoidNetEnergy",
    "BssIcaEnergy",
    "QuadraticEnergy",
    "finite_diff_state_grad",
    "finite_diff_param_grads",
]


def _sigmoid(t):
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


class EnergyModel:
    """Abstract contract shared by every model family.

    Parameters live in ``self.params``, a dict of float64 arrays keyed by
    name. Models are immutable during evaluation; mutation happens only at
    batch boundaries under exclusive access.

    Capability flags:

    ``supports_aux_gibbs``
        the model provides ``gibbs_chain`` (auxiliary-variable sweeps).
    ``has_stochastic_hiddens``
        the model exposes free-energy surrogate gradients instead of a
        state gradient (Boltzmann machines); such models cannot be driven
        by HMC.
    """

    supports_aux_gibbs = False
    has_stochastic_hiddens = False

    def __init__(self, params: dict[str, np.ndarray], dim: int):
        self.params = {k: np.asarray(v, dtype=float) for k, v in params.items()}
        self.dim = int(dim)

    # -- required surface -------------------------------------------------
    def energy(self, x: np.ndarray) -> float:
        """Scalar energy of a single state vector."""
        return float(self.energy_batch(np.asarray(x, dtype=float)[None, :])[0])

    def energy_batch(self, X: np.ndarray) -> np.ndarray:
        """Energies of a (rows, dim) batch."""
        raise NotImplementedError

    def state_grad(self, x: np.ndarray) -> np.ndarray:
        return self.state_grad_batch(np.asarray(x, dtype=float)[None, :])[0]

    def state_grad_batch(self, X: np.ndarray) -> np.ndarray:
        """dE/dx for each row of X, same shape as X."""
        raise NotImplementedError

    def param_grads(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return self.param_grads_batch(np.asarray(x, dtype=float)[None, :])

    def param_grads_batch(self, X: np.ndarray) -> dict[str, np.ndarray]:
        """dE/dtheta summed over the rows of X, one array per parameter."""
        raise NotImplementedError

    # -- optional surface --------------------------------------------------
    def log_partition_param_grads(self) -> dict[str, np.ndarray]:
        """d(log Z)/dtheta where available (square models only)."""
        raise NotImplementedError("model has no tractable partition function")

    def gibbs_chain(self, X: np.ndarray, sweeps: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError("model has no Gibbs sampler")

    def _check_dim(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(
                f"state dimension {X.shape[1]} does not match model dimension {self.dim}"
            )
        return X


class SigmoidNetEnergy(EnergyModel):
    """Single layer of sigmoid units with per-unit energy weights.

    s_i = sigmoid(J_i . x + b_i) and E(x) = sum_i a_i s_i. Parameters are
    the filter matrix ``J`` (units, inputs), bias ``b`` and energy weight
    ``a`` (both per unit).
    """

    def __init__(self, J: np.ndarray, b: np.ndarray, a: np.ndarray):
        J = np.asarray(J, dtype=float)
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        if J.ndim != 2 or b.shape != (J.shape[0],) or a.shape != (J.shape[0],):
            raise ValueError("J, b, a shapes inconsistent with the unit count")
        super().__init__({"J": J, "b": b, "a": a}, dim=J.shape[1])

    @property
    def n_units(self) -> int:
        return self.params["J"].shape[0]

    def _activations(self, X):
        return _sigmoid(X @ self.params["J"].T + self.params["b"])

    def energy_batch(self, X):
        X = self._check_dim(X)
        return self._activations(X) @ self.params["a"]

    def state_grad_batch(self, X):
        X = self._check_dim(X)
        s = self._activations(X)
        return (self.params["a"] * s * (1.0 - s)) @ self.params["J"]

    def param_grads_batch(self, X):
        X = self._check_dim(X)
        s = self._activations(X)
        ds = self.params["a"] * s * (1.0 - s)
        return {"J": ds.T @ X, "b": ds.sum(axis=0), "a": s.sum(axis=0)}


class BssIcaEnergy(EnergyModel):
    """Complete sigmoid-net variant whose energies make it a noiseless
    ICA model with logistic source priors.

    s_i = sigmoid(J_i . x), E(x) = sum_i -log((1 - s_i) s_i). The square
    filter matrix J plays the role of the unmixing matrix, and the
    partition function is |det J|^{-1} up to a constant, so exact maximum
    likelihood training is available alongside sampled negative phases.
    """

    def __init__(self, J: np.ndarray):
        J = np.asarray(J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("BSS model requires a square filter matrix")
        super().__init__({"J": J}, dim=J.shape[1])

    def energy_batch(self, X):
        X = self._check_dim(X)
        Y = X @ self.params["J"].T
        # -log(sigma(y)(1-sigma(y))) = y + 2 log(1 + e^{-y}), stable form
        return np.sum(np.abs(Y) + 2.0 * np.log1p(np.exp(-np.abs(Y))), axis=1)

    def state_grad_batch(self, X):
        X = self._check_dim(X)
        Y = X @ self.params["J"].T
        return (2.0 * _sigmoid(Y) - 1.0) @ self.params["J"]

    def param_grads_batch(self, X):
        X = self._check_dim(X)
        Y = X @ self.params["J"].T
        return {"J": (2.0 * _sigmoid(Y) - 1.0).T @ X}

    def log_partition_param_grads(self):
        J = self.params["J"]
        return {"J": -np.linalg.inv(J).T}


class QuadraticEnergy(EnergyModel):
    """Gaussian energy E(x) = 0.5 x^T A x for a symmetric PD matrix A."""

    def __init__(self, A: np.ndarray):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__({"A": 0.5 * (A + A.T)}, dim=A.shape[0])

    def energy_batch(self, X):
        X = self._check_dim(X)
        return 0.5 * np.einsum("ni,ij,nj->n", X, self.params["A"], X)

    def state_grad_batch(self, X):
        X = self._check_dim(X)
        return X @ self.params["A"]

    def param_grads_batch(self, X):
        X = self._check_dim(X)
        return {"A": 0.5 * X.T @ X}


def finite_diff_state_grad(model: EnergyModel, x: np.ndarray, h: float | None = None):
    """Central-difference state gradient, the oracle for state_grad."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))))
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (model.energy(xp) - model.energy(xm)) / (2 * h)
    return g


def finite_diff_param_grads(model: EnergyModel, x: np.ndarray, h: float | None = None):
    """Central-difference parameter gradients, the oracle for param_grads."""
    grads = {}
    for name, value in model.params.items():
        step = h if h is not None else 1e-6 * max(1.0, float(np.max(np.abs(value))))
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            ep = model.energy(x)
            flat[i] = orig - step
            em = model.energy(x)
            flat[i] = orig
            gflat[i] = (ep - em) / (2 * step)
        grads[name] = g
    return grads
