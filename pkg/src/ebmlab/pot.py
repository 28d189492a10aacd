"""Product-of-Student-t density models.

The energy of an input vector x is

    E(x) = sum_i alpha_i log(1 + z_i / 2),   z = W (Jx)^2  (elementwise square)

with filter matrix J (features x inputs) and nonnegative pooling matrix W
(top units x features). The single-layer model is W = identity; fixing W
to 0/1 neighbourhood indicators on a toroidal grid gives the topographic
variant.

Exponentiating -E and normalising makes each top unit a Student-t expert.
Augmenting with one positive precision variable u_i per top unit through

    E(x, u) = sum_i [ u_i (1 + z_i / 2) + (1 - alpha_i) log u_i ]

leaves the x-marginal unchanged and makes both conditionals tractable:
u_i | x is Gamma with shape alpha_i and rate (1 + z_i / 2), and x | u is
a zero-mean Gaussian with covariance (J^T V J)^{-1}, V = diag(W^T u).
Alternating the two conditionals is the fast Gibbs sweep used for CD
negative phases.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, digamma

from .models import EnergyModel

__all__ = [
    "PotModel",
    "build_topographic_pooling",
    "square_log_partition",
    "student_t_log_normalizer",
]


class PotModel(EnergyModel):
    """PoT family: single-layer, hierarchical, topographic and stereo.

    Parameters: J (features x inputs), alpha (per top unit), and W (top
    units x features) when hierarchical. W entries must be nonnegative;
    the single-layer case keeps W = identity and omits it from the
    trainable set.
    """

    supports_aux_gibbs = True

    def __init__(self, J, alpha=1.5, W=None, train_W=False, grid=None):
        J = np.atleast_2d(np.asarray(J, dtype=float))
        m, d = J.shape
        if W is None:
            W = np.eye(m)
            self.hierarchical = False
        else:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            if W.shape[1] != m:
                raise ValueError("W must have one column per filter")
            if np.any(W < 0):
                raise ValueError("W entries must be nonnegative")
            self.hierarchical = True
        n_top = W.shape[0]
        alpha = np.asarray(alpha, dtype=float)
        if alpha.ndim == 0:
            alpha = np.full(n_top, float(alpha))
        if alpha.shape != (n_top,):
            raise ValueError("alpha must be scalar or one value per top unit")
        params = {"J": J, "alpha": alpha}
        if self.hierarchical and train_W:
            params["W"] = W
        else:
            self.W_fixed = W
        self.train_W = bool(train_W)
        self.grid = tuple(grid) if grid is not None else None
        self._pinv_cache = None
        super().__init__(params, dim=d)

    # -- structure ---------------------------------------------------------
    @property
    def J(self):
        return self.params["J"]

    @property
    def alpha(self):
        return self.params["alpha"]

    @property
    def W(self):
        return self.params["W"] if "W" in self.params else self.W_fixed

    @property
    def n_features(self):
        return self.J.shape[0]

    @property
    def n_top(self):
        return self.W.shape[0]

    @property
    def overcomplete(self):
        return self.n_features > self.dim

    def invalidate_caches(self):
        """Call after mutating J (the trainer does this per update)."""
        self._pinv_cache = None

    def _pinv(self):
        if self._pinv_cache is None:
            J = self.J
            if J.shape[0] == J.shape[1]:
                self._pinv_cache = np.linalg.inv(J)
            else:
                JtJ = J.T @ J
                cond = np.linalg.cond(JtJ)
                if not np.isfinite(cond) or cond > 1e12:
                    raise np.linalg.LinAlgError(
                        "rank-deficient J^T J; cannot form the pseudo-inverse")
                self._pinv_cache = np.linalg.solve(JtJ, J.T)
        return self._pinv_cache

    # -- deterministic features ---------------------------------------------
    def features(self, X):
        """(y, z) for each row: y = Jx, z = W y^2."""
        X = self._check_dim(X)
        Y = X @ self.J.T
        Z = Y**2 @ self.W.T
        return Y, Z

    def energy_batch(self, X):
        _, Z = self.features(X)
        return np.log1p(0.5 * Z) @ self.alpha

    def state_grad_batch(self, X):
        X = self._check_dim(X)
        Y = X @ self.J.T
        Z = Y**2 @ self.W.T
        G = self.alpha / (1.0 + 0.5 * Z)          # (N, n_top)
        return ((G @ self.W) * Y) @ self.J

    def param_grads_batch(self, X):
        X = self._check_dim(X)
        Y = X @ self.J.T
        Z = Y**2 @ self.W.T
        G = self.alpha / (1.0 + 0.5 * Z)
        coef = (G @ self.W) * Y
        grads = {
            "J": coef.T @ X,
            "alpha": np.log1p(0.5 * Z).sum(axis=0),
        }
        if "W" in self.params:
            grads["W"] = 0.5 * G.T @ Y**2
        return grads

    # -- auxiliary-variable conditionals -------------------------------------
    def sample_u_given_x(self, X, rng):
        """Draw the precision variables: u_i ~ Gamma(alpha_i, rate 1 + z_i/2)."""
        _, Z = self.features(X)
        rate = 1.0 + 0.5 * Z
        return rng.gamma(shape=self.alpha, scale=1.0 / rate)

    def sample_x_given_u(self, U, rng):
        """Draw x | u = Jinv V^{-1/2} n with V = diag(W^T u), n ~ N(0, I).

        The complete case uses the exact inverse of J; overcomplete models
        use the fixed pseudo-inverse (J^T J)^{-1} J^T, recomputed once per
        parameter update.
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if np.any(U <= 0):
            raise ValueError("precision variables must be positive")
        V = U @ self.W                              # (N, n_features)
        noise = rng.standard_normal(V.shape)
        return (noise / np.sqrt(V)) @ self._pinv().T

    def gibbs_chain(self, X, sweeps, rng):
        """Alternate u- and x-sweeps, one chain per row of X."""
        X = self._check_dim(X).copy()
        for _ in range(int(sweeps)):
            U = self.sample_u_given_x(X, rng)
            X = self.sample_x_given_u(U, rng)
        return X

    def cd1_grads(self, data_batch, rng):
        """One-step CD gradients: (-pos + neg)/N for J, alpha (and W when
        trainable). The negative phase is one u-sweep then one x-sweep
        started at each datum."""
        X = self._check_dim(data_batch)
        if X.shape[0] == 0:
            raise ValueError("empty batch")
        pos = self.param_grads_batch(X)
        samples = self.gibbs_chain(X, 1, rng)
        neg = self.param_grads_batch(samples)
        n = X.shape[0]
        return {k: (neg[k] - pos[k]) / n for k in pos}, samples

    # -- square-model exact quantities ---------------------------------------
    def log_partition(self):
        return square_log_partition(self.J, self.alpha, self.W)

    def log_partition_param_grads(self):
        if self.overcomplete or self.hierarchical:
            raise NotImplementedError(
                "closed-form partition function requires a square single-layer model")
        J = self.J
        return {
            "J": -np.linalg.inv(J).T,
            "alpha": digamma(self.alpha - 0.5) - digamma(self.alpha),
        }

    # -- divisive normalization ----------------------------------------------
    def divisive_normalize(self, X):
        """Rescale filter outputs by pooled neighbourhood activity:
        y*_i = y_i * sum_j W_ji (alpha_j - 1) / (1 + z_j / 2)."""
        Y, Z = self.features(X)
        gain = ((self.alpha - 1.0) / (1.0 + 0.5 * Z)) @ self.W
        return Y * gain


def student_t_log_normalizer(alpha):
    """log C(alpha) with C(alpha) = integral of (1 + t^2/2)^(-alpha) dt
    = sqrt(2 pi) Gamma(alpha - 1/2) / Gamma(alpha); requires alpha > 1/2."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0.5):
        raise ValueError("normalizer requires alpha > 1/2")
    return 0.5 * np.log(2 * np.pi) + gammaln(alpha - 0.5) - gammaln(alpha)


def square_log_partition(J, alpha, W=None):
    """log Z of a square single-layer PoT:
    log Z = -log|det J| + sum_i log C(alpha_i)."""
    J = np.asarray(J, dtype=float)
    if J.shape[0] != J.shape[1]:
        raise ValueError("partition function unsupported for overcomplete models")
    if W is not None and not np.allclose(W, np.eye(J.shape[0])):
        raise ValueError("partition function requires W = identity")
    sign, logdet = np.linalg.slogdet(J)
    if sign == 0:
        raise np.linalg.LinAlgError("singular filter matrix")
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (J.shape[0],))
    return float(-logdet + np.sum(student_t_log_normalizer(alpha)))


def build_topographic_pooling(grid_rows, grid_cols, neighborhood="square:3"):
    """Fixed 0/1 pooling matrix for a toroidal grid of filters.

    ``neighborhood`` is "square:k" (k x k window, k odd) or "manhattan:r"
    (Manhattan radius r). Each top unit pools the filters inside its
    neighbourhood; radius 0 / k = 1 gives the identity.
    """
    kind, _, size = neighborhood.partition(":")
    size = int(size)
    n = grid_rows * grid_cols
    rows = np.arange(n) // grid_cols
    cols = np.arange(n) % grid_cols
    dr = np.abs(rows[:, None] - rows[None, :])
    dc = np.abs(cols[:, None] - cols[None, :])
    dr = np.minimum(dr, grid_rows - dr)
    dc = np.minimum(dc, grid_cols - dc)
    if kind == "square":
        if size % 2 != 1 or size < 1:
            raise ValueError("square window size must be odd and >= 1")
        half = size // 2
        if size > min(grid_rows, grid_cols):
            raise ValueError("neighborhood larger than the grid")
        mask = (dr <= half) & (dc <= half)
    elif kind == "manhattan":
        if size < 0:
            raise ValueError("radius must be >= 0")
        if 2 * size + 1 > min(grid_rows, grid_cols):
            raise ValueError("neighborhood larger than the grid")
        mask = (dr + dc) <= size
    else:
        raise ValueError(f"unknown neighborhood shape {kind!r}")
    return mask.astype(float)
