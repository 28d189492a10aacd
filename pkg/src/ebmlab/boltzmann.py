"""Binary Boltzmann machine with a visible/hidden split.

Energy of a joint configuration:

    E(v, h) = -(v^T J h + 0.5 h^T K h + b_v . v + b_h . h)

with visible-hidden weights J (n_v x n_h) and symmetric, zero-diagonal
lateral weights K (n_h x n_h). Biases are equivalent to weights from an
always-on unit and default to zero. Real-valued inputs in [0, 1] are
consumed directly as means (a rate-based reading of the binary machine).

Learning uses mean-field variational CD: hidden means settle by damped
synchronous sigmoid updates at the data, the negative phase alternates
visible and hidden settles for n steps, and the update contrasts the two
sets of pairwise products.

The module also carries the synthetic stereo input generators and the
retinotopic / difference-of-Gaussians initializers used by the ocular
dominance experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import EnergyModel, _sigmoid

__all__ = [
    "BoltzmannMachine",
    "StereoInputConfig",
    "init_retinotopic_weights",
    "dog_lateral_weights",
    "gen_stereo_patterns",
]


class BoltzmannMachine(EnergyModel):
    """Boltzmann machine with stochastic hidden units.

    ``nonneg_J`` records that the feed-forward weights are constrained to
    be nonnegative (the trainer enforces it by clipping after updates).
    """

    has_stochastic_hiddens = True
    supports_aux_gibbs = True

    def __init__(self, J, K=None, bias_v=None, bias_h=None, nonneg_J=False,
                 grid=None):
        J = np.atleast_2d(np.asarray(J, dtype=float))
        n_v, n_h = J.shape
        if K is None:
            K = np.zeros((n_h, n_h))
        K = np.asarray(K, dtype=float)
        if K.shape != (n_h, n_h):
            raise ValueError("K must be (n_h, n_h)")
        if not np.allclose(K, K.T):
            raise ValueError("K must be symmetric")
        if np.any(np.diag(K) != 0):
            raise ValueError("K must have a zero diagonal (no self-connections)")
        bias_v = np.zeros(n_v) if bias_v is None else np.asarray(bias_v, float)
        bias_h = np.zeros(n_h) if bias_h is None else np.asarray(bias_h, float)
        self.nonneg_J = bool(nonneg_J)
        self.grid = tuple(grid) if grid is not None else None
        super().__init__(
            {"J": J, "K": K, "bias_v": bias_v, "bias_h": bias_h}, dim=n_v)

    @property
    def n_v(self):
        return self.params["J"].shape[0]

    @property
    def n_h(self):
        return self.params["J"].shape[1]

    # -- energies ------------------------------------------------------------
    def joint_energy(self, v, h):
        """E(v, h) for single vectors or batches (rows)."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        h = np.atleast_2d(np.asarray(h, dtype=float))
        if v.shape[1] != self.n_v or h.shape[1] != self.n_h:
            raise ValueError("state dimensions do not match the machine")
        p = self.params
        e = -(np.einsum("ni,ij,nj->n", v, p["J"], h)
              + 0.5 * np.einsum("ni,ij,nj->n", h, p["K"], h)
              + v @ p["bias_v"] + h @ p["bias_h"])
        return e if e.size > 1 else float(e[0])

    def energy_batch(self, X):
        """Mean-field free energy of visible rows (energy surrogate used
        for data-vs-sample diagnostics)."""
        X = self._check_dim(X)
        M, _ = self.mean_field_hidden(X)
        return self.mean_field_free_energy(X, M)

    def mean_field_free_energy(self, V, M):
        """<E>_q - H[q] under the factorised hidden distribution with
        means M (rows pair with rows of V)."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        M = np.atleast_2d(np.asarray(M, dtype=float))
        p = self.params
        expected = -(np.einsum("ni,ij,nj->n", V, p["J"], M)
                     + 0.5 * (np.einsum("ni,ij,nj->n", M, p["K"], M))
                     + V @ p["bias_v"] + M @ p["bias_h"])
        mm = np.clip(M, 1e-12, 1 - 1e-12)
        entropy = -np.sum(mm * np.log(mm) + (1 - mm) * np.log(1 - mm), axis=1)
        return expected - entropy

    # -- mean field ------------------------------------------------------------
    def mean_field_hidden(self, V, damping=0.2, tol=1e-6, max_iter=200, m0=None,
                          asynchronous=False):
        """Damped synchronous settle of hidden means given visibles.

        m <- (1 - damping) * sigmoid(J^T v + K m + b_h) + damping * m

        Returns (means, converged mask). Non-convergence within max_iter
        is flagged, not raised (frustrated lateral weights can cycle).
        Asynchronous (unit-by-unit) updates need no damping and descend
        the mean-field free energy monotonically.
        """
        if not (0.0 <= damping < 1.0):
            raise ValueError("damping must lie in [0, 1)")
        V = self._check_dim(V)
        p = self.params
        drive = V @ p["J"] + p["bias_h"]
        M = np.full((V.shape[0], self.n_h), 0.5) if m0 is None else np.array(m0, float)
        converged = np.zeros(V.shape[0], dtype=bool)
        for _ in range(max_iter):
            if asynchronous:
                new = M.copy()
                for j in range(self.n_h):
                    new[:, j] = _sigmoid(drive[:, j] + new @ p["K"][j])
            else:
                new = (1 - damping) * _sigmoid(drive + M @ p["K"]) + damping * M
            delta = np.max(np.abs(new - M), axis=1)
            M = new
            converged = delta < tol
            if converged.all():
                break
        return M, converged

    def mean_field_visible(self, M):
        """Visible means given hidden means: mu = sigmoid(J m + b_v)."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.n_h:
            raise ValueError("hidden dimension mismatch")
        return _sigmoid(M @ self.params["J"].T + self.params["bias_v"])

    def variational_cd_grads(self, batch, n=1, damping=0.2, tol=1e-6,
                             max_iter=200):
        """Mean-field CD update directions for J and K (and biases).

        Positive phase: <v m^T> and <m m^T> at data-clamped fixed points.
        Negative phase: after n alternating visible/hidden settles. The K
        direction is symmetrised with a zero diagonal. Returns
        (directions dict, all-converged flag).
        """
        if n < 1:
            raise ValueError("need n >= 1 negative-phase steps")
        V = self._check_dim(batch)
        N = V.shape[0]
        M0, conv0 = self.mean_field_hidden(V, damping, tol, max_iter)
        M, conv = M0, conv0
        mu = V
        for _ in range(n):
            mu = self.mean_field_visible(M)
            M, conv = self.mean_field_hidden(mu, damping, tol, max_iter, m0=M)
        dJ = (V.T @ M0 - mu.T @ M) / N
        dK = (M0.T @ M0 - M.T @ M) / N
        dK = 0.5 * (dK + dK.T)
        np.fill_diagonal(dK, 0.0)
        grads = {
            "J": dJ,
            "K": dK,
            "bias_v": (V - mu).mean(axis=0),
            "bias_h": (M0 - M).mean(axis=0),
        }
        return grads, bool(conv0.all() and conv.all())

    # -- Gibbs sampling ----------------------------------------------------------
    def _joint_weights(self):
        p = self.params
        top = np.hstack([np.zeros((self.n_v, self.n_v)), p["J"]])
        bottom = np.hstack([p["J"].T, p["K"]])
        W = np.vstack([top, bottom])
        b = np.concatenate([p["bias_v"], p["bias_h"]])
        return W, b

    def gibbs_joint(self, X0, sweeps, rng, clamp_mask=None, temperature=1.0):
        """Sequential Gibbs over the joint state (v then h unit order).

        X0 rows are full states of length n_v + n_h; clamped units never
        change. Conditionals are p(x_i = 1 | rest) = sigmoid(sum_j x_j
        W_ij + b_i), scaled by 1/temperature when annealing.
        """
        W, b = self._joint_weights()
        X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
        n_units = W.shape[0]
        if X.shape[1] != n_units:
            raise ValueError("joint state must have n_v + n_h entries")
        free = np.arange(n_units)
        if clamp_mask is not None:
            free = free[~np.asarray(clamp_mask, dtype=bool)]
        for _ in range(int(sweeps)):
            for i in free:
                act = _sigmoid((X @ W[i] + b[i]) / temperature)
                X[:, i] = (rng.random(X.shape[0]) < act).astype(float)
        return X

    def gibbs_chain(self, V0, sweeps, rng):
        """Visible-space chain for CD negative phases: settle h ~ p(h|v)
        then alternate v|h, h|v for the requested number of sweeps,
        returning the final binary visible states."""
        V = self._check_dim(V0)
        n = V.shape[0]
        H = self._sample_h_given_v(V, rng)
        for _ in range(int(sweeps)):
            pv = _sigmoid(H @ self.params["J"].T + self.params["bias_v"])
            V = (rng.random((n, self.n_v)) < pv).astype(float)
            H = self._sample_h_given_v(V, rng, h0=H)
        return V

    def _sample_h_given_v(self, V, rng, h0=None, inner_sweeps=5):
        """Sample hiddens given visibles; K != 0 needs short Gibbs runs."""
        p = self.params
        drive = V @ p["J"] + p["bias_h"]
        if not p["K"].any():
            return (rng.random(drive.shape) < _sigmoid(drive)).astype(float)
        H = h0.copy() if h0 is not None else (rng.random(drive.shape) < 0.5).astype(float)
        for _ in range(inner_sweeps):
            for j in range(self.n_h):
                act = _sigmoid(drive[:, j] + H @ p["K"][j])
                H[:, j] = (rng.random(H.shape[0]) < act).astype(float)
        return H

    def annealed_gibbs(self, V0, schedule, rng, sweeps_per_temp=1):
        """Annealed joint Gibbs run returning final visible states."""
        V = self._check_dim(V0)
        H = (rng.random((V.shape[0], self.n_h)) < 0.5).astype(float)
        X = np.hstack([V, H])
        for t in schedule:
            X = self.gibbs_joint(X, sweeps_per_temp, rng, temperature=t)
        return X[:, :self.n_v]

    # -- exact enumeration oracle ---------------------------------------------
    def exact_stats(self):
        """Exact marginals, pairwise expectations and log Z by summing
        over every binary configuration (n_v + n_h <= 20)."""
        n = self.n_v + self.n_h
        if n > 20:
            raise ValueError("enumeration capped at 20 units")
        states = _all_states(n)
        V, H = states[:, :self.n_v], states[:, self.n_v:]
        e = self.joint_energy(V, H)
        e = np.atleast_1d(e)
        emax = -e.max()
        logz = np.log(np.sum(np.exp(-e - emax))) + emax
        prob = np.exp(-e - logz)
        marg = prob @ states
        pair = (states * prob[:, None]).T @ states
        return {"log_z": float(logz), "marginals": marg, "pairwise": pair,
                "prob": prob, "states": states}

    def exact_ml_grads(self, batch):
        """Exact likelihood-gradient directions (-dKL/dtheta) for J and K
        from full enumeration; the oracle against which CD is checked."""
        V = self._check_dim(batch)
        N = V.shape[0]
        pos_J = np.zeros_like(self.params["J"])
        pos_K = np.zeros_like(self.params["K"])
        h_states = _all_states(self.n_h)
        for v in V:
            e = self.joint_energy(np.tile(v, (h_states.shape[0], 1)), h_states)
            e = np.atleast_1d(e)
            w = np.exp(-(e - e.min()))
            w /= w.sum()
            mh = w @ h_states
            pos_J += np.outer(v, mh)
            pos_K += (h_states * w[:, None]).T @ h_states
        pos_J /= N
        pos_K /= N
        stats = self.exact_stats()
        P, S = stats["prob"], stats["states"]
        Vs, Hs = S[:, :self.n_v], S[:, self.n_v:]
        neg_J = (Vs * P[:, None]).T @ Hs
        neg_K = (Hs * P[:, None]).T @ Hs
        dJ = pos_J - neg_J
        dK = pos_K - neg_K
        dK = 0.5 * (dK + dK.T)
        np.fill_diagonal(dK, 0.0)
        return {"J": dJ, "K": dK}

    # -- receptive-field characterisation ----------------------------------------
    def stimulus_triggered_rf(self, patterns, k=200, damping=0.2):
        """Most/least exciting pattern averages per hidden unit.

        Settles the mean field on every pattern, then averages the k
        patterns that maximise / minimise each unit's settled activity.
        Also returns the raw projective fields and, for stereo layouts
        (n_v even, two eyes concatenated), the left-minus-right
        difference.
        """
        P = self._check_dim(patterns)
        if k > P.shape[0]:
            raise ValueError("k exceeds the pattern count")
        M, _ = self.mean_field_hidden(P, damping=damping)
        order = np.argsort(M, axis=0)
        least = np.stack([P[order[:k, j]].mean(axis=0) for j in range(self.n_h)])
        most = np.stack([P[order[-k:, j]].mean(axis=0) for j in range(self.n_h)])
        out = {"most": most, "least": least, "projective": self.params["J"].T.copy()}
        if self.n_v % 2 == 0:
            half = self.n_v // 2
            out["lr_difference"] = self.params["J"][:half] - self.params["J"][half:]
        return out


def _all_states(n):
    bits = np.arange(2**n, dtype=np.int64)
    return ((bits[:, None] >> np.arange(n)[::-1]) & 1).astype(float)


# -- Chapter-5 style input generators and initializers ---------------------------


@dataclass
class StereoInputConfig:
    """Synthetic stereo pattern generator settings.

    Mono patterns are seeded with delta functions and grown by repeated
    convolution with a Gaussian envelope followed by a threshold that
    keeps values in [0, 1]; the second eye is the first translated by a
    rounded draw from N(0, shift_std^2). ``deprive_factor`` scales one
    eye's inputs (monocular deprivation); 1.0 disables it.
    """

    layout: str = "ring"           # "ring" (1-D) or "grid" (2-D)
    n_v: int = 51                  # per eye; grid side length in 2-D
    seeds: int = 4
    envelope_width: float = 1.5
    threshold: float = 0.4
    passes: int = 3
    shift_std: float = 15.0
    deprive_factor: float = 1.0
    deprived_eye: str = "right"

    def __post_init__(self):
        if self.shift_std < 0:
            raise ValueError("shift_std must be >= 0")
        if not (0.0 < self.deprive_factor <= 1.0):
            raise ValueError("deprive_factor must lie in (0, 1]")
        if self.layout not in ("ring", "grid"):
            raise ValueError("layout must be 'ring' or 'grid'")


def _ring_distance(n):
    d = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    return np.minimum(d, n - d)


def _grid_distance(side):
    idx = np.arange(side * side)
    r, c = idx // side, idx % side
    dr = np.abs(r[:, None] - r[None, :])
    dc = np.abs(c[:, None] - c[None, :])
    dr = np.minimum(dr, side - dr)
    dc = np.minimum(dc, side - dc)
    return np.sqrt(dr**2 + dc**2)


def _layout_distance(n_units, layout):
    if layout == "ring":
        return _ring_distance(n_units)
    side = int(round(np.sqrt(n_units)))
    if side * side != n_units:
        raise ValueError("grid layout needs a square unit count")
    return _grid_distance(side)


def init_retinotopic_weights(n_v, n_h, sigma0, s0, noise=0.0, rng=None,
                             layout="ring"):
    """Feed-forward weights as a broad Gaussian bump centred on each
    hidden unit's nominal retinotopic location (one eye). With noise = 0
    repeated calls are identical, so both eyes start the same."""
    if n_v != n_h:
        raise ValueError("retinotopic initializer assumes n_v == n_h")
    d = _layout_distance(n_v, layout)
    J = s0 * np.exp(-d**2 / (2.0 * sigma0**2))
    if noise > 0:
        if rng is None:
            raise ValueError("noise > 0 requires an rng")
        J = J + noise * rng.standard_normal(J.shape)
    return J


def dog_lateral_weights(n_h, sigma1, sigma2, s_m, layout="ring"):
    """Difference-of-Gaussians lateral weights.

    Each unit-area Gaussian is evaluated at the cortical separation; the
    difference G_{sigma2} - G_{sigma1} is rescaled so its peak magnitude
    is s_m, then the self-connection is zeroed. Symmetric by
    construction.
    """
    if sigma1 == sigma2:
        raise ValueError("sigma1 and sigma2 must differ")
    d = _layout_distance(n_h, layout)
    if layout == "ring":
        g1 = np.exp(-d**2 / (2 * sigma1**2)) / (np.sqrt(2 * np.pi) * sigma1)
        g2 = np.exp(-d**2 / (2 * sigma2**2)) / (np.sqrt(2 * np.pi) * sigma2)
    else:
        g1 = np.exp(-d**2 / (2 * sigma1**2)) / (2 * np.pi * sigma1**2)
        g2 = np.exp(-d**2 / (2 * sigma2**2)) / (2 * np.pi * sigma2**2)
    dog = g2 - g1
    peak = np.max(np.abs(dog))
    K = s_m * dog / peak
    np.fill_diagonal(K, 0.0)
    return K


def _gaussian_kernel_1d(width):
    half = max(1, int(np.ceil(3 * width)))
    t = np.arange(-half, half + 1)
    return np.exp(-t**2 / (2.0 * width**2))


def _threshold_unit_range(pattern, threshold):
    """Rescale to peak 1, floor values below the threshold, keep [0, 1]."""
    peak = pattern.max()
    if peak > 0:
        pattern = pattern / peak
    return np.clip((pattern - threshold) / (1.0 - threshold), 0.0, 1.0)


def _grow_pattern_1d(pattern, cfg):
    kernel = _gaussian_kernel_1d(cfg.envelope_width)
    for _ in range(cfg.passes):
        padded = np.concatenate([pattern[-(len(kernel) // 2):], pattern,
                                 pattern[:len(kernel) // 2]])
        pattern = np.convolve(padded, kernel, mode="valid")
        pattern = _threshold_unit_range(pattern, cfg.threshold)
    return pattern


def _grow_pattern_2d(pattern, cfg):
    k = _gaussian_kernel_1d(cfg.envelope_width)
    half = len(k) // 2
    for _ in range(cfg.passes):
        padded = np.pad(pattern, half, mode="wrap")
        # separable convolution, circular boundary
        rows = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 1, padded)
        cols = np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 0, rows)
        pattern = _threshold_unit_range(cols, cfg.threshold)
    return pattern


def gen_stereo_patterns(cfg: StereoInputConfig, count, rng):
    """Batches of (left, right) stereo inputs, concatenated per row.

    Returns an array of shape (count, 2 * n_units). The right eye is the
    mono pattern translated by a rounded Gaussian shift: circular
    boundary on the ring, crop-from-larger-canvas on the grid. A shift
    std of 0 makes both eyes identical.
    """
    if cfg.layout == "ring":
        n_units = cfg.n_v
        out = np.empty((count, 2 * n_units))
        for i in range(count):
            mono = np.zeros(n_units)
            mono[rng.integers(0, n_units, size=cfg.seeds)] = 1.0
            mono = _grow_pattern_1d(mono, cfg)
            shift = int(np.rint(rng.normal(0.0, cfg.shift_std))) if cfg.shift_std else 0
            left = mono
            right = np.roll(mono, shift)
            out[i, :n_units] = left
            out[i, n_units:] = right
    else:
        side = cfg.n_v
        n_units = side * side
        out = np.empty((count, 2 * n_units))
        margin = int(np.ceil(3 * cfg.shift_std)) + 1
        canvas_side = side + 2 * margin
        for i in range(count):
            canvas = np.zeros((canvas_side, canvas_side))
            seeds_r = rng.integers(0, canvas_side, size=cfg.seeds)
            seeds_c = rng.integers(0, canvas_side, size=cfg.seeds)
            canvas[seeds_r, seeds_c] = 1.0
            canvas = _grow_pattern_2d(canvas, cfg)
            shift = int(np.rint(rng.normal(0.0, cfg.shift_std))) if cfg.shift_std else 0
            shift = int(np.clip(shift, -margin, margin))
            left = canvas[margin:margin + side, margin:margin + side]
            right = canvas[margin:margin + side,
                           margin + shift:margin + shift + side]
            out[i, :n_units] = left.ravel()
            out[i, n_units:] = right.ravel()
    if cfg.deprive_factor < 1.0:
        sl = slice(n_units, None) if cfg.deprived_eye == "right" else slice(0, n_units)
        out[:, sl] *= cfg.deprive_factor
    return out
