"""Receptive-field and map characterisation measures.

Covers the permutation/scale-invariant matrix mismatch used to score
source recovery, PSNR, ocularity and disparity measures for stereo
filters, topographic map continuity statistics, grating/Gabor tuning
curves, and Hartigan's dip statistic for bimodality testing.
"""

from __future__ import annotations

import numpy as np

from .gabor import GaborFit, fit_gabor, gabor_kernel

__all__ = [
    "amari_distance",
    "amari_index",
    "psnr",
    "ocularity",
    "disparity_measures",
    "circular_difference",
    "map_report",
    "neighbor_continuity",
    "tuning_curve",
    "dip_statistic",
    "dip_test",
    "ocularity_band_stats",
    "fit_filter_set",
    "mosaic",
]


# -- matrix and signal measures -------------------------------------------------

def amari_distance(A, B):
    """Permutation- and scale-invariant mismatch between square matrices.

    With C = |A B^{-1}| row-rescaled to unit maximum:

        sum_i (sum_j C_ij / max_k C_ik - 1)
      + sum_j (sum_i C_ij / max_k C_kj - 1)

    Zero iff A B^{-1} is a scaled permutation. The row rescaling makes the
    measure exactly invariant under left multiplication of A by any
    permutation and nonsingular diagonal matrix (the raw cross-talk sums
    alone are only approximately so).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrices must be square and of equal size")
    C = np.abs(A @ np.linalg.inv(B))
    C = C / C.max(axis=1, keepdims=True)
    row = (C.sum(axis=1) / C.max(axis=1) - 1.0).sum()
    col = (C.sum(axis=0) / C.max(axis=0) - 1.0).sum()
    return float(row + col)


def amari_index(A, B):
    """amari_distance scaled by 2 N (N - 1) into [0, 1]; size-comparable."""
    n = np.asarray(A).shape[0]
    return amari_distance(A, B) / (2.0 * n * (n - 1))


def psnr(reference, probe, s_max):
    """10 log10(s_max^2 / MSE) in dB. Identical images are signalled."""
    reference = np.asarray(reference, dtype=float)
    probe = np.asarray(probe, dtype=float)
    if reference.shape != probe.shape:
        raise ValueError("geometry mismatch")
    mse = float(np.mean((reference - probe) ** 2))
    if mse == 0:
        raise ValueError("identical signals: PSNR is infinite")
    return 10.0 * np.log10(s_max**2 / mse)


def ocularity(J_left, J_right):
    """Per-unit summed absolute left-eye weight minus right-eye weight."""
    J_left = np.atleast_2d(np.asarray(J_left, dtype=float))
    J_right = np.atleast_2d(np.asarray(J_right, dtype=float))
    if J_left.shape != J_right.shape:
        raise ValueError("eye weight shapes must match")
    return np.abs(J_left).sum(axis=1) - np.abs(J_right).sum(axis=1)


def circular_difference(a, b, period=np.pi):
    """Shortest-arc difference between angles of the given period."""
    d = (np.asarray(a) - np.asarray(b)) % period
    return np.minimum(d, period - d)


def disparity_measures(fit_left: GaborFit, fit_right: GaborFit):
    """(d_phase, d_phase_shift, d_position) between the two eye fits.

    d_phase is the phase offset reported modulo pi (shortest arc);
    d_phase_shift converts phase to a lateral shift in pixels through the
    carrier frequency, projected by the mean orientation; d_position is
    the envelope center offset.
    """
    for f in (fit_left, fit_right):
        if not f.good:
            raise ValueError("disparity measures need valid fits for both eyes")
    raw = fit_left.phase - fit_right.phase
    d_phase = ((raw + np.pi / 2) % np.pi) - np.pi / 2
    if d_phase == -np.pi / 2:  # report the half-open interval (-pi/2, pi/2]
        d_phase = np.pi / 2
    d_phase_shift = (
        fit_left.phase / (2 * np.pi * fit_left.frequency)
        - fit_right.phase / (2 * np.pi * fit_right.frequency)
    ) * np.cos(0.5 * (fit_left.orientation + fit_right.orientation))
    d_position = fit_left.center_x - fit_right.center_x
    return float(d_phase), float(d_phase_shift), float(d_position)


# -- topographic map reports -----------------------------------------------------

def fit_filter_set(filters_pixel, shape):
    """Fit a Gabor to each row rendered as a ``shape`` image. Degenerate
    filters yield a failed fit rather than an exception."""
    fits = []
    for row in np.atleast_2d(filters_pixel):
        img = row.reshape(shape)
        try:
            fits.append(fit_gabor(img))
        except ValueError:
            fits.append(GaborFit(0, 0, 0, 1e-3, 0, 1, 1, 0, np.inf, False))
    return fits


def _torus_neighbor_pairs(rows, cols):
    pairs = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            pairs.append((i, r * cols + (c + 1) % cols))
            pairs.append((i, ((r + 1) % rows) * cols + c))
    return np.asarray(pairs)


def neighbor_continuity(values, rows, cols, period=None, mask=None, rng=None,
                        n_shuffle=200):
    """Mean absolute (circular) difference between torus neighbours,
    compared with shuffled pairings.

    Returns (neighbor statistic, shuffled-null statistic). A ratio well
    below 1 means strong local continuity; identical values give 0.
    """
    values = np.asarray(values, dtype=float)
    if values.size != rows * cols:
        raise ValueError("value grid does not match the layout")
    if mask is None:
        mask = np.ones(values.size, dtype=bool)
    pairs = _torus_neighbor_pairs(rows, cols)
    keep = mask[pairs[:, 0]] & mask[pairs[:, 1]]
    pairs = pairs[keep]
    if pairs.size == 0:
        raise ValueError("no valid neighbour pairs")

    def stat(idx_a, idx_b):
        if period is None:
            return float(np.mean(np.abs(values[idx_a] - values[idx_b])))
        return float(np.mean(circular_difference(values[idx_a], values[idx_b], period)))

    neighbor = stat(pairs[:, 0], pairs[:, 1])
    rng = rng or np.random.default_rng(0)
    valid = np.flatnonzero(mask)
    null = []
    for _ in range(n_shuffle):
        a = rng.choice(valid, size=pairs.shape[0])
        b = rng.choice(valid, size=pairs.shape[0])
        ok = a != b
        null.append(stat(a[ok], b[ok]))
    return neighbor, float(np.mean(null))


def map_report(model, whitener=None, rng=None):
    """Per-unit Gabor-parameter grids for a topographic model.

    Returns dict with the fits, per-property grids (center x/y,
    orientation, phase, log frequency), a validity mask, and per-property
    (neighbor, null) continuity statistics. Cells with failed fits are
    masked out of the statistics.
    """
    if model.grid is None:
        raise ValueError("model has no grid layout")
    rows, cols = model.grid
    J = model.J
    if whitener is not None:
        pix = J @ whitener.forward
        shape = (int(np.sqrt(pix.shape[1])),) * 2
    else:
        pix = J
        shape = (int(np.sqrt(J.shape[1])),) * 2
    fits = fit_filter_set(pix, shape)
    mask = np.array([f.good for f in fits])
    grids = {
        "center_x": np.array([f.center_x for f in fits]),
        "center_y": np.array([f.center_y for f in fits]),
        "orientation": np.array([f.orientation for f in fits]),
        "phase": np.array([f.phase for f in fits]),
        "log_frequency": np.array([np.log(f.frequency) for f in fits]),
    }
    periods = {"orientation": np.pi, "phase": 2 * np.pi}
    continuity = {}
    for name, vals in grids.items():
        try:
            continuity[name] = neighbor_continuity(
                vals, rows, cols, period=periods.get(name), mask=mask, rng=rng)
        except ValueError:  # too few valid fits to pair up
            continuity[name] = (np.nan, np.nan)
    return {"fits": fits, "grids": grids, "mask": mask, "continuity": continuity}


# -- tuning curves ----------------------------------------------------------------

def _grating(shape, orientation, frequency, phase):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    u = xx * np.cos(orientation) + yy * np.sin(orientation)
    return np.cos(2 * np.pi * frequency * u - phase)


def _unit_response(model, unit, stimuli, whitener, layer):
    X = np.stack([s.ravel() for s in stimuli])
    if whitener is not None:
        X = (X - whitener.mean) @ whitener.forward.T
    Y, Z = model.features(X)
    return np.abs(Y[:, unit]) if layer == 1 else Z[:, unit]


def _optimal_grating(model, unit, shape, whitener, layer):
    thetas = np.linspace(0, np.pi, 12, endpoint=False)
    freqs = np.geomspace(0.03, 0.45, 10)
    phases = np.linspace(-np.pi, np.pi, 8, endpoint=False)
    best, best_r = None, -np.inf
    for th in thetas:
        stim = [_grating(shape, th, f, ph) for f in freqs for ph in phases]
        r = _unit_response(model, unit, stim, whitener, layer)
        i = int(np.argmax(r))
        if r[i] > best_r:
            best_r = r[i]
            best = (th, freqs[i // len(phases)], phases[i % len(phases)])
    return best


def tuning_curve(model, unit, family, param_grid, shape, whitener=None, layer=1):
    """Normalised response curve of one unit to a probed stimulus family.

    ``family`` is one of "grating-phase", "grating-orientation",
    "grating-frequency", "gabor-location". The optimal grating is found
    first, then the probed parameter sweeps ``param_grid``. Responses are
    |y| for layer 1 and z for layer 2, normalised so the maximum is 1
    (an always-zero unit yields a flat zero curve).
    """
    base = _optimal_grating(model, unit, shape, whitener, layer)
    th, fr, ph = base
    stimuli = []
    for val in param_grid:
        if family == "grating-phase":
            stimuli.append(_grating(shape, th, fr, val))
        elif family == "grating-orientation":
            stimuli.append(_grating(shape, val, fr, ph))
        elif family == "grating-frequency":
            stimuli.append(_grating(shape, th, val, ph))
        elif family == "gabor-location":
            stimuli.append(gabor_kernel(shape, val, shape[0] / 2.0, th, fr, ph,
                                        sigma_w=2.0, sigma_l=2.0))
        else:
            raise ValueError(f"unknown stimulus family {family!r}")
    r = _unit_response(model, unit, stimuli, whitener, layer)
    peak = r.max()
    return r / peak if peak > 0 else r


# -- bimodality (dip) test ----------------------------------------------------------

def _prefix_convex_deviations(x, F):
    """d[m] = sup over i <= m of F_i minus the greatest convex minorant of
    the points (x_i, F_i) restricted to [0, m], for every prefix end m.

    Incremental convex hull; each hull segment carries its own max
    deviation so the running supremum survives pops.
    """
    n = x.size
    hull = [0]
    seg_dev = []          # deviation attributed to each hull segment
    d = np.zeros(n)
    for m in range(1, n):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # pop b when it sits on or above the chord a -> m
            if (F[b] - F[a]) * (x[m] - x[a]) >= (F[m] - F[a]) * (x[b] - x[a]):
                hull.pop()
                seg_dev.pop()
            else:
                break
        a = hull[-1]
        if x[m] > x[a]:
            idx = np.arange(a + 1, m)
            line = F[a] + (F[m] - F[a]) * (x[idx] - x[a]) / (x[m] - x[a])
            dev = float(np.max(F[idx] - line)) if idx.size else 0.0
        else:
            dev = float(np.max(F[a:m] - F[a])) if m > a else 0.0
        hull.append(m)
        seg_dev.append(max(dev, 0.0))
        d[m] = max(seg_dev)
    return d


def dip_statistic(samples):
    """Dip-style departure from unimodality.

    For every candidate mode position m the empirical CDF is compared
    with the nearest CDF that is convex up to m and concave beyond it
    (half the larger of the two sup deviations); the statistic is the
    minimum over mode positions. Zero for perfectly unimodal step
    patterns, large for well-separated modes. Calibrate p-values by
    Monte Carlo under a uniform null (dip_test does this).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 samples")
    if x[0] == x[-1]:
        return 0.0
    F = (np.arange(n) + 0.5) / n
    d_left = _prefix_convex_deviations(x, F)
    # concave deviations on suffixes = convex deviations of the reversed,
    # negated sequence
    d_right = _prefix_convex_deviations(-x[::-1], -F[::-1])[::-1]
    per_mode = np.maximum(d_left, d_right)
    return float(0.5 * per_mode.min())


def dip_test(samples, rng=None, n_boot=500):
    """Dip statistic with a bootstrap p-value under a uniform null.

    Small p rejects unimodality. The uniform reference is the standard
    calibration for the dip.
    """
    samples = np.asarray(samples, dtype=float)
    d = dip_statistic(samples)
    rng = rng or np.random.default_rng(0)
    boots = np.array([dip_statistic(rng.random(samples.size)) for _ in range(n_boot)])
    p = float(np.mean(boots >= d))
    return d, p


# -- ocular dominance summaries ------------------------------------------------------

def ocularity_band_stats(signed_ocularity):
    """(sign changes, mean band width) of the signed per-unit ocularity
    sequence along a ring."""
    s = np.sign(np.asarray(signed_ocularity, dtype=float))
    s = s[s != 0]
    if s.size == 0:
        return 0, 0.0
    changes = int(np.sum(s[1:] != s[:-1]))
    # band widths = run lengths
    runs, current = [], 1
    for i in range(1, s.size):
        if s[i] == s[i - 1]:
            current += 1
        else:
            runs.append(current)
            current = 1
    runs.append(current)
    return changes, float(np.mean(runs))


def mosaic(filters_pixel, shape, order=None, pad=1, normalize=True):
    """Tile filter rows (rendered as ``shape`` images) into one image,
    optionally in a given order (e.g. sorted by fit orientation)."""
    F = np.atleast_2d(np.asarray(filters_pixel, dtype=float))
    if order is not None:
        F = F[np.asarray(order)]
    n = F.shape[0]
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    h, w = shape
    out = np.zeros((rows * (h + pad) + pad, cols * (w + pad) + pad))
    for i in range(n):
        img = F[i].reshape(shape)
        if normalize:
            peak = np.max(np.abs(img))
            img = 0.5 + 0.5 * img / peak if peak > 0 else np.full(shape, 0.5)
        r, c = divmod(i, cols)
        out[pad + r * (h + pad): pad + r * (h + pad) + h,
            pad + c * (w + pad): pad + c * (w + pad) + w] = img
    return out
