"""Image ingestion and patch preprocessing.

The stages mirror a retina-like front end: extract small patches at
random image locations, optionally log-transform intensities, remove the
per-pixel dataset mean and the per-patch DC component, then whiten with
PCA or ZCA in conjunction with dimensionality reduction. Stereo training
data comes from laterally shifted patch pairs concatenated per row and
whitened jointly.

Every stage is deterministic given the seed, and provenance tags advance
raw -> centered -> whitened.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "PatchBatch",
    "WhiteningTransform",
    "extract_patches",
    "preprocess",
    "fit_whitener",
    "apply_whitener",
    "invert_whitener",
    "make_stereo_pairs",
    "synthesize_images",
]

_STAGES = ("raw", "centered", "whitened")


@dataclass
class PatchBatch:
    """Row-major matrix of data vectors with patch geometry and a
    provenance stage tag."""

    data: np.ndarray
    height: int
    width: int
    eyes: int = 1
    stage: str = "raw"

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.stage not in _STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def count(self):
        return self.data.shape[0]

    def advanced(self, data, stage):
        if _STAGES.index(stage) < _STAGES.index(self.stage):
            raise ValueError(f"stage cannot move backwards ({self.stage} -> {stage})")
        return replace(self, data=np.asarray(data, dtype=float), stage=stage)


@dataclass
class WhiteningTransform:
    """Linear whitening map fitted to a patch batch.

    ``forward`` maps centered rows into the whitened space (kept_dims x D
    for PCA, D x D of rank kept_dims for ZCA); ``inverse`` is its
    pseudo-inverse back to pixel space. ``mean`` is the per-pixel mean
    removed before projecting.
    """

    forward: np.ndarray
    inverse: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray
    mode: str
    eig_floor: float
    eigenvectors: np.ndarray = field(repr=False, default=None)

    @property
    def kept_dims(self):
        return self.eigenvalues.size

    @property
    def out_dim(self):
        return self.forward.shape[0]


def extract_patches(images, size, count, rng):
    """Extract ``count`` square patches at uniformly random valid
    positions of uniformly random images. Rows are flattened patches."""
    images = [np.asarray(im, dtype=float) for im in images]
    if not images:
        raise ValueError("empty image corpus")
    for im in images:
        if min(im.shape) < size:
            raise ValueError("patch size exceeds an image dimension")
    out = np.empty((count, size * size))
    for i in range(count):
        im = images[rng.integers(0, len(images))]
        r = rng.integers(0, im.shape[0] - size + 1)
        c = rng.integers(0, im.shape[1] - size + 1)
        out[i] = im[r:r + size, c:c + size].ravel()
    return PatchBatch(out, height=size, width=size)


def preprocess(batch: PatchBatch, apply_log=False, pixel_mean=None):
    """Optional log transform, per-pixel dataset mean removal, per-patch
    DC removal.

    The log transform uses log(1 + intensity) so zero pixels are legal.
    Pass a stored ``pixel_mean`` to reuse a training-set mean; otherwise
    the batch's own mean is removed. Returns (batch', pixel_mean).
    Re-applying to already-centered data is a no-op.
    """
    X = batch.data
    if apply_log:
        if np.any(X < 0):
            raise ValueError("log transform requires nonnegative intensities")
        X = np.log1p(X)
    if pixel_mean is None:
        pixel_mean = X.mean(axis=0)
    X = X - pixel_mean
    X = X - X.mean(axis=1, keepdims=True)
    return batch.advanced(X, "centered"), pixel_mean


def fit_whitener(batch: PatchBatch, keep_dims, mode="pca", eig_floor_ratio=1e-10):
    """Eigendecompose the sample covariance and keep the top components.

    Components are scaled by the inverse square root of their eigenvalue
    (the scaling that actually produces unit covariance); ZCA mode then
    rotates back with the eigenvector matrix. Eigenvalues are floored at
    eig_floor_ratio * max to guard the division.
    """
    X = batch.data
    D = X.shape[1]
    if keep_dims > min(X.shape[0] - 1, D):
        raise ValueError("keep_dims exceeds the achievable rank")
    mode = mode.lower()
    if mode not in ("pca", "zca"):
        raise ValueError("mode must be 'pca' or 'zca'")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    floor = eig_floor_ratio * evals[0]
    kept_vals = np.maximum(evals[:keep_dims], floor)
    E = evecs[:, :keep_dims]
    scale = 1.0 / np.sqrt(kept_vals)
    if mode == "pca":
        forward = scale[:, None] * E.T                # (k, D)
        inverse = E * np.sqrt(kept_vals)[None, :]     # (D, k)
    else:
        forward = E @ (scale[:, None] * E.T)          # (D, D), rank k
        inverse = E @ (np.sqrt(kept_vals)[:, None] * E.T)
    return WhiteningTransform(forward=forward, inverse=inverse, mean=mean,
                              eigenvalues=kept_vals, mode=mode,
                              eig_floor=floor, eigenvectors=E)


def apply_whitener(transform: WhiteningTransform, batch):
    """Project rows into the whitened space."""
    X = batch.data if isinstance(batch, PatchBatch) else np.atleast_2d(batch)
    if X.shape[1] != transform.forward.shape[1]:
        raise ValueError("batch geometry does not match the whitener")
    W = (X - transform.mean) @ transform.forward.T
    if isinstance(batch, PatchBatch):
        return batch.advanced(W, "whitened")
    return W


def invert_whitener(transform: WhiteningTransform, data):
    """Map whitened rows back to pixel space (identity on the kept
    subspace)."""
    X = data.data if isinstance(data, PatchBatch) else np.atleast_2d(data)
    if X.shape[1] != transform.inverse.shape[1]:
        raise ValueError("data does not match the whitener output space")
    return X @ transform.inverse.T + transform.mean


def make_stereo_pairs(images, size, shift_std, count, rng):
    """Laterally shifted patch pairs: left at (r, c), right at
    (r, c + delta) with delta a rounded Gaussian draw. The two eyes are
    concatenated per row (left first); whitening happens downstream in
    the joint space."""
    images = [np.asarray(im, dtype=float) for im in images]
    if not images:
        raise ValueError("empty image corpus")
    margin = int(np.ceil(4 * shift_std))
    for im in images:
        if im.shape[0] < size or im.shape[1] < size + 2 * margin:
            raise ValueError("images too small for the patch size and shift margin")
    out = np.empty((count, 2 * size * size))
    for i in range(count):
        im = images[rng.integers(0, len(images))]
        r = rng.integers(0, im.shape[0] - size + 1)
        c = rng.integers(margin, im.shape[1] - size - margin + 1)
        delta = int(np.rint(rng.normal(0.0, shift_std))) if shift_std else 0
        delta = int(np.clip(delta, -margin, margin))
        out[i, :size * size] = im[r:r + size, c:c + size].ravel()
        out[i, size * size:] = im[r:r + size, c + delta:c + delta + size].ravel()
    return PatchBatch(out, height=size, width=size, eyes=2)


def _pink_noise(side, rng, exponent=1.0):
    """Texture field with a 1/f^exponent amplitude spectrum, unit std."""
    f = np.fft.fftfreq(side)
    rad = np.hypot(f[:, None], f[None, :])
    rad[0, 0] = rad.ravel()[1]
    spectrum = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    field = np.fft.ifft2(spectrum / rad**exponent).real
    return (field - field.mean()) / field.std()


def synthesize_images(count, side, rng, max_disks=14, blur_passes=1,
                      texture=0.12):
    """Synthetic occlusion image corpus.

    A few large, high-contrast shaded disks occlude one another over a
    light or dark ground, then a 1/f surface texture is added and the
    result lightly smoothed: long oriented occlusion edges, smooth
    shading, and texture everywhere - the structure natural-image models
    feed on. Used by tests and smoke recipes in place of a digitised
    photograph corpus, which the pipeline accepts through the same
    interface.
    """
    images = []
    yy, xx = np.mgrid[0:side, 0:side]
    for _ in range(count):
        im = np.full((side, side), 0.1 if rng.random() < 0.5 else 0.9)
        n_disks = int(rng.integers(max(max_disks // 2, 1), max_disks + 1))
        for _ in range(n_disks):
            r = 6.0 + (side / 1.8 - 6.0) * rng.random() ** 2
            cy, cx = rng.random(2) * side
            level = (0.08 if rng.random() < 0.5 else 0.92) \
                + 0.06 * rng.standard_normal()
            gdir = rng.standard_normal(2)
            gmag = 0.3 * rng.random() / max(r, 1.0)
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            shade = level + gmag * (gdir[0] * (yy - cy) + gdir[1] * (xx - cx))
            im[mask] = shade[mask]
        if texture:
            im = im + texture * _pink_noise(side, rng)
        for _ in range(blur_passes):
            im = (im + np.roll(im, 1, 0) + np.roll(im, -1, 0)
                  + np.roll(im, 1, 1) + np.roll(im, -1, 1)) / 5.0
        im = np.clip(im, 0.0, 1.0)
        images.append(im)
    return images
