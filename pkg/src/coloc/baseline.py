"""Classical stand-in map generators.

These exist so the pipeline runs end to end without external detectors.
They are smoke-test quality only; reports produced from them are tagged
with provenance ``baseline``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionMismatch, TooFewImages
from .imagery import GrayMap

WORKING_SIZE = 64
SMOOTHING_SIGMA = 2.5
SIGNATURE_BINS = 16
# Amplitudes are floored relative to the spectrum peak; exact spectral zeros
# (e.g. from a clean rectangle) otherwise dominate the residual.
_AMPLITUDE_FLOOR = 1e-4


def _resize(values: np.ndarray, width: int, height: int) -> np.ndarray:
    im = Image.fromarray(values.astype(np.float32), mode="F")
    return np.asarray(im.resize((width, height), Image.BILINEAR), dtype=np.float64)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0.0:
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def spectral_residual_saliency(image: GrayMap) -> GrayMap:
    """Spectral-residual saliency at a 64x64 working scale.

    The log-amplitude spectrum minus its 3x3 local mean is recombined with the
    original phase, inverted, squared, blurred and resized back.
    """
    if np.ptp(image.values) == 0.0:
        return GrayMap(np.zeros(image.shape))
    small = _resize(image.values, WORKING_SIZE, WORKING_SIZE)
    spectrum = np.fft.fft2(small)
    amp = np.abs(spectrum)
    log_amp = np.log(np.maximum(amp, _AMPLITUDE_FLOOR * amp.max()))
    phase = np.angle(spectrum)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    sal = ndimage.gaussian_filter(sal, SMOOTHING_SIGMA)
    sal = _resize(minmax_normalize(sal), image.width, image.height)
    return GrayMap(np.clip(minmax_normalize(sal), 0.0, 1.0))


def histogram_signature(image: GrayMap, bins: int = SIGNATURE_BINS) -> np.ndarray:
    """Normalized intensity histogram (sums to 1)."""
    idx = np.minimum((image.values * bins).astype(np.int64), bins - 1)
    hist = np.bincount(idx.ravel(), minlength=bins).astype(np.float64)
    return hist / hist.sum()


def commonness_weights(signatures: Sequence[np.ndarray]) -> np.ndarray:
    """Mean histogram intersection of each signature with all the others."""
    n = len(signatures)
    if n < 2:
        raise TooFewImages(f"co-saliency needs at least 2 images, got {n}")
    sig = np.asarray(signatures, dtype=np.float64)
    inter = np.minimum(sig[:, None, :], sig[None, :, :]).sum(axis=2)
    np.fill_diagonal(inter, 0.0)
    return inter.sum(axis=1) / (n - 1)


def fuse_cosaliency(maps: Sequence[GrayMap], signatures: Sequence[np.ndarray]) -> list[GrayMap]:
    """Reweight each saliency map by how much its image resembles the group.

    ``C_i = w_i * normalize(S_i)`` with ``w_i`` the commonness weight, so an
    outlier image ends up with a dimmer co-saliency map.
    """
    if len(maps) != len(signatures):
        raise DimensionMismatch(f"{len(maps)} maps but {len(signatures)} signatures")
    weights = commonness_weights(signatures)
    out = []
    for m, w in zip(maps, weights):
        out.append(GrayMap(np.clip(w * minmax_normalize(m.values), 0.0, 1.0)))
    return out
