"""Noise-residual extraction and residual enhancement."""
from __future__ import annotations

from typing import Callable

import numpy as np
import pywt
from sklearn.base import BaseEstimator, TransformerMixin

from .imgcore import check_image, check_images
from .transform import WAVELET, WAVELET_LEVELS, ParameterError, dwt2, idwt2, wiener_local

DEFAULT_NOISE_VARIANCE = 9.0
DEFAULT_THRESHOLD = 6.0


def _levels_for(shape, levels: int, wavelet: str) -> int:
    max_level = pywt.dwt_max_level(min(shape), pywt.Wavelet(wavelet).dec_len)
    return max(1, min(levels, max_level))


def extract_residual(img, noise_variance: float = DEFAULT_NOISE_VARIANCE,
                     levels: int = WAVELET_LEVELS, wavelet: str = WAVELET) -> np.ndarray:
    """Return ``img - denoise(img)`` for a wavelet-domain Wiener denoiser.

    Every detail subband is Wiener-shrunk; the approximation band is left
    untouched, so it cancels in the residual. ``levels`` is capped at the
    deepest decomposition the image size supports.
    """
    img = check_image(img)
    coeffs = dwt2(img, _levels_for(img.shape, levels, wavelet), wavelet)
    noise = [np.zeros_like(coeffs[0])]
    for details in coeffs[1:]:
        noise.append(tuple(d - wiener_local(d, noise_variance) for d in details))
    return idwt2(noise, img.shape, wavelet)


def gaussian_attenuation(x, threshold: float) -> np.ndarray:
    """``x * exp(-x**2 / (2 t**2))``: odd, peaks at ``|x| = t``, decays beyond."""
    x = np.asarray(x, dtype=np.float64)
    return x * np.exp(-(x * x) / (2.0 * threshold * threshold))


ENHANCEMENTS: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "gaussian": gaussian_attenuation,
}


def enhance_residual(residual, threshold: float = DEFAULT_THRESHOLD,
                     form: str | Callable = "gaussian",
                     levels: int = WAVELET_LEVELS, wavelet: str = WAVELET) -> np.ndarray:
    """Attenuate strong (scene-driven) components of a residual.

    The map is applied coefficient-wise to every subband of the residual's
    wavelet decomposition and the result is reconstructed.
    """
    if threshold <= 0:
        raise ParameterError(f"threshold must be positive, got {threshold}")
    fn = ENHANCEMENTS[form] if isinstance(form, str) else form
    residual = check_image(residual, "residual")
    coeffs = dwt2(residual, _levels_for(residual.shape, levels, wavelet), wavelet)
    mapped = [fn(coeffs[0], threshold)]
    for details in coeffs[1:]:
        mapped.append(tuple(fn(d, threshold) for d in details))
    return idwt2(mapped, residual.shape, wavelet)


class ResidualExtractor(TransformerMixin, BaseEstimator):
    """Map a sequence of images to their noise residuals.

    Parameters
    ----------
    noise_variance : float
        Wiener noise variance on the 0-255 scale.
    enhance : bool
        Apply :func:`enhance_residual` after extraction.
    threshold : float
        Enhancement threshold, used only when ``enhance`` is set.
    """

    def __init__(self, noise_variance=DEFAULT_NOISE_VARIANCE, levels=WAVELET_LEVELS,
                 enhance=False, threshold=DEFAULT_THRESHOLD):
        self.noise_variance = noise_variance
        self.levels = levels
        self.enhance = enhance
        self.threshold = threshold

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        out = []
        for img in check_images(X):
            r = extract_residual(img, self.noise_variance, self.levels)
            if self.enhance:
                r = enhance_residual(r, self.threshold, levels=self.levels)
            out.append(r)
        return out
