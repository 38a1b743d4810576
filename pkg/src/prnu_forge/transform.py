"""Numerical transforms: orthonormal DCT, FFT, wavelets, Wiener filters, resizing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pywt
from scipy import fft as sfft
from scipy.ndimage import uniform_filter

from .imgcore import check_image

WAVELET = "db4"  # 8-tap Daubechies QMF
WAVELET_LEVELS = 4
WIENER_WINDOWS = (3, 5, 7, 9)
MASK_MODES = ("triangle", "rectangle")


class ParameterError(ValueError):
    pass


# --------------------------------------------------------------------------- DCT

def dct2(img) -> np.ndarray:
    """Orthonormal 2-D DCT-II."""
    return sfft.dctn(check_image(img), type=2, norm="ortho")


def idct2(coeffs) -> np.ndarray:
    """Inverse of :func:`dct2`. The result is not clamped."""
    return sfft.idctn(np.asarray(coeffs, dtype=np.float64), type=2, norm="ortho")


def compute_alpha(height: int, width: int, eta: float) -> int:
    """Anti-diagonal threshold ``round(eta * min(height, width))``, halves away from zero."""
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    if height < 1 or width < 1:
        raise ParameterError(f"image dimensions must be positive, got {height}x{width}")
    return int(math.floor(eta * min(height, width) + 0.5))


def high_mask(shape: tuple[int, int], alpha: int, mode: str = "triangle") -> np.ndarray:
    """Boolean mask of the coefficients treated as high frequency.

    ``triangle`` selects 0-based positions with ``i + j >= alpha``;
    ``rectangle`` selects ``i >= alpha and j >= alpha``.
    """
    h, w = shape
    if not 0 <= alpha <= min(h, w):
        raise ParameterError(f"alpha must lie in [0, {min(h, w)}], got {alpha}")
    i = np.arange(h)[:, None]
    j = np.arange(w)[None, :]
    if mode == "triangle":
        return (i + j) >= alpha
    if mode == "rectangle":
        return (i >= alpha) & (j >= alpha)
    raise ParameterError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")


@dataclass(frozen=True)
class FreqSplit:
    low: np.ndarray
    high: np.ndarray
    alpha: int


def high_select(coeffs, alpha: int, mode: str = "triangle") -> FreqSplit:
    """Split a DCT plane into disjoint low and high parts with ``low + high == coeffs``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    mask = high_mask(coeffs.shape, alpha, mode)
    high = np.where(mask, coeffs, 0.0)
    low = np.where(mask, 0.0, coeffs)
    return FreqSplit(low=low, high=high, alpha=alpha)


# --------------------------------------------------------------------------- FFT

def fft2(matrix) -> np.ndarray:
    return np.fft.fft2(np.asarray(matrix))


def ifft2(spectrum) -> np.ndarray:
    return np.fft.ifft2(np.asarray(spectrum))


# ----------------------------------------------------------------------- wavelets

def dwt2(img, levels: int = WAVELET_LEVELS, wavelet: str = WAVELET, mode: str = "symmetric"):
    """Multi-level 2-D DWT as a pywt coefficient list ``[cA, (cH, cV, cD), ...]``."""
    img = check_image(img)
    if levels < 1:
        raise ParameterError(f"levels must be >= 1, got {levels}")
    filt = pywt.Wavelet(wavelet).dec_len
    if min(img.shape) < filt:
        raise ParameterError(
            f"image {img.shape} is smaller than the {filt}-tap wavelet support"
        )
    return pywt.wavedec2(img, wavelet, mode=mode, level=levels)


def idwt2(pyramid, shape: tuple[int, int] | None = None, wavelet: str = WAVELET,
          mode: str = "symmetric") -> np.ndarray:
    """Inverse of :func:`dwt2`, cropped to ``shape`` when given."""
    out = pywt.waverec2(pyramid, wavelet, mode=mode)
    if shape is not None:
        out = out[: shape[0], : shape[1]]
    return out


def pyramid_energy(pyramid) -> float:
    total = float(np.sum(pyramid[0] ** 2))
    for details in pyramid[1:]:
        total += sum(float(np.sum(d ** 2)) for d in details)
    return total


# ------------------------------------------------------------------------ Wiener

def wiener_local(subband, noise_variance: float, windows=WIENER_WINDOWS) -> np.ndarray:
    """Locally adaptive Wiener shrinkage of a wavelet subband.

    The signal variance at each coefficient is the smallest of
    ``max(0, mean(x**2) - noise_variance)`` over square windows.
    """
    if noise_variance <= 0:
        raise ParameterError(f"noise_variance must be positive, got {noise_variance}")
    x = np.asarray(subband, dtype=np.float64)
    energy = x * x
    var = None
    for size in windows:
        local = np.maximum(uniform_filter(energy, size, mode="constant") - noise_variance, 0.0)
        var = local if var is None else np.minimum(var, local)
    return x * var / (var + noise_variance)


def wiener_fourier(matrix, sigma: float | None = None) -> np.ndarray:
    """Wiener-shrink the DFT magnitude of ``matrix`` while keeping its phase.

    The magnitude is normalised by ``sqrt(h*w)`` so that, for white input, its
    power matches the spatial variance; ``sigma`` defaults to the sample
    standard deviation of ``matrix``. Suppresses periodic peaks such as
    demosaicing and JPEG grid artefacts.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if sigma is None:
        sigma = float(x.std(ddof=1)) if x.size > 1 else 0.0
    if sigma <= 0:
        return np.zeros_like(x) if not np.any(x) else x.copy()
    h, w = x.shape
    spectrum = np.fft.fft2(x)
    mag = np.abs(spectrum) / math.sqrt(h * w)
    shrunk = wiener_local(mag, sigma * sigma)
    zero = mag == 0
    ratio = np.where(zero, 0.0, shrunk / np.where(zero, 1.0, mag))
    return np.real(np.fft.ifft2(spectrum * ratio))


# ---------------------------------------------------------------------- resizing

def cubic_kernel(x, a: float = -0.5) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(x)
    near = x <= 1
    far = (x > 1) & (x < 2)
    xn, xf = x[near], x[far]
    out[near] = (a + 2) * xn**3 - (a + 3) * xn**2 + 1
    out[far] = a * xf**3 - 5 * a * xf**2 + 8 * a * xf - 4 * a
    return out


def _resize_matrix(n_in: int, n_out: int, a: float) -> np.ndarray:
    # pixel-centre alignment, borders replicated by clamping tap indices
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    frac = src - base
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for k in (-1, 0, 1, 2):
        idx = np.clip(base + k, 0, n_in - 1)
        np.add.at(m, (rows, idx), cubic_kernel(frac - k, a))
    return m


def bicubic_resize(img, new_height: int, new_width: int, a: float = -0.5) -> np.ndarray:
    """Separable Catmull-Rom resize with edge replication; no antialiasing."""
    img = check_image(img)
    if new_height < 1 or new_width < 1:
        raise ParameterError(f"target size must be positive, got {new_height}x{new_width}")
    h, w = img.shape
    if (h, w) == (new_height, new_width):
        return img.copy()
    rows = _resize_matrix(h, new_height, a)
    cols = _resize_matrix(w, new_width, a)
    return rows @ img @ cols.T
