"""DCT-domain sensor anonymization and spoofing, plus reference-based baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .identify import center_crop
from .imgcore import ShapeError, check_image, check_images, check_same_shape, load_image
from .prnu import ReferencePattern
from .transform import (
    ParameterError,
    bicubic_resize,
    compute_alpha,
    dct2,
    high_select,
    idct2,
)

DEFAULT_ANON_ETA = 0.9
DEFAULT_SPOOF_ETA = 0.7


def low_band(img, eta: float, mask: str = "triangle") -> np.ndarray:
    """DCT coefficients of ``img`` with the high band zeroed."""
    img = check_image(img)
    alpha = compute_alpha(*img.shape, eta)
    return high_select(dct2(img), alpha, mask).low


def anonymize(img, eta: float = DEFAULT_ANON_ETA, mask: str = "triangle") -> np.ndarray:
    """Suppress the high-frequency DCT band that carries the sensor pattern.

    Coefficients at ``i + j >= round(eta * min(h, w))`` are zeroed and the
    image is reconstructed. The output is not clamped.
    """
    return idct2(low_band(img, eta, mask))


def average_high_field(candidates: Sequence, eta: float = DEFAULT_SPOOF_ETA,
                       mask: str = "triangle") -> np.ndarray:
    """Pixel-domain mean of the candidates' high-band reconstructions (before resizing)."""
    cands = check_images(candidates, "candidate")
    if not cands:
        raise ParameterError("at least one candidate image is required")
    p, q = check_same_shape(cands, "candidate images")
    alpha = compute_alpha(p, q, eta)
    total = np.zeros((p, q))
    for g in cands:
        total += idct2(high_select(dct2(g), alpha, mask).high)
    return total / len(cands)


def target_high_field(candidates: Sequence, eta: float, out_height: int, out_width: int,
                      mask: str = "triangle") -> np.ndarray:
    """Averaged target-sensor high band, resized to ``out_height x out_width``."""
    return bicubic_resize(average_high_field(candidates, eta, mask), out_height, out_width)


def spoof_with_field(img, field: np.ndarray, eta: float = DEFAULT_SPOOF_ETA,
                     mask: str = "triangle") -> np.ndarray:
    """Replace the high band of ``img`` by a precomputed (unresized) target field.

    The resized field is added as is. When candidate and source sizes
    differ, its leakage into low frequencies adds onto the kept low band.
    """
    img = check_image(img)
    t_high = bicubic_resize(field, *img.shape)
    return idct2(dct2(t_high) + low_band(img, eta, mask))


def spoof(img, candidates: Sequence, eta: float = DEFAULT_SPOOF_ETA,
          mask: str = "triangle") -> np.ndarray:
    """Give ``img`` the high-frequency traces of the sensor that shot ``candidates``."""
    return spoof_with_field(img, average_high_field(candidates, eta, mask), eta, mask)


@dataclass(frozen=True)
class SpoofConfig:
    eta: float
    candidate_paths: tuple[str, ...]

    def __post_init__(self):
        if not self.candidate_paths:
            raise ParameterError("spoof config needs at least one candidate path")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")

    def load_candidates(self) -> list[np.ndarray]:
        return [load_image(p) for p in self.candidate_paths]


def spoof_from_config(img, config: SpoofConfig, mask: str = "triangle") -> np.ndarray:
    return spoof(img, config.load_candidates(), config.eta, mask)


# ------------------------------------------------------------------ baselines

def _fit_ref(ref, shape) -> np.ndarray:
    values = ref.values if isinstance(ref, ReferencePattern) else np.asarray(ref, dtype=np.float64)
    if values.shape[0] < shape[0] or values.shape[1] < shape[1]:
        raise ShapeError(f"reference {values.shape} is smaller than image {shape}")
    return center_crop(values, shape)


def baseline_remove(img, ref, gamma: float) -> np.ndarray:
    """Signature removal: ``I - gamma * K_S``."""
    img = check_image(img)
    return img - gamma * _fit_ref(ref, img.shape)


def baseline_inject(img, ref, gamma: float) -> np.ndarray:
    """Fingerprint copy: ``I + I * gamma * K_T``."""
    img = check_image(img)
    return img + img * gamma * _fit_ref(ref, img.shape)


def baseline_substitute(img, src_ref, tgt_ref, gamma: float, beta: float) -> np.ndarray:
    """Signature substitution: ``I - gamma * K_S + beta * K_T``."""
    img = check_image(img)
    return img - gamma * _fit_ref(src_ref, img.shape) + beta * _fit_ref(tgt_ref, img.shape)


# ----------------------------------------------------------------- estimators

class DCTAnonymizer(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`anonymize`."""

    def __init__(self, eta=DEFAULT_ANON_ETA, mask="triangle"):
        self.eta = eta
        self.mask = mask

    def fit(self, X=None, y=None):
        compute_alpha(1, 1, self.eta)
        return self

    def transform(self, X):
        return [anonymize(im, self.eta, self.mask) for im in check_images(X)]


class DCTSpoofer(TransformerMixin, BaseEstimator):
    """Learn a target sensor's averaged high band from candidate images, then implant it.

    ``fit(X)`` takes the candidate images of the target sensor;
    ``transform(X)`` spoofs each input image toward that sensor.
    """

    def __init__(self, eta=DEFAULT_SPOOF_ETA, mask="triangle"):
        self.eta = eta
        self.mask = mask

    def fit(self, X, y=None):
        cands = check_images(X, "candidate")
        self.field_ = average_high_field(cands, self.eta, self.mask)
        self.n_candidates_ = len(cands)
        return self

    def transform(self, X):
        check_is_fitted(self, "field_")
        return [spoof_with_field(im, self.field_, self.eta, self.mask) for im in check_images(X)]
