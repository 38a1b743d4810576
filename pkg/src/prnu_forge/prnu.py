"""Sensor reference-pattern estimation (Enhanced, MLE and Phase schemes)."""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .denoise import DEFAULT_NOISE_VARIANCE, DEFAULT_THRESHOLD, enhance_residual, extract_residual
from .imgcore import SensorManifest, ShapeError, check_image, check_same_shape, load_image
from .transform import ParameterError, wiener_fourier


class Scheme(str, enum.Enum):
    ENHANCED = "enhanced"
    MLE = "mle"
    PHASE = "phase"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(
                f"unknown scheme {value!r}; expected one of {[s.value for s in cls]}"
            ) from None


_SCHEME_TAGS = {Scheme.ENHANCED: 0, Scheme.MLE: 1, Scheme.PHASE: 2}
MAGIC = b"PRNUREF1"


@dataclass(frozen=True)
class ReferencePattern:
    sensor_id: str
    scheme: Scheme
    values: np.ndarray
    training_count: int

    def __post_init__(self):
        if self.training_count < 1:
            raise ValueError("training_count must be >= 1")
        if self.values.ndim != 2 or not np.all(np.isfinite(self.values)):
            raise ValueError("reference values must be a finite 2-D array")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def save(self, path) -> None:
        sid = self.sensor_id.encode("utf-8")
        h, w = self.values.shape
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<BIII", _SCHEME_TAGS[self.scheme], h, w, self.training_count))
            fh.write(struct.pack("<I", len(sid)))
            fh.write(sid)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "ReferencePattern":
        data = Path(path).read_bytes()
        if data[:8] != MAGIC:
            raise ValueError(f"{path}: not a reference-pattern file")
        try:
            tag, h, w, count = struct.unpack_from("<BIII", data, 8)
            (n,) = struct.unpack_from("<I", data, 21)
        except struct.error as exc:
            raise OSError(f"{path}: truncated header") from exc
        sid = data[25 : 25 + n].decode("utf-8")
        start = 25 + n
        if len(data) != start + 8 * h * w:
            raise OSError(f"{path}: expected {h}x{w} doubles, file size mismatch")
        values = np.frombuffer(data, dtype="<f8", offset=start).reshape(h, w).astype(np.float64)
        scheme = {v: k for k, v in _SCHEME_TAGS.items()}.get(tag)
        if scheme is None:
            raise ValueError(f"{path}: unknown scheme tag {tag}")
        return cls(sid, scheme, values, count)


def _stack(arrays: Sequence, what: str) -> np.ndarray:
    if len(arrays) == 0:
        raise ParameterError(f"need at least one {what}")
    arrays = [check_image(a, what) for a in arrays]
    check_same_shape(arrays, what + "s")
    return np.stack(arrays)


def estimate_enhanced(residuals: Sequence) -> np.ndarray:
    """Mean of (already enhanced) residuals."""
    stack = _stack(residuals, "residual")
    total = np.zeros(stack.shape[1:])
    for r in stack:
        total += r
    return total / len(stack)


def zero_mean(matrix) -> np.ndarray:
    """Remove row means, then column means."""
    x = np.asarray(matrix, dtype=np.float64)
    x = x - x.mean(axis=1, keepdims=True)
    return x - x.mean(axis=0, keepdims=True)


def mle_ratio(images: Sequence, residuals: Sequence) -> np.ndarray:
    """``sum(W_i * I_i) / sum(I_i ** 2)``, zero where the denominator vanishes."""
    if len(images) != len(residuals):
        raise ShapeError(f"{len(images)} images but {len(residuals)} residuals")
    imgs = _stack(images, "image")
    res = _stack(residuals, "residual")
    if imgs.shape != res.shape:
        raise ShapeError(f"images {imgs.shape[1:]} and residuals {res.shape[1:]} differ")
    num = np.zeros(imgs.shape[1:])
    den = np.zeros(imgs.shape[1:])
    for im, w in zip(imgs, res):
        num += w * im
        den += im * im
    safe = den > 0
    return np.where(safe, num / np.where(safe, den, 1.0), 0.0)


def estimate_mle(images: Sequence, residuals: Sequence) -> np.ndarray:
    """Maximum-likelihood fingerprint followed by zero-mean and Fourier Wiener cleanup."""
    k = zero_mean(mle_ratio(images, residuals))
    if not np.any(np.abs(k) > 1e-12):
        return np.zeros_like(k)
    return wiener_fourier(k)


def phase_whiten(spectrum) -> np.ndarray:
    """Unit-magnitude copy of a spectrum; zero coefficients stay zero."""
    mag = np.abs(spectrum)
    nz = mag > 0
    return np.where(nz, spectrum / np.where(nz, mag, 1.0), 0.0)


def estimate_phase(residuals: Sequence) -> np.ndarray:
    """Average of phase-only residual spectra, transformed back to space."""
    stack = _stack(residuals, "residual")
    acc = np.zeros(stack.shape[1:], dtype=np.complex128)
    for r in stack:
        acc += phase_whiten(np.fft.fft2(r))
    return np.real(np.fft.ifft2(acc / len(stack)))


def residuals_for(images: Sequence, scheme, noise_variance: float = DEFAULT_NOISE_VARIANCE,
                  threshold: float = DEFAULT_THRESHOLD, enhanced: bool | None = None) -> list:
    """Residuals of the kind each scheme's estimator expects (enhanced only for Enhanced)."""
    scheme = Scheme.parse(scheme)
    if enhanced is None:
        enhanced = scheme is Scheme.ENHANCED
    out = []
    for im in images:
        r = extract_residual(im, noise_variance)
        out.append(enhance_residual(r, threshold) if enhanced else r)
    return out


def estimate_reference(images: Sequence, scheme, sensor_id: str = "",
                       noise_variance: float = DEFAULT_NOISE_VARIANCE,
                       threshold: float = DEFAULT_THRESHOLD) -> ReferencePattern:
    """Build a :class:`ReferencePattern` from in-memory training images."""
    scheme = Scheme.parse(scheme)
    images = [check_image(im, "training image") for im in images]
    if not images:
        raise ParameterError(f"sensor {sensor_id!r}: no training images")
    check_same_shape(images, f"training images of {sensor_id!r}")
    residuals = residuals_for(images, scheme, noise_variance, threshold)
    if scheme is Scheme.ENHANCED:
        values = estimate_enhanced(residuals)
    elif scheme is Scheme.MLE:
        values = estimate_mle(images, residuals)
    else:
        values = estimate_phase(residuals)
    return ReferencePattern(sensor_id, scheme, values, len(images))


def build_reference(manifest: SensorManifest, scheme,
                    noise_variance: float = DEFAULT_NOISE_VARIANCE,
                    threshold: float = DEFAULT_THRESHOLD) -> ReferencePattern:
    """Estimate a sensor's reference pattern from the training files of its manifest."""
    if not manifest.training_paths:
        raise ParameterError(f"sensor {manifest.sensor_id!r}: no training images")
    images, first = [], None
    for path in manifest.training_paths:
        im = load_image(path)
        if first is None:
            first = (path, im.shape)
        elif im.shape != first[1]:
            raise ShapeError(
                f"sensor {manifest.sensor_id!r}: {path} is {im.shape[0]}x{im.shape[1]} "
                f"but {first[0]} is {first[1][0]}x{first[1][1]}"
            )
        images.append(im)
    return estimate_reference(images, scheme, manifest.sensor_id, noise_variance, threshold)
