"""Grayscale image containers, raster I/O and dataset manifests.

Images are plain 2-D ``float64`` numpy arrays on the 0-255 scale. Values are
never clamped while in memory; clamping and rounding only happen in
:func:`save_image`.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    """Raised for rasters that decode but are not 8-bit gray or RGB."""


class ManifestError(ValueError):
    """Raised when a dataset manifest fails validation."""


class ShapeError(ValueError):
    """Raised when arrays that must agree in shape do not."""


def check_image(img, name: str = "img") -> np.ndarray:
    """Coerce ``img`` to a finite 2-D float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_images(X, name: str = "X") -> list[np.ndarray]:
    """Accept a 3-D stack or any iterable of 2-D images; return a list."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [check_image(x, name) for x in X]
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise ShapeError(f"{name} must be a sequence of images, not a single image")
    return [check_image(x, name) for x in X]


def check_same_shape(images: Sequence[np.ndarray], what: str = "images") -> tuple[int, int]:
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise ShapeError(f"{what} have mixed sizes: {sorted(shapes)}")
    return images[0].shape


def rgb_to_luma(rgb) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def load_image(path) -> np.ndarray:
    """Read a PGM (P2/P5) or 8-bit PNG (gray or RGB) as luminance.

    Raises ``OSError`` for missing or truncated files and
    :class:`ImageFormatError` for other formats or bit depths.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            try:
                im.load()
            except ValueError as exc:  # raw decoders report short buffers this way
                raise OSError(f"truncated image data ({exc})") from exc
            fmt, mode = im.format, im.mode
            if fmt not in ("PNG", "PPM"):
                raise ImageFormatError(f"{path}: unsupported format {fmt}")
            if fmt == "PPM" and mode != "L":
                raise ImageFormatError(f"{path}: only 8-bit PGM is supported (mode {mode})")
            if mode == "L":
                return np.asarray(im, dtype=np.float64).copy()
            if mode == "RGB":
                return rgb_to_luma(np.asarray(im))
            raise ImageFormatError(f"{path}: unsupported mode {mode}")
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a supported raster") from exc
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


def to_uint8(img) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` as 8-bit gray; the format follows the suffix (.png/.pgm)."""
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"directory does not exist: {path.parent}")
    data = to_uint8(check_image(img))
    suffix = path.suffix.lower()
    fmt = {".png": "PNG", ".pgm": "PPM"}.get(suffix)
    if fmt is None:
        raise ImageFormatError(f"{path}: cannot encode suffix {suffix!r}")
    Image.fromarray(data, mode="L").save(path, format=fmt)


def quantize(img) -> np.ndarray:
    """What :func:`save_image` followed by :func:`load_image` would return."""
    return to_uint8(img).astype(np.float64)


@dataclass(frozen=True)
class SensorManifest:
    sensor_id: str
    training_paths: tuple[str, ...]
    test_paths: tuple[str, ...]
    native_size: tuple[int, int] | None = None

    def __post_init__(self):
        overlap = set(self.training_paths) & set(self.test_paths)
        if overlap:
            raise ManifestError(
                f"sensor {self.sensor_id!r}: training and test share {sorted(overlap)}"
            )


@dataclass(frozen=True)
class DatasetManifest:
    sensors: tuple[SensorManifest, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for s in self.sensors:
            if s.sensor_id in seen:
                raise ManifestError(f"duplicate sensor_id {s.sensor_id!r}")
            seen.add(s.sensor_id)

    @property
    def sensor_ids(self) -> list[str]:
        return [s.sensor_id for s in self.sensors]

    def __getitem__(self, sensor_id: str) -> SensorManifest:
        for s in self.sensors:
            if s.sensor_id == sensor_id:
                return s
        raise KeyError(sensor_id)

    def to_json(self) -> dict:
        return {
            "sensors": [
                {
                    "sensor_id": s.sensor_id,
                    "native_size": list(s.native_size) if s.native_size else None,
                    "training": list(s.training_paths),
                    "test": list(s.test_paths),
                }
                for s in self.sensors
            ]
        }


def _resolve(base: Path, p: str) -> str:
    q = Path(p)
    return str(q if q.is_absolute() else base / q)


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest JSON file.

    Relative image paths are resolved against the manifest's directory.
    Every referenced file must exist.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("sensors"), list):
        raise ManifestError(f"{path}: expected an object with a 'sensors' list")

    base = path.parent
    sensors = []
    missing = []
    for entry in doc["sensors"]:
        try:
            sid = str(entry["sensor_id"])
            train = tuple(_resolve(base, p) for p in entry.get("training", []))
            test = tuple(_resolve(base, p) for p in entry.get("test", []))
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"{path}: malformed sensor entry {entry!r}") from exc
        size = entry.get("native_size")
        if size is not None:
            if len(size) != 2 or min(int(v) for v in size) < 1:
                raise ManifestError(f"{path}: bad native_size {size!r} for {sid!r}")
            size = (int(size[0]), int(size[1]))
        for p in train + test:
            if not os.path.isfile(p):
                missing.append(p)
        sensors.append(SensorManifest(sid, train, test, size))
    if missing:
        raise ManifestError("missing files referenced by manifest: " + ", ".join(missing))
    return DatasetManifest(tuple(sensors))


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json(), fh, indent=2)


def load_images(paths: Iterable) -> list[np.ndarray]:
    return [load_image(p) for p in paths]
