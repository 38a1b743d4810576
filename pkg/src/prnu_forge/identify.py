"""Normalized cross-correlation and multi-sensor attribution."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .denoise import DEFAULT_NOISE_VARIANCE, DEFAULT_THRESHOLD, enhance_residual, extract_residual
from .imgcore import ShapeError, check_image, check_images
from .parallel import parallel_map
from .prnu import ReferencePattern, Scheme, estimate_reference

STATISTICS = ("residual", "image_weighted")


class DegenerateInputError(ValueError):
    """An operand of :func:`ncc` has zero variance."""


def ncc(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ncc operands differ in shape: {a.shape} vs {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.sum(da * da))
    nb = np.sqrt(np.sum(db * db))
    if na == 0 or nb == 0:
        raise DegenerateInputError("ncc of a constant array is undefined")
    return float(np.clip(np.sum(da * db) / (na * nb), -1.0, 1.0))


def center_crop(x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    H, W = x.shape
    if h > H or w > W:
        raise ShapeError(f"cannot crop {H}x{W} to {h}x{w}")
    top = (H - h) // 2
    left = (W - w) // 2
    return x[top : top + h, left : left + w]


def reconcile(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centre-crop both arrays to their common (elementwise minimum) size."""
    shape = (min(a.shape[0], b.shape[0]), min(a.shape[1], b.shape[1]))
    return center_crop(a, shape), center_crop(b, shape)


def safe_ncc(a, b) -> float:
    try:
        return ncc(a, b)
    except DegenerateInputError:
        return 0.0


@dataclass(frozen=True)
class AttributionResult:
    predicted_sensor: str
    scores: dict = field(default_factory=dict)


def _argmax_sensor(scores: dict) -> str:
    # highest score wins; equal scores resolve to the lexicographically first id
    return min(scores, key=lambda sid: (-scores[sid], sid))


def attribute(residual, refs: Sequence[ReferencePattern], image=None,
              statistic: str = "residual") -> AttributionResult:
    """Score ``residual`` against every reference and pick the best.

    With ``statistic="image_weighted"`` the residual is correlated with
    ``image * K`` instead of ``K``, which requires ``image``.
    """
    if not refs:
        raise ValueError("attribute needs at least one reference pattern")
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}; expected one of {STATISTICS}")
    residual = check_image(residual, "residual")
    if statistic == "image_weighted":
        if image is None:
            raise ValueError("image_weighted statistic needs the test image")
        image = check_image(image)
    scores = {}
    for ref in refs:
        r, k = reconcile(residual, ref.values)
        if statistic == "image_weighted":
            k = k * reconcile(image, ref.values)[0]
        scores[ref.sensor_id] = safe_ncc(r, k)
    return AttributionResult(_argmax_sensor(scores), scores)


def accuracy(results: Iterable[tuple[AttributionResult, str]]) -> float:
    results = list(results)
    if not results:
        raise ValueError("accuracy of an empty result list")
    return sum(r.predicted_sensor == truth for r, truth in results) / len(results)


def confusion_matrix(results: Iterable[tuple[AttributionResult, str]]) -> dict:
    """Nested counts ``{true_sensor: {predicted_sensor: n}}``."""
    table: dict = {}
    for r, truth in results:
        table.setdefault(truth, Counter())[r.predicted_sensor] += 1
    return {k: dict(v) for k, v in table.items()}


class PRNUClassifier(ClassifierMixin, BaseEstimator):
    """Attribute images to sensors by correlating residuals with reference patterns.

    ``fit`` takes a sequence of 2-D images (sizes may differ between sensors)
    and their sensor labels; one reference pattern is built per label.
    """

    def __init__(self, scheme="enhanced", noise_variance=DEFAULT_NOISE_VARIANCE,
                 threshold=DEFAULT_THRESHOLD, enhanced_test_residual=False,
                 statistic="residual"):
        self.scheme = scheme
        self.noise_variance = noise_variance
        self.threshold = threshold
        self.enhanced_test_residual = enhanced_test_residual
        self.statistic = statistic

    def fit(self, X, y):
        images = check_images(X)
        y = [str(label) for label in y]
        if len(images) != len(y):
            raise ValueError(f"{len(images)} images but {len(y)} labels")
        scheme = Scheme.parse(self.scheme)
        groups: dict = {}
        for im, label in zip(images, y):
            groups.setdefault(label, []).append(im)
        labels = sorted(groups)
        self.references_ = parallel_map(
            lambda sid: estimate_reference(groups[sid], scheme, sid,
                                           self.noise_variance, self.threshold),
            labels,
        )
        self.classes_ = np.array(labels)
        return self

    @classmethod
    def from_references(cls, refs: Sequence[ReferencePattern], **params) -> "PRNUClassifier":
        clf = cls(**params)
        refs = sorted(refs, key=lambda r: r.sensor_id)
        clf.references_ = list(refs)
        clf.classes_ = np.array([r.sensor_id for r in refs])
        if refs and "scheme" not in params:
            clf.scheme = refs[0].scheme.value
        return clf

    def residual(self, img) -> np.ndarray:
        r = extract_residual(img, self.noise_variance)
        if self.enhanced_test_residual:
            r = enhance_residual(r, self.threshold)
        return r

    def attribute_one(self, img) -> AttributionResult:
        check_is_fitted(self, "references_")
        img = check_image(img)
        return attribute(self.residual(img), self.references_, image=img,
                         statistic=self.statistic)

    def attribute_many(self, X) -> list[AttributionResult]:
        return parallel_map(self.attribute_one, check_images(X))

    def decision_function(self, X) -> np.ndarray:
        results = self.attribute_many(X)
        return np.array([[r.scores[c] for c in self.classes_] for r in results])

    def predict(self, X) -> np.ndarray:
        return np.array([r.predicted_sensor for r in self.attribute_many(X)])
