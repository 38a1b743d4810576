"""Synthetic sensors, de-identification experiments, metrics and reports."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .deident import (
    DEFAULT_ANON_ETA,
    DEFAULT_SPOOF_ETA,
    anonymize,
    average_high_field,
    baseline_inject,
    baseline_remove,
    baseline_substitute,
    low_band,
    spoof_with_field,
)
from .identify import PRNUClassifier, accuracy, safe_ncc
from .imgcore import (
    DatasetManifest,
    SensorManifest,
    ShapeError,
    check_image,
    load_image,
    quantize,
    save_image,
    write_manifest,
)
from .parallel import parallel_map
from .prnu import Scheme

BASELINE_GRID = tuple(np.round(np.arange(0.25, 2.0001, 0.25), 2))


# ------------------------------------------------------------ synthetic sensors

@dataclass(frozen=True)
class SyntheticSensor:
    """Multiplicative PRNU sensor: ``J = I * (1 + strength * K) + read noise``."""

    sensor_id: str
    fingerprint: np.ndarray
    strength: float = 0.02
    read_noise_std: float = 2.0

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("strength must be non-negative")
        if self.read_noise_std < 0:
            raise ValueError("read_noise_std must be non-negative")

    @classmethod
    def random(cls, sensor_id: str, shape=(256, 256), seed: int = 0, strength: float = 0.02,
               read_noise_std: float = 2.0, fingerprint_std: float = 1.0) -> "SyntheticSensor":
        k = np.random.default_rng(seed).standard_normal(shape)
        k = (k - k.mean()) / k.std() * fingerprint_std
        return cls(sensor_id, k, strength, read_noise_std)


def make_scene(shape=(256, 256), seed: int = 0, exponent: float = 1.0,
               contrast: float = 40.0, mean: float = 128.0) -> np.ndarray:
    """Power-law low-pass filtered white noise.

    The amplitude spectrum falls as ``1 / f**exponent`` (``exponent=1`` is the
    usual natural-image law); the field is rescaled to ``mean`` and standard
    deviation ``contrast`` and clipped to [0, 255].
    """
    h, w = shape
    rng = np.random.default_rng(seed)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    spectrum = np.fft.fft2(rng.standard_normal(shape)) / radius**exponent
    spectrum[0, 0] = 0.0
    field = np.real(np.fft.ifft2(spectrum))
    field = (field - field.mean()) / field.std()
    return np.clip(mean + contrast * field, 0.0, 255.0)


def simulate_capture(sensor: SyntheticSensor, scene, seed: int) -> np.ndarray:
    scene = check_image(scene, "scene")
    if scene.shape != sensor.fingerprint.shape:
        raise ShapeError(f"scene {scene.shape} does not match sensor {sensor.fingerprint.shape}")
    rng = np.random.default_rng(seed)
    out = scene * (1.0 + sensor.strength * sensor.fingerprint)
    if sensor.read_noise_std > 0:
        out = out + sensor.read_noise_std * rng.standard_normal(scene.shape)
    return np.clip(out, 0.0, 255.0)


@dataclass
class SensorImages:
    train: list
    test: list


@dataclass(frozen=True)
class SyntheticConfig:
    n_sensors: int = 4
    n_train: int = 20
    n_test: int = 20
    shape: tuple = (256, 256)
    strength: float = 0.02
    read_noise_std: float = 2.0
    fingerprint_std: float = 1.0
    scene_exponent: float = 1.0
    scene_contrast: float = 40.0
    seed: int = 0


def make_synthetic_sensors(config: SyntheticConfig) -> list[SyntheticSensor]:
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_sensors)
    return [
        SyntheticSensor.random(f"S{i}", config.shape, int(s.generate_state(1)[0]),
                               config.strength, config.read_noise_std, config.fingerprint_std)
        for i, s in enumerate(seeds)
    ]


def make_synthetic_dataset(config: SyntheticConfig = SyntheticConfig()):
    """Return ``(sensors, {sensor_id: SensorImages})``; every scene is distinct."""
    sensors = make_synthetic_sensors(config)
    root = np.random.SeedSequence([config.seed, 1])
    data = {}
    per = config.n_train + config.n_test
    for sensor, ss in zip(sensors, root.spawn(len(sensors))):
        seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(2 * per)]
        caps = [
            simulate_capture(
                sensor,
                make_scene(config.shape, seeds[2 * i], config.scene_exponent, config.scene_contrast),
                seeds[2 * i + 1],
            )
            for i in range(per)
        ]
        data[sensor.sensor_id] = SensorImages(caps[: config.n_train], caps[config.n_train :])
    return sensors, data


def write_synthetic_dataset(config: SyntheticConfig, out_dir) -> str:
    """Write a synthetic dataset as 8-bit PNGs plus ``manifest.json``; return its path."""
    os.makedirs(out_dir, exist_ok=True)
    _, data = make_synthetic_dataset(config)
    entries = []
    for sid, imgs in data.items():
        paths = {}
        for split in ("train", "test"):
            paths[split] = []
            for i, im in enumerate(getattr(imgs, split)):
                name = f"{sid}_{split}_{i:03d}.png"
                save_image(im, os.path.join(out_dir, name))
                paths[split].append(name)
        entries.append(SensorManifest(sid, tuple(paths["train"]), tuple(paths["test"]),
                                      tuple(config.shape)))
    path = os.path.join(out_dir, "manifest.json")
    write_manifest(DatasetManifest(tuple(entries)), path)
    return path


def load_dataset(manifest: DatasetManifest) -> dict:
    def _load(paths):
        return parallel_map(load_image, paths)

    return {s.sensor_id: SensorImages(_load(s.training_paths), _load(s.test_paths))
            for s in manifest.sensors}


def _as_dataset(data) -> dict:
    if isinstance(data, DatasetManifest):
        data = load_dataset(data)
    if len(data) < 1:
        raise ValueError("dataset has no sensors")
    return dict(data)


def fit_classifier(data: Mapping[str, SensorImages], scheme, **params) -> PRNUClassifier:
    X, y = [], []
    for sid, imgs in data.items():
        X.extend(imgs.train)
        y.extend([sid] * len(imgs.train))
    return PRNUClassifier(scheme=Scheme.parse(scheme).value, **params).fit(X, y)


# --------------------------------------------------------------------- metrics

def psnr(original, modified) -> float:
    """PSNR in dB on the 0-255 scale; ``inf`` for identical images."""
    a, b = check_image(original), check_image(modified)
    if a.shape != b.shape:
        raise ShapeError(f"psnr operands differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(255.0**2 / mse)


def utility_proxy(original, modified, eta: float = DEFAULT_ANON_ETA) -> dict:
    """Image-fidelity stand-in for a biometric matcher.

    ``low_freq_ncc`` correlates the low DCT bands (at ``eta``) of both images;
    it is 0 when either band is constant.
    """
    lf = safe_ncc(low_band(original, eta), low_band(modified, eta))
    return {"psnr": psnr(original, modified), "low_freq_ncc": lf}


# --------------------------------------------------------------------- reports

@dataclass
class AnonymizationReport:
    scheme: str
    eta: float
    per_sensor: dict = field(default_factory=dict)
    average_change: float = 0.0
    average_change_saved: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["sensor_id", "original_acc", "after_acc", "change", "after_acc_saved", "change_saved"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for sid, row in self.per_sensor.items():
            writer.writerow([sid] + [row[c] for c in cols[1:]])
        return buf.getvalue()


@dataclass
class SpoofReport:
    scheme: str
    eta: float
    per_pair: dict = field(default_factory=dict)
    average_ssr: float = 0.0
    average_ssr_saved: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["per_pair"] = [
            {"source": s, "target": t, **v} for (s, t), v in self.per_pair.items()
        ]
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "target", "ssr", "ssr_saved", "n_images"])
        for (s, t), v in self.per_pair.items():
            writer.writerow([s, t, v["ssr"], v["ssr_saved"], v["n_images"]])
        return buf.getvalue()


def write_report(report, json_path=None, csv_path=None) -> None:
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())


# ----------------------------------------------------------------- experiments

def _acc(clf: PRNUClassifier, images: Sequence, truth: str) -> float:
    results = clf.attribute_many(images)
    return accuracy((r, truth) for r in results)


def run_anonymization_experiment(data, scheme="enhanced", eta: float = DEFAULT_ANON_ETA,
                                 mask: str = "triangle", **clf_params) -> AnonymizationReport:
    """Attribution accuracy per sensor before and after anonymization.

    ``data`` is a :class:`DatasetManifest` or ``{sensor_id: SensorImages}``.
    ``after_acc_saved`` repeats the evaluation on 8-bit quantized outputs.
    """
    data = _as_dataset(data)
    clf = fit_classifier(data, scheme, **clf_params)
    per = {}
    for sid, imgs in data.items():
        if not imgs.test:
            continue
        anon = [anonymize(im, eta, mask) for im in imgs.test]
        orig = _acc(clf, imgs.test, sid)
        after = _acc(clf, anon, sid)
        saved = _acc(clf, [quantize(a) for a in anon], sid)
        per[sid] = {
            "original_acc": orig,
            "after_acc": after,
            "change": orig - after,
            "after_acc_saved": saved,
            "change_saved": orig - saved,
        }
    if not per:
        raise ValueError("no sensor has test images")
    return AnonymizationReport(
        scheme=Scheme.parse(scheme).value,
        eta=eta,
        per_sensor=per,
        average_change=float(np.mean([v["change"] for v in per.values()])),
        average_change_saved=float(np.mean([v["change_saved"] for v in per.values()])),
    )


def all_pairs(sensor_ids: Sequence[str]) -> list[tuple[str, str]]:
    return list(itertools.permutations(sensor_ids, 2))


def run_spoof_experiment(data, scheme="enhanced", eta: float = DEFAULT_SPOOF_ETA,
                         pairs: Sequence[tuple[str, str]] | None = None,
                         n_candidates: int | None = None, mask: str = "triangle",
                         **clf_params) -> SpoofReport:
    """Spoof every source test image toward each target and measure SSR.

    Candidates are the target's test images (the first ``n_candidates`` of
    them, all by default). Attribution runs against every sensor's reference.
    """
    data = _as_dataset(data)
    pairs = all_pairs(sorted(data)) if pairs is None else [tuple(p) for p in pairs]
    for s, t in pairs:
        for sid in (s, t):
            if sid not in data:
                raise KeyError(f"sensor {sid!r} is not in the dataset")
    clf = fit_classifier(data, scheme, **clf_params)
    fields = {}
    per = {}
    for src, tgt in pairs:
        if tgt not in fields:
            cands = data[tgt].test[:n_candidates] if n_candidates else data[tgt].test
            if not cands:
                raise ValueError(f"target {tgt!r} has no candidate images")
            fields[tgt] = average_high_field(cands, eta, mask)
        spoofed = [spoof_with_field(im, fields[tgt], eta, mask) for im in data[src].test]
        if not spoofed:
            continue
        per[(src, tgt)] = {
            "ssr": _acc(clf, spoofed, tgt),
            "ssr_saved": _acc(clf, [quantize(x) for x in spoofed], tgt),
            "n_images": len(spoofed),
        }
    return SpoofReport(
        scheme=Scheme.parse(scheme).value,
        eta=eta,
        per_pair=per,
        average_ssr=float(np.mean([v["ssr"] for v in per.values()])) if per else 0.0,
        average_ssr_saved=float(np.mean([v["ssr_saved"] for v in per.values()])) if per else 0.0,
    )


def eta_sweep(data, scheme="enhanced", etas=(0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
              mask: str = "triangle", **clf_params) -> list[dict]:
    """Accuracy change and utility for a range of eta values; no choice is made."""
    data = _as_dataset(data)
    clf = fit_classifier(data, scheme, **clf_params)
    tests = [(sid, im) for sid, imgs in data.items() for im in imgs.test]
    orig = np.mean([clf.attribute_one(im).predicted_sensor == sid for sid, im in tests])
    rows = []
    for eta in etas:
        anon = [(sid, im, anonymize(im, eta, mask)) for sid, im in tests]
        after = np.mean([clf.attribute_one(a).predicted_sensor == sid for sid, _, a in anon])
        util = [utility_proxy(im, a, eta) for _, im, a in anon]
        rows.append({
            "eta": eta,
            "original_acc": float(orig),
            "after_acc": float(after),
            "change": float(orig - after),
            "median_psnr": float(np.median([u["psnr"] for u in util])),
            "mean_low_freq_ncc": float(np.mean([u["low_freq_ncc"] for u in util])),
        })
    return rows


def grid_search_baseline(data, scheme="enhanced", mode: str = "remove",
                         grid: Sequence[float] = BASELINE_GRID,
                         pairs: Sequence[tuple[str, str]] | None = None, **clf_params) -> dict:
    """Grid search of the reference-based baselines.

    ``remove`` minimises accuracy on the source sensor (gamma only);
    ``inject`` and ``substitute`` maximise mean SSR over ``pairs``.
    """
    data = _as_dataset(data)
    clf = fit_classifier(data, scheme, **clf_params)
    refs = {r.sensor_id: r for r in clf.references_}
    pairs = all_pairs(sorted(data)) if pairs is None else [tuple(p) for p in pairs]

    def score_remove(gamma):
        accs = [_acc(clf, [baseline_remove(im, refs[sid], gamma) for im in imgs.test], sid)
                for sid, imgs in data.items() if imgs.test]
        return float(np.mean(accs))

    def score_spoof(make):
        return float(np.mean([
            _acc(clf, [make(im, s, t) for im in data[s].test], t) for s, t in pairs
        ]))

    rows = []
    if mode == "remove":
        for g in grid:
            rows.append({"gamma": float(g), "accuracy": score_remove(g)})
        best = min(rows, key=lambda r: (r["accuracy"], r["gamma"]))
    elif mode == "inject":
        for g in grid:
            ssr = score_spoof(lambda im, s, t, g=g: baseline_inject(im, refs[t], g))
            rows.append({"gamma": float(g), "ssr": ssr})
        best = max(rows, key=lambda r: (r["ssr"], -r["gamma"]))
    elif mode == "substitute":
        for g, b in itertools.product(grid, grid):
            ssr = score_spoof(lambda im, s, t, g=g, b=b: baseline_substitute(im, refs[s], refs[t], g, b))
            rows.append({"gamma": float(g), "beta": float(b), "ssr": ssr})
        best = max(rows, key=lambda r: (r["ssr"], -r["gamma"], -r["beta"]))
    else:
        raise ValueError(f"unknown baseline mode {mode!r}")
    return {"mode": mode, "scheme": Scheme.parse(scheme).value, "best": best, "grid": rows}
