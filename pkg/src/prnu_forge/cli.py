"""Command-line entry point: ``prnu-forge <subcommand> ...``.

Exit status is 0 on success, 1 on validation errors (bad arguments,
manifests, shapes) and 2 on I/O errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import harness
from .deident import DEFAULT_ANON_ETA, DEFAULT_SPOOF_ETA, anonymize, spoof
from .denoise import DEFAULT_NOISE_VARIANCE, DEFAULT_THRESHOLD
from .identify import STATISTICS, PRNUClassifier
from .imgcore import load_image, load_images, load_manifest, save_image
from .prnu import ReferencePattern, Scheme, build_reference, estimate_reference
from .transform import MASK_MODES

log = logging.getLogger("prnu_forge")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
IMAGE_SUFFIXES = {".png", ".pgm"}
REF_SUFFIX = ".prnuref"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_common(p, scheme=True):
    if scheme:
        p.add_argument("--scheme", default="enhanced", choices=[s.value for s in Scheme])
    p.add_argument("--noise-variance", type=float, default=DEFAULT_NOISE_VARIANCE)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="enhancement threshold")


def _add_classifier_opts(p):
    p.add_argument("--enhanced-test-residual", action="store_true")
    p.add_argument("--statistic", default="residual", choices=STATISTICS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prnu-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("extract-ref", help="build reference patterns")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--images", nargs="+")
    p.add_argument("--sensor", help="sensor id (manifest: restrict to it; images: label)")
    p.add_argument("--out", required=True, help="output directory (manifest) or file (images)")
    _add_common(p)

    p = sub.add_parser("attribute", help="attribute an image to a sensor")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--refs", nargs="+", required=True, help="reference files or directories")
    p.add_argument("--report")
    _add_common(p, scheme=False)
    _add_classifier_opts(p)

    p = sub.add_parser("anonymize", help="suppress the sensor pattern of an image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eta", type=float, default=DEFAULT_ANON_ETA)
    p.add_argument("--mask", default="triangle", choices=MASK_MODES)

    p = sub.add_parser("spoof", help="implant a target sensor's high band")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--candidates", required=True, help="directory of target-sensor images")
    p.add_argument("--eta", type=float, default=DEFAULT_SPOOF_ETA)
    p.add_argument("--mask", default="triangle", choices=MASK_MODES)

    p = sub.add_parser("simulate", help="write a synthetic dataset and manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sensors", type=int, default=4)
    p.add_argument("--train", type=int, default=20)
    p.add_argument("--test", type=int, default=20)
    p.add_argument("--size", type=int, nargs=2, default=(256, 256), metavar=("H", "W"))
    p.add_argument("--strength", type=float, default=0.02)
    p.add_argument("--read-noise", type=float, default=2.0)
    p.add_argument("--scene-exponent", type=float, default=1.0)
    p.add_argument("--scene-contrast", type=float, default=40.0)

    for name, eta in (("evaluate-anon", DEFAULT_ANON_ETA), ("evaluate-spoof", DEFAULT_SPOOF_ETA)):
        p = sub.add_parser(name)
        p.add_argument("--manifest", required=True)
        p.add_argument("--eta", type=float, default=eta)
        p.add_argument("--mask", default="triangle", choices=MASK_MODES)
        p.add_argument("--report", help="JSON report path")
        p.add_argument("--csv", help="CSV report path")
        _add_common(p)
        _add_classifier_opts(p)
        if name == "evaluate-spoof":
            p.add_argument("--pairs", nargs="+", metavar="SRC:TGT",
                           help="ordered pairs; default all")
            p.add_argument("--n-candidates", type=int)

    p = sub.add_parser("eta-sweep", help="accuracy change and utility across eta")
    p.add_argument("--manifest", required=True)
    p.add_argument("--etas", type=float, nargs="+", default=[0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    p.add_argument("--mask", default="triangle", choices=MASK_MODES)
    p.add_argument("--report")
    _add_common(p)
    _add_classifier_opts(p)
    return parser


def _clf_params(args) -> dict:
    return {
        "noise_variance": args.noise_variance,
        "threshold": args.threshold,
        "enhanced_test_residual": args.enhanced_test_residual,
        "statistic": args.statistic,
    }


def _image_files(directory) -> list[str]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"candidate directory not found: {d}")
    files = sorted(str(p) for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no .png/.pgm images in {d}")
    return files


def _ref_files(items) -> list[str]:
    out = []
    for item in items:
        p = Path(item)
        out.extend(sorted(str(q) for q in p.glob("*" + REF_SUFFIX)) if p.is_dir() else [str(p)])
    if not out:
        raise FileNotFoundError("no reference-pattern files found")
    return out


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_extract_ref(args):
    if args.manifest:
        manifest = load_manifest(args.manifest)
        sensors = [manifest[args.sensor]] if args.sensor else list(manifest.sensors)
        os.makedirs(args.out, exist_ok=True)
        written = []
        for s in sensors:
            ref = build_reference(s, args.scheme, args.noise_variance, args.threshold)
            path = os.path.join(args.out, f"{s.sensor_id}{REF_SUFFIX}")
            ref.save(path)
            written.append({"sensor_id": s.sensor_id, "path": path,
                            "training_count": ref.training_count})
        _dump({"scheme": args.scheme, "references": written})
    else:
        ref = estimate_reference(load_images(args.images), args.scheme, args.sensor or "sensor",
                                 args.noise_variance, args.threshold)
        ref.save(args.out)
        _dump({"sensor_id": ref.sensor_id, "path": args.out, "training_count": ref.training_count})


def cmd_attribute(args):
    refs = [ReferencePattern.load(p) for p in _ref_files(args.refs)]
    clf = PRNUClassifier.from_references(refs, **_clf_params(args))
    result = clf.attribute_one(load_image(args.inp))
    _dump({"predicted_sensor": result.predicted_sensor, "scores": result.scores}, args.report)


def cmd_anonymize(args):
    save_image(anonymize(load_image(args.inp), args.eta, args.mask), args.out)


def cmd_spoof(args):
    candidates = load_images(_image_files(args.candidates))
    save_image(spoof(load_image(args.inp), candidates, args.eta, args.mask), args.out)


def cmd_simulate(args):
    config = harness.SyntheticConfig(
        n_sensors=args.sensors, n_train=args.train, n_test=args.test, shape=tuple(args.size),
        strength=args.strength, read_noise_std=args.read_noise,
        scene_exponent=args.scene_exponent, scene_contrast=args.scene_contrast, seed=args.seed,
    )
    path = harness.write_synthetic_dataset(config, args.out_dir)
    _dump({"manifest": path})


def cmd_evaluate_anon(args):
    report = harness.run_anonymization_experiment(
        load_manifest(args.manifest), args.scheme, args.eta, args.mask, **_clf_params(args))
    harness.write_report(report, args.report, args.csv)
    _dump(report.to_json())


def _parse_pairs(items):
    pairs = []
    for item in items:
        src, sep, tgt = item.partition(":")
        if not sep or not src or not tgt:
            raise ValueError(f"pair {item!r} is not of the form SRC:TGT")
        pairs.append((src, tgt))
    return pairs


def cmd_evaluate_spoof(args):
    pairs = _parse_pairs(args.pairs) if args.pairs else None
    report = harness.run_spoof_experiment(
        load_manifest(args.manifest), args.scheme, args.eta, pairs, args.n_candidates,
        args.mask, **_clf_params(args))
    harness.write_report(report, args.report, args.csv)
    _dump(report.to_json())


def cmd_eta_sweep(args):
    rows = harness.eta_sweep(load_manifest(args.manifest), args.scheme, args.etas, args.mask,
                             **_clf_params(args))
    _dump({"scheme": args.scheme, "sweep": rows}, args.report)


COMMANDS = {
    "extract-ref": cmd_extract_ref,
    "attribute": cmd_attribute,
    "anonymize": cmd_anonymize,
    "spoof": cmd_spoof,
    "simulate": cmd_simulate,
    "evaluate-anon": cmd_evaluate_anon,
    "evaluate-spoof": cmd_evaluate_spoof,
    "eta-sweep": cmd_eta_sweep,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"prnu-forge: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        COMMANDS[args.command](args)
    except OSError as exc:
        print(f"prnu-forge: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"prnu-forge: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
