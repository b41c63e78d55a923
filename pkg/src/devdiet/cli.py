"""Command-line surface binding all modules into reproducible runs.

Subcommands: ``schedule``, ``preview``, ``process``, ``corrupt``, ``score``.
Every command is a pure function of (inputs, effective config, seed), so
repeated invocations reproduce outputs byte-exactly. Configuration comes from
built-in defaults, overridden by a JSON config file (``--config``),
overridden by explicit flags; the merged result is echoed into every run
manifest. Progress goes to stderr, data to stdout or files.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .degradations import (
    ATTACK_AMPLITUDES,
    ATTACK_KINDS,
    CORRUPTION_KINDS,
    CorruptionSpec,
    NoiseAttackSpec,
)
from .metrics import (
    MalformedLogError,
    SuperclassMap,
    default_superclass_map,
    metrics_json,
    read_prediction_csv,
    robustness_csv,
    robustness_curve,
    shape_bias,
    shape_bias_csv,
    shape_scene_recall,
)
from .pipeline import (
    IngestError,
    PipelineError,
    corrupt_dataset,
    ingest,
    preview,
    process_epoch,
)
from .schedules import build_schedule_set, parse_anchors_json, schedule_csv
from .transforms import REARING_CONDITIONS, ConfigError, DvdConfig

_SEVERITIES = (1, 2, 3, 4, 5)


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _load_schedule(args):
    if getattr(args, "anchors", None):
        tables, version = parse_anchors_json(Path(args.anchors).read_text("utf-8"))
        return build_schedule_set(tables, anchors_version=version)
    return build_schedule_set()


def _effective_config(args) -> DvdConfig:
    """defaults <- config file <- explicit flags, then the rearing preset."""
    merged = DvdConfig().to_dict()
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
        unknown = sorted(set(doc) - set(merged))
        if unknown:
            raise ConfigError(f"config file {args.config} has unknown fields {unknown}")
        merged.update(doc)
    for flag, key in (("alpha", "alpha"), ("beta", "beta"), ("lam", "lambda"),
                      ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            merged[key] = value
    cfg = DvdConfig.from_dict(merged)
    if getattr(args, "rearing", None):
        cfg = cfg.with_rearing(args.rearing)
    return cfg


def _add_config_flags(sub, with_epoch: bool = False):
    sub.add_argument("--config", metavar="JSON",
                     help="JSON config file; explicit flags override its fields")
    sub.add_argument("--alpha", type=float, default=None,
                     help="developmental clock speed in months per epoch")
    sub.add_argument("--beta", type=float, default=None,
                     help="contrast threshold scale")
    sub.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="contrast threshold decay length in months")
    sub.add_argument("--seed", type=int, default=None,
                     help="root seed for all stochastic degradations")
    sub.add_argument("--rearing", choices=sorted(REARING_CONDITIONS),
                     help="controlled-rearing preset selecting which of the "
                          "three transform stages are enabled")
    if with_epoch:
        sub.add_argument("--epoch", type=int, required=True,
                         help="training epoch; age = min(alpha * epoch, 300)")


def _age_list(text: str) -> list[float]:
    try:
        ages = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad age list {text!r}") from None
    if not ages:
        raise argparse.ArgumentTypeError("age list is empty")
    bad = [a for a in ages if not (0.0 <= a <= 300.0)]
    if bad:
        raise argparse.ArgumentTypeError(f"ages must lie within [0, 300] months, got {bad}")
    return ages


def _int_list(text: str, valid: tuple[int, ...], what: str) -> list[int]:
    if text.strip().lower() == "all":
        return list(valid)
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad {what} list {text!r}") from None
    bad = [v for v in values if v not in valid]
    if bad or not values:
        raise argparse.ArgumentTypeError(
            f"{what} must be drawn from {list(valid)} (or 'all'), got {text!r}"
        )
    return values


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_schedule(args) -> int:
    schedule = _load_schedule(args)
    text = schedule_csv(schedule, args.step)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _progress(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_preview(args) -> int:
    cfg = _effective_config(args)
    schedule = _load_schedule(args)
    manifest = preview(args.image, args.ages, cfg, schedule, args.out)
    for row in manifest["outputs"]:
        print(str(Path(args.out) / row["path"]))
    _progress(f"wrote {len(manifest['outputs'])} preview image(s) to {args.out}")
    return 0


def cmd_process(args) -> int:
    cfg = _effective_config(args)
    schedule = _load_schedule(args)
    index = ingest(args.dataset, skip_bad=args.skip_bad)
    hist = ", ".join(f"{k}: {v}" for k, v in index.class_histogram().items())
    _progress(f"ingested {len(index)} image(s) ({hist})")
    if index.skipped:
        _progress(f"skipped {len(index.skipped)} undecodable file(s)")
    resize = tuple(args.resize) if args.resize else None
    manifest = process_epoch(index, args.epoch, cfg, schedule, args.out,
                             workers=args.workers, resize=resize)
    _progress(
        f"epoch {manifest['epoch']} -> age {manifest['age_months']} months; "
        f"{len(manifest['outputs'])} image(s) at "
        f"{manifest['timings']['images_per_second']:.1f} img/s"
    )
    print(str(Path(args.out) / "manifest.json"))
    return 0


def cmd_corrupt(args) -> int:
    cfg = _effective_config(args)
    schedule = _load_schedule(args)
    if args.attack:
        amplitudes = _int_list(args.amplitude or "all", ATTACK_AMPLITUDES, "amplitude")
        kinds = list(ATTACK_KINDS) if args.attack == "all" else [args.attack]
        specs = [NoiseAttackSpec(k, a) for k in kinds for a in amplitudes]
    else:
        severities = _int_list(args.severity or "all", _SEVERITIES, "severity")
        kinds = list(CORRUPTION_KINDS) if args.kind == "all" else [args.kind]
        specs = [CorruptionSpec(k, s) for k in kinds for s in severities]
    index = ingest(args.dataset, skip_bad=args.skip_bad)
    _progress(f"ingested {len(index)} image(s); applying {len(specs)} spec(s)")
    manifest = corrupt_dataset(index, specs, args.out, cfg, schedule,
                               workers=args.workers)
    _progress(
        f"{len(manifest['outputs'])} output(s) at "
        f"{manifest['timings']['images_per_second']:.1f} img/s"
    )
    print(str(Path(args.out) / "manifest.json"))
    return 0


def cmd_score(args) -> int:
    records = read_prediction_csv(args.log)
    if args.superclass_map:
        superclass_map = SuperclassMap.from_json(Path(args.superclass_map).read_text("utf-8"))
    else:
        superclass_map = default_superclass_map()
    bias = recall = cells = None
    if args.metric == "shape-bias":
        bias = shape_bias(records)
        out = metrics_json(bias=bias) if args.json else shape_bias_csv(bias)
    elif args.metric == "recall":
        recall = shape_scene_recall(records, superclass_map)
        out = metrics_json(recall=recall) if args.json else (
            "shape_recall,scene_recall,n_records,n_unmapped\n"
            f"{recall.shape_recall!r},{recall.scene_recall!r},"
            f"{recall.n_records},{recall.n_unmapped}\n"
        )
    else:  # robustness
        cells = robustness_curve(records)
        out = metrics_json(robustness=cells) if args.json else robustness_csv(cells)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
        _progress(f"wrote {args.out}")
    else:
        sys.stdout.write(out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvd",
        description="Age-parameterized visual-experience transforms, corruption "
                    "benchmarks, and behavioral metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="export the developmental schedules as CSV")
    p.add_argument("--step", type=_positive_float, default=10.0,
                   help="age sampling step in months (default 10)")
    p.add_argument("--anchors", metavar="JSON",
                   help="fit schedules from a custom anchors document")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("preview", help="render one image at selected ages")
    p.add_argument("image", help="input image file")
    p.add_argument("--ages", type=_age_list, default=[0.0, 60.0, 120.0, 300.0],
                   help="comma-separated ages in months (default 0,60,120,300)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--anchors", metavar="JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("process", help="transform a dataset at one epoch's age")
    p.add_argument("dataset", help="dataset root (class-per-subdirectory)")
    p.add_argument("--out", required=True, help="output root")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--skip-bad", action="store_true",
                   help="skip undecodable files instead of aborting")
    p.add_argument("--resize", type=int, nargs=2, metavar=("W", "H"),
                   help="resize inputs before transforming")
    p.add_argument("--anchors", metavar="JSON")
    _add_config_flags(p, with_epoch=True)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("corrupt", help="apply corruption/attack grids to a dataset")
    p.add_argument("dataset", help="dataset root (class-per-subdirectory)")
    p.add_argument("--out", required=True, help="output root")
    p.add_argument("--kind", choices=list(CORRUPTION_KINDS) + ["all"],
                   help="corruption kind (or 'all' for the 16-kind grid)")
    p.add_argument("--severity", help="severity list, e.g. 3 or 1,3,5 or all")
    p.add_argument("--attack", choices=list(ATTACK_KINDS) + ["all"],
                   help="noise-attack kind instead of a corruption")
    p.add_argument("--amplitude", help="amplitude list, e.g. 50 or 10,100 or all")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--skip-bad", action="store_true")
    p.add_argument("--anchors", metavar="JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("score", help="score a prediction log with behavioral metrics")
    p.add_argument("log", help="prediction CSV")
    p.add_argument("--metric", required=True,
                   choices=["shape-bias", "recall", "robustness"])
    p.add_argument("--superclass-map", metavar="JSON",
                   help="class->superclass map (default: bundled identity map)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--out", help="write output here instead of stdout")
    p.set_defaults(func=cmd_score)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "corrupt" and bool(args.kind) == bool(args.attack):
        parser.error("corrupt needs exactly one of --kind or --attack")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except argparse.ArgumentTypeError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except MalformedLogError as exc:
        print(f"error: malformed prediction log, {exc}", file=sys.stderr)
        return 1
    except (IngestError, PipelineError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
