"""Dataset ingestion, age-scheduled batch processing, and provenance manifests.

A dataset is a ``root/<class>/<image>`` directory tree. Ingestion validates
that every file decodes, assigns each image the id ``<class>/<stem>``, and
returns a sorted index. Batch operations map a pure per-image function over
the index with an optional process pool and write:

- lossless PNG outputs mirroring the class layout, and
- a schema-versioned JSON manifest recording the effective config, schedule
  fingerprint, transform order, DFT convention, corruption-constants version,
  and a sha256 checksum per output file.

Everything that determines pixel values is captured by the manifest, so two
runs with equal run fingerprints produce identical checksum sets regardless
of worker count (parallelism is across images only; each image's math has a
fixed operation order).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .degradations import (
    CONSTANTS_VERSION,
    CorruptionSpec,
    NoiseAttackSpec,
    degrade,
    derive_seed,
)
from .schedules import EpochClock, ScheduleSet, epoch_to_age
from .spectral import DFT_CONVENTION
from .transforms import TRANSFORM_ORDER, DvdConfig, dvd_transform

__all__ = [
    "MANIFEST_SCHEMA_VERSION",
    "INDEX_CSV_HEADER",
    "IngestError",
    "PipelineError",
    "DatasetEntry",
    "SkipRecord",
    "DatasetIndex",
    "ingest",
    "load_image",
    "save_png",
    "process_epoch",
    "corrupt_dataset",
    "preview",
    "setup_fingerprint",
    "run_fingerprint",
    "checksum_set",
    "read_manifest",
]

MANIFEST_SCHEMA_VERSION = "1"
INDEX_CSV_HEADER = "image_id,path,class_label"
MANIFEST_NAME = "manifest.json"

# run-identity excludes anything that may differ between byte-identical runs
_VOLATILE_MANIFEST_KEYS = frozenset(
    {"outputs", "errors", "incomplete", "timings", "n_workers", "tool_version"}
)


class IngestError(Exception):
    """Dataset validation failure; carries the offending file list."""

    def __init__(self, message: str, bad_files: tuple = ()):  # type: ignore[assignment]
        super().__init__(message)
        self.bad_files = tuple(bad_files)


class PipelineError(Exception):
    """A batch run aborted; carries the partial manifest (marked incomplete)."""

    def __init__(self, message: str, manifest: dict | None = None):
        super().__init__(message)
        self.manifest = manifest


# ---------------------------------------------------------------------------
# dataset index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetEntry:
    image_id: str  # "<class>/<stem>"
    path: str
    class_label: str


@dataclass(frozen=True)
class SkipRecord:
    path: str
    reason: str


@dataclass(frozen=True)
class DatasetIndex:
    root: str
    entries: tuple[DatasetEntry, ...]
    skipped: tuple[SkipRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def class_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for entry in self.entries:
            hist[entry.class_label] = hist.get(entry.class_label, 0) + 1
        return dict(sorted(hist.items()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(INDEX_CSV_HEADER.split(","))
        for entry in self.entries:
            writer.writerow([entry.image_id, entry.path, entry.class_label])
        return buf.getvalue()


def load_image(path) -> np.ndarray:
    """Decode to an (H, W, 3) float array in [0, 1]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=np.float64) / 255.0


def save_png(img: np.ndarray, path) -> str:
    """Quantize to 8-bit, write lossless PNG, return the file's sha256."""
    u8 = np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(u8).save(path, format="PNG", optimize=False)
    return hashlib.sha256(path.read_bytes()).hexdigest()


def ingest(root, skip_bad: bool = False) -> DatasetIndex:
    """Index a class-per-subdirectory tree, validating that every file decodes.

    Undecodable or unreadable files abort the run with all offenders listed,
    unless ``skip_bad`` is set, in which case they become skip records.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"dataset root {root} is not a directory")
    entries: list[DatasetEntry] = []
    bad: list[SkipRecord] = []
    seen_ids: dict[str, str] = {}
    stray = [p.name for p in root.iterdir() if p.is_file() and not p.name.startswith(".")]
    if stray:
        warnings.warn(
            f"ignoring {len(stray)} file(s) directly under the dataset root "
            f"(expected class subdirectories): {sorted(stray)[:5]}",
            stacklevel=2,
        )
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if class_dir.name.startswith("."):
            continue
        for path in sorted(p for p in class_dir.iterdir() if p.is_file()):
            if path.name.startswith("."):
                continue
            try:
                with Image.open(path) as im:
                    im.convert("RGB")
            except Exception as exc:
                bad.append(SkipRecord(path=str(path), reason=str(exc)))
                continue
            image_id = f"{class_dir.name}/{path.stem}"
            if image_id in seen_ids:
                raise IngestError(
                    f"duplicate image id {image_id!r}: {seen_ids[image_id]} vs {path}"
                )
            seen_ids[image_id] = str(path)
            entries.append(
                DatasetEntry(image_id=image_id, path=str(path), class_label=class_dir.name)
            )
    if bad and not skip_bad:
        listing = "; ".join(f"{r.path} ({r.reason})" for r in bad)
        raise IngestError(
            f"{len(bad)} file(s) failed to decode (pass skip_bad to continue): {listing}",
            bad_files=tuple(r.path for r in bad),
        )
    if not entries:
        warnings.warn(f"dataset root {root} contains no decodable images", stacklevel=2)
    entries.sort(key=lambda e: e.image_id)
    return DatasetIndex(root=str(root), entries=tuple(entries), skipped=tuple(bad))


# ---------------------------------------------------------------------------
# fingerprints and manifest helpers
# ---------------------------------------------------------------------------


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def setup_fingerprint(cfg: DvdConfig, schedule: ScheduleSet) -> str:
    """Identity of the transform setup: config, fitted schedules, transform
    order, DFT convention, and corruption-constants version. Any consumer
    holding the same snapshot computes the same value."""
    doc = {
        "kind": "devdiet-setup",
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "schedule_fingerprint": schedule.fingerprint(),
        "transform_order": list(TRANSFORM_ORDER),
        "dft_convention": DFT_CONVENTION,
        "corruption_constants_version": CONSTANTS_VERSION,
    }
    return hashlib.sha256(_canonical_json(doc).encode("utf-8")).hexdigest()


def run_fingerprint(manifest: dict) -> str:
    """Identity of everything that determines a run's pixel outputs (excludes
    outputs themselves, timings, worker count, and tool version)."""
    doc = {k: v for k, v in manifest.items() if k not in _VOLATILE_MANIFEST_KEYS}
    return hashlib.sha256(_canonical_json(doc).encode("utf-8")).hexdigest()


def checksum_set(manifest: dict) -> frozenset:
    """The (relative path, sha256) pairs of a manifest's outputs."""
    return frozenset((row["path"], row["sha256"]) for row in manifest["outputs"])


def read_manifest(out_root) -> dict:
    with open(Path(out_root) / MANIFEST_NAME, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _base_manifest(kind: str, cfg: DvdConfig, schedule: ScheduleSet) -> dict:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool_version": __version__,
        "kind": kind,
        "config": cfg.to_dict(),
        "schedule_fingerprint": schedule.fingerprint(),
        "transform_order": list(TRANSFORM_ORDER),
        "dft_convention": DFT_CONVENTION,
        "corruption_constants_version": CONSTANTS_VERSION,
        "fingerprint": setup_fingerprint(cfg, schedule),
    }


def _write_manifest(manifest: dict, out_root: Path) -> dict:
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# per-image workers (module level so a process pool can pickle them)
# ---------------------------------------------------------------------------


def _transform_one(task: dict) -> dict:
    try:
        t0 = time.perf_counter()
        with Image.open(task["src"]) as im:
            rgb = im.convert("RGB")
            if task["resize"] is not None:
                rgb = rgb.resize(tuple(task["resize"]), Image.LANCZOS)
            img = np.asarray(rgb, dtype=np.float64) / 255.0
        t1 = time.perf_counter()
        out = dvd_transform(img, task["age"], task["cfg"], task["schedule"])
        t2 = time.perf_counter()
        digest = save_png(out, Path(task["out_root"]) / task["rel"])
        t3 = time.perf_counter()
        return {
            "image_id": task["image_id"],
            "class_label": task["class_label"],
            "path": task["rel"],
            "sha256": digest,
            "timings": {"load": t1 - t0, "transform": t2 - t1, "encode": t3 - t2},
        }
    except Exception as exc:  # surfaced as an error record, aborts the run
        return {"image_id": task["image_id"], "error": f"{type(exc).__name__}: {exc}"}


def _degrade_one(task: dict) -> dict:
    try:
        t0 = time.perf_counter()
        img = load_image(task["src"])
        t1 = time.perf_counter()
        out = degrade(img, task["spec"], task["seed"])
        t2 = time.perf_counter()
        digest = save_png(out, Path(task["out_root"]) / task["rel"])
        t3 = time.perf_counter()
        row = {
            "image_id": task["image_id"],
            "class_label": task["class_label"],
            "spec": task["spec"].spec_string(),
            "kind": task["spec"].kind,
            "seed": str(task["seed"]),
            "path": task["rel"],
            "sha256": digest,
            "timings": {"load": t1 - t0, "transform": t2 - t1, "encode": t3 - t2},
        }
        if isinstance(task["spec"], CorruptionSpec):
            row["severity"] = task["spec"].severity
        else:
            row["amplitude"] = task["spec"].amplitude
        return row
    except Exception as exc:
        return {"image_id": task["image_id"], "error": f"{type(exc).__name__}: {exc}"}


def _run_tasks(worker, tasks: list[dict], workers: int) -> tuple[list[dict], list[dict]]:
    """Map worker over tasks; stop handing out work after the first error.

    Returns (ok_rows, error_rows). Row order is not meaningful; callers sort.
    """
    ok: list[dict] = []
    errors: list[dict] = []
    if workers <= 1:
        for task in tasks:
            row = worker(task)
            if "error" in row:
                errors.append(row)
                break
            ok.append(row)
        return ok, errors
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, task) for task in tasks]
        for future in as_completed(futures):
            row = future.result()
            if "error" in row:
                errors.append(row)
                for pending in futures:
                    pending.cancel()
            else:
                ok.append(row)
    return ok, errors


def _finalize(
    manifest: dict,
    out_root: Path,
    ok: list[dict],
    errors: list[dict],
    wall: float,
    workers: int,
    sort_key,
) -> dict:
    stage_totals = {"load": 0.0, "transform": 0.0, "encode": 0.0}
    for row in ok:
        timings = row.pop("timings")
        for stage, seconds in timings.items():
            stage_totals[stage] += seconds
    manifest["outputs"] = sorted(ok, key=sort_key)
    manifest["errors"] = sorted(errors, key=lambda r: r["image_id"])
    manifest["incomplete"] = bool(errors)
    manifest["n_workers"] = workers
    manifest["timings"] = {
        "wall_seconds": wall,
        "images_per_second": (len(ok) / wall) if wall > 0 else 0.0,
        "stage_seconds": stage_totals,
    }
    _write_manifest(manifest, out_root)
    if errors:
        raise PipelineError(
            f"{len(errors)} image(s) failed; partial manifest written to "
            f"{out_root / MANIFEST_NAME} with incomplete=true "
            f"(first: {errors[0]['image_id']}: {errors[0]['error']})",
            manifest=manifest,
        )
    return manifest


# ---------------------------------------------------------------------------
# batch operations
# ---------------------------------------------------------------------------


def process_epoch(
    index: DatasetIndex,
    epoch: int,
    cfg: DvdConfig,
    schedule: ScheduleSet,
    out_root,
    workers: int = 1,
    resize: tuple[int, int] | None = None,
) -> dict:
    """Transform every indexed image at the age implied by the epoch.

    All images within an epoch share one age: age = min(alpha * epoch, 300).
    Outputs are lossless PNGs mirroring the class layout; the returned (and
    written) manifest records the effective config and per-file checksums.
    """
    out_root = Path(out_root)
    age = epoch_to_age(EpochClock(cfg.alpha), epoch)
    manifest = _base_manifest("process_epoch", cfg, schedule)
    manifest.update(
        {
            "epoch": int(epoch),
            "age_months": age,
            "input_root": index.root,
            "resize": list(resize) if resize is not None else None,
        }
    )
    tasks = [
        {
            "src": entry.path,
            "rel": f"{entry.image_id}.png",
            "out_root": str(out_root),
            "image_id": entry.image_id,
            "class_label": entry.class_label,
            "age": age,
            "cfg": cfg,
            "schedule": schedule,
            "resize": resize,
        }
        for entry in index.entries
    ]
    t0 = time.perf_counter()
    ok, errors = _run_tasks(_transform_one, tasks, workers)
    wall = time.perf_counter() - t0
    return _finalize(manifest, out_root, ok, errors, wall, workers,
                     sort_key=lambda r: r["image_id"])


def corrupt_dataset(
    index: DatasetIndex,
    specs,
    out_root,
    cfg: DvdConfig,
    schedule: ScheduleSet,
    workers: int = 1,
) -> dict:
    """Apply one or many degradation specs to every indexed image.

    ``specs`` is a single CorruptionSpec/NoiseAttackSpec or an iterable of
    them; each (image, spec) pair gets an independent seed derived from
    cfg.seed, the image id, and the spec, so outputs are reproducible and
    uncorrelated. Layout: ``out/<kind>/<severity_N|amplitude_N>/<class>/<stem>.png``.
    """
    out_root = Path(out_root)
    if isinstance(specs, (CorruptionSpec, NoiseAttackSpec)):
        specs = [specs]
    else:
        specs = list(specs)
    if not specs:
        raise ValueError("corrupt_dataset needs at least one degradation spec")
    for spec in specs:
        if not isinstance(spec, (CorruptionSpec, NoiseAttackSpec)):
            raise TypeError(f"not a degradation spec: {spec!r}")
    manifest = _base_manifest("corrupt_dataset", cfg, schedule)
    manifest.update(
        {
            "root_seed": cfg.seed,
            "specs": [spec.spec_string() for spec in specs],
            "input_root": index.root,
        }
    )
    tasks = []
    for spec in specs:
        if isinstance(spec, CorruptionSpec):
            level = f"severity_{spec.severity}"
        else:
            level = f"amplitude_{spec.amplitude}"
        for entry in index.entries:
            tasks.append(
                {
                    "src": entry.path,
                    "rel": f"{spec.kind}/{level}/{entry.image_id}.png",
                    "out_root": str(out_root),
                    "image_id": entry.image_id,
                    "class_label": entry.class_label,
                    "spec": spec,
                    "seed": derive_seed(cfg.seed, entry.image_id, spec),
                }
            )
    t0 = time.perf_counter()
    ok, errors = _run_tasks(_degrade_one, tasks, workers)
    wall = time.perf_counter() - t0
    return _finalize(manifest, out_root, ok, errors, wall, workers,
                     sort_key=lambda r: (r["spec"], r["image_id"]))


def preview(
    image_path,
    ages,
    cfg: DvdConfig,
    schedule: ScheduleSet,
    out_dir,
) -> dict:
    """Render one image at each requested age for qualitative inspection."""
    ages = [float(a) for a in ages]
    if not ages:
        raise ValueError("preview needs at least one age")
    for age in ages:
        if not (0.0 <= age <= 300.0):
            raise ValueError(f"ages must lie within [0, 300] months, got {age}")
    out_dir = Path(out_dir)
    stem = Path(image_path).stem
    img = load_image(image_path)
    manifest = _base_manifest("preview", cfg, schedule)
    manifest.update({"source": str(image_path), "ages": ages})
    outputs = []
    t0 = time.perf_counter()
    for age in ages:
        out = dvd_transform(img, age, cfg, schedule)
        label = (f"{age:g}").replace(".", "p")
        rel = f"{stem}_age{label}.png"
        digest = save_png(out, out_dir / rel)
        outputs.append({"age_months": age, "path": rel, "sha256": digest})
    wall = time.perf_counter() - t0
    manifest["outputs"] = outputs  # one per requested age, in request order
    manifest["errors"] = []
    manifest["incomplete"] = False
    manifest["n_workers"] = 1
    manifest["timings"] = {
        "wall_seconds": wall,
        "images_per_second": (len(outputs) / wall) if wall > 0 else 0.0,
        "stage_seconds": {},
    }
    return _write_manifest(manifest, out_dir)
