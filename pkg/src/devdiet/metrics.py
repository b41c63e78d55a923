"""Behavioral metrics over externally produced prediction logs.

Three metric families, all pure aggregation over immutable record lists:

- ``shape_bias``: on cue-conflict stimuli (shape and texture cues disagree),
  the per-category fraction of cue-matching predictions that followed the
  shape cue, aggregated as the median over categories.
- ``shape_scene_recall``: on scene-embedded abstract shapes, how often the
  predicted class maps into the correct shape superclass vs the correct
  scene superclass.
- ``robustness_curve``: top-1 accuracy per (condition, severity) cell.

Prediction logs are CSV files with header
``image_id,predicted_class,shape_label,texture_label,scene_label,severity,condition``
(blank fields where inapplicable). Metric outputs serialize to CSV and JSON,
stamped with a schema version.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from importlib import resources

__all__ = [
    "METRICS_SCHEMA_VERSION",
    "PREDICTION_CSV_HEADER",
    "TAXONOMY_VERSION",
    "MalformedLogError",
    "PredictionRecord",
    "SuperclassMap",
    "CategoryBias",
    "ShapeBiasResult",
    "RecallResult",
    "RobustnessCell",
    "load_taxonomies",
    "default_superclass_map",
    "shape_bias",
    "shape_scene_recall",
    "robustness_curve",
    "read_prediction_csv",
    "write_prediction_csv",
    "shape_bias_csv",
    "robustness_csv",
    "metrics_json",
]

METRICS_SCHEMA_VERSION = "1"

PREDICTION_CSV_HEADER = (
    "image_id,predicted_class,shape_label,texture_label,scene_label,severity,condition"
)
_FIELDS = PREDICTION_CSV_HEADER.split(",")


class MalformedLogError(ValueError):
    """A prediction-log row that cannot be parsed; carries its line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


@dataclass(frozen=True)
class PredictionRecord:
    """One scored stimulus: what the model said, and the ground-truth cues."""

    image_id: str
    predicted_class: str
    shape_label: str = ""
    texture_label: str = ""
    scene_label: str = ""
    severity: int | None = None
    condition: str = ""

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        if not self.predicted_class:
            raise ValueError("predicted_class must be non-empty")
        if self.shape_label and self.texture_label and self.shape_label == self.texture_label:
            raise ValueError(
                f"record {self.image_id!r}: shape_label and texture_label must "
                f"differ on a cue-conflict stimulus (both {self.shape_label!r})"
            )
        if self.severity is not None and not (
            isinstance(self.severity, int) and not isinstance(self.severity, bool)
        ):
            raise ValueError(f"severity must be an int or None, got {self.severity!r}")


# ---------------------------------------------------------------------------
# taxonomies and superclass mapping
# ---------------------------------------------------------------------------


def load_taxonomies() -> dict:
    """The bundled category taxonomies (cue-conflict categories, shape and
    scene superclasses)."""
    text = resources.files("devdiet.data").joinpath("taxonomies.json").read_text("utf-8")
    return json.loads(text)


_TAXONOMIES = load_taxonomies()
TAXONOMY_VERSION: str = _TAXONOMIES["version"]
CUE_CONFLICT_CATEGORIES: tuple[str, ...] = tuple(_TAXONOMIES["cue_conflict_categories"])
SHAPE_SUPERCLASSES: tuple[str, ...] = tuple(_TAXONOMIES["shape_superclasses"])
SCENE_SUPERCLASSES: tuple[str, ...] = tuple(_TAXONOMIES["scene_superclasses"])


@dataclass(frozen=True)
class SuperclassMap:
    """class -> superclass mapping partitioned into shape and scene targets.

    Every mapped class appears exactly once, and the shape / scene superclass
    name sets are disjoint, so any predicted class resolves to at most one
    superclass on one side.
    """

    mapping: dict[str, str]
    shape_superclasses: frozenset[str]
    scene_superclasses: frozenset[str]

    def __post_init__(self):
        overlap = self.shape_superclasses & self.scene_superclasses
        if overlap:
            raise ValueError(
                f"shape and scene superclass sets must be disjoint; both contain {sorted(overlap)}"
            )
        known = self.shape_superclasses | self.scene_superclasses
        for cls, sup in self.mapping.items():
            if sup not in known:
                raise ValueError(
                    f"class {cls!r} maps to unknown superclass {sup!r}"
                )

    @classmethod
    def from_parts(
        cls,
        shape: dict[str, str],
        scene: dict[str, str],
        shape_superclasses=None,
        scene_superclasses=None,
    ) -> "SuperclassMap":
        dupes = set(shape) & set(scene)
        if dupes:
            raise ValueError(
                f"classes mapped on both sides (must appear exactly once): {sorted(dupes)}"
            )
        return cls(
            mapping={**shape, **scene},
            shape_superclasses=frozenset(
                shape_superclasses if shape_superclasses is not None else shape.values()
            ),
            scene_superclasses=frozenset(
                scene_superclasses if scene_superclasses is not None else scene.values()
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "SuperclassMap":
        doc = json.loads(text)
        return cls.from_parts(
            shape=dict(doc["shape"]),
            scene=dict(doc["scene"]),
            shape_superclasses=doc.get("shape_superclasses"),
            scene_superclasses=doc.get("scene_superclasses"),
        )

    def resolve(self, predicted_class: str) -> tuple[str, str] | None:
        """("shape"|"scene", superclass) for a mapped class, else None."""
        sup = self.mapping.get(predicted_class)
        if sup is None:
            return None
        side = "shape" if sup in self.shape_superclasses else "scene"
        return (side, sup)


def default_superclass_map() -> SuperclassMap:
    """Identity map over the bundled superclass names: each superclass name
    is its own (only) member class."""
    return SuperclassMap.from_parts(
        shape={name: name for name in SHAPE_SUPERCLASSES},
        scene={name: name for name in SCENE_SUPERCLASSES},
        shape_superclasses=SHAPE_SUPERCLASSES,
        scene_superclasses=SCENE_SUPERCLASSES,
    )


# ---------------------------------------------------------------------------
# shape bias
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CategoryBias:
    category: str
    n_shape: int
    n_texture: int
    n_neither: int
    bias: float | None  # None when no prediction matched either cue

    @property
    def n_records(self) -> int:
        return self.n_shape + self.n_texture + self.n_neither


@dataclass(frozen=True)
class ShapeBiasResult:
    per_category: tuple[CategoryBias, ...]
    overall_median: float
    overall_mean: float
    n_records: int

    def to_dict(self) -> dict:
        return {
            "schema_version": METRICS_SCHEMA_VERSION,
            "metric": "shape_bias",
            "overall_median": self.overall_median,
            "overall_mean": self.overall_mean,
            "n_records": self.n_records,
            "per_category": [
                {
                    "category": c.category,
                    "n_shape": c.n_shape,
                    "n_texture": c.n_texture,
                    "n_neither": c.n_neither,
                    "shape_bias": c.bias,
                }
                for c in self.per_category
            ],
        }


def shape_bias(records: list[PredictionRecord]) -> ShapeBiasResult:
    """Per-category and overall shape bias on cue-conflict records.

    B = N_shape / (N_shape + N_texture) per category, counting only
    predictions that matched one of the two cues; predictions matching
    neither are tallied separately and excluded from the ratio. Categories
    with an empty denominator are reported with bias None and excluded from
    the aggregate. The overall statistic is the median of the defined
    per-category biases (a mean is also emitted, clearly labeled).
    """
    if not records:
        raise ValueError("shape_bias needs at least one record")
    counts: dict[str, list[int]] = {}
    for rec in records:
        if not rec.shape_label or not rec.texture_label:
            raise ValueError(
                f"record {rec.image_id!r} lacks shape/texture labels required for shape bias"
            )
        row = counts.setdefault(rec.shape_label, [0, 0, 0])
        if rec.predicted_class == rec.shape_label:
            row[0] += 1
        elif rec.predicted_class == rec.texture_label:
            row[1] += 1
        else:
            row[2] += 1
    per_category = tuple(
        CategoryBias(
            category=cat,
            n_shape=ns,
            n_texture=nt,
            n_neither=nn,
            bias=(ns / (ns + nt)) if (ns + nt) > 0 else None,
        )
        for cat, (ns, nt, nn) in sorted(counts.items())
    )
    defined = [c.bias for c in per_category if c.bias is not None]
    if not defined:
        raise ValueError("every category is undefined (no prediction matched either cue)")
    return ShapeBiasResult(
        per_category=per_category,
        overall_median=float(statistics.median(defined)),
        overall_mean=float(statistics.fmean(defined)),
        n_records=len(records),
    )


# ---------------------------------------------------------------------------
# shape / scene recall
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecallResult:
    shape_recall: float  # percent, [0, 100]
    scene_recall: float  # percent, [0, 100]
    n_records: int
    n_unmapped: int  # predictions mapping to neither superclass set

    def to_dict(self) -> dict:
        return {
            "schema_version": METRICS_SCHEMA_VERSION,
            "metric": "shape_scene_recall",
            "shape_recall": self.shape_recall,
            "scene_recall": self.scene_recall,
            "n_records": self.n_records,
            "n_unmapped": self.n_unmapped,
        }


def shape_scene_recall(
    records: list[PredictionRecord], superclass_map: SuperclassMap
) -> RecallResult:
    """Percent of records whose prediction maps into the record's shape
    superclass, and analogously for the scene superclass. Predictions not in
    the map count toward neither recall and are tallied as unmapped."""
    if not records:
        raise ValueError("shape_scene_recall needs at least one record")
    shape_hits = scene_hits = unmapped = 0
    for rec in records:
        if not rec.shape_label or not rec.scene_label:
            raise ValueError(
                f"record {rec.image_id!r} lacks shape/scene labels required for recall"
            )
        resolved = superclass_map.resolve(rec.predicted_class)
        if resolved is None:
            unmapped += 1
            continue
        side, superclass = resolved
        if side == "shape" and superclass == rec.shape_label:
            shape_hits += 1
        elif side == "scene" and superclass == rec.scene_label:
            scene_hits += 1
    n = len(records)
    return RecallResult(
        shape_recall=100.0 * shape_hits / n,
        scene_recall=100.0 * scene_hits / n,
        n_records=n,
        n_unmapped=unmapped,
    )


# ---------------------------------------------------------------------------
# robustness curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessCell:
    condition: str
    severity: int
    top1_accuracy: float
    n_records: int


def robustness_curve(records: list[PredictionRecord]) -> list[RobustnessCell]:
    """Top-1 accuracy per (condition, severity) cell; shape_label doubles as
    the ground-truth class. Cells with no records are omitted, never
    zero-filled."""
    if not records:
        return []
    cells: dict[tuple[str, int], list[int]] = {}
    for rec in records:
        if rec.severity is None:
            raise ValueError(
                f"record {rec.image_id!r} lacks the severity required for a robustness curve"
            )
        if not rec.shape_label:
            raise ValueError(
                f"record {rec.image_id!r} lacks the ground-truth class (shape_label)"
            )
        cell = cells.setdefault((rec.condition, rec.severity), [0, 0])
        if rec.predicted_class == rec.shape_label:
            cell[0] += 1
        cell[1] += 1
    return [
        RobustnessCell(condition=cond, severity=sev, top1_accuracy=c / t, n_records=t)
        for (cond, sev), (c, t) in sorted(cells.items())
    ]


# ---------------------------------------------------------------------------
# CSV / JSON interchange
# ---------------------------------------------------------------------------


def _parse_row(row: list[str], line_number: int) -> PredictionRecord:
    if len(row) != len(_FIELDS):
        raise MalformedLogError(
            line_number, f"expected {len(_FIELDS)} fields, got {len(row)}"
        )
    image_id, predicted, shape, texture, scene, severity_s, condition = (
        v.strip() for v in row
    )
    severity: int | None = None
    if severity_s:
        try:
            severity = int(severity_s)
        except ValueError:
            raise MalformedLogError(
                line_number, f"severity must be an integer, got {severity_s!r}"
            ) from None
    try:
        return PredictionRecord(
            image_id=image_id,
            predicted_class=predicted,
            shape_label=shape,
            texture_label=texture,
            scene_label=scene,
            severity=severity,
            condition=condition,
        )
    except ValueError as exc:
        raise MalformedLogError(line_number, str(exc)) from None


def read_prediction_csv(source) -> list[PredictionRecord]:
    """Parse a prediction log from a path or an open text stream.

    The header line must match PREDICTION_CSV_HEADER exactly. Malformed rows
    raise MalformedLogError carrying the 1-based line number.
    """
    if hasattr(source, "read"):
        return _read_prediction_stream(source)
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _read_prediction_stream(fh)


def _read_prediction_stream(fh) -> list[PredictionRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedLogError(1, "empty file (missing header)") from None
    if [h.strip() for h in header] != _FIELDS:
        raise MalformedLogError(
            1, f"bad header {','.join(header)!r}; expected {PREDICTION_CSV_HEADER!r}"
        )
    records = []
    for line_number, row in enumerate(reader, start=2):
        if not row or all(not v.strip() for v in row):
            continue  # blank line
        records.append(_parse_row(row, line_number))
    return records


def write_prediction_csv(records: list[PredictionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_FIELDS)
        for rec in records:
            writer.writerow(
                [
                    rec.image_id,
                    rec.predicted_class,
                    rec.shape_label,
                    rec.texture_label,
                    rec.scene_label,
                    "" if rec.severity is None else str(rec.severity),
                    rec.condition,
                ]
            )


def shape_bias_csv(result: ShapeBiasResult) -> str:
    """Per-category shape-bias table as CSV text (undefined biases blank)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["category", "n_shape", "n_texture", "n_neither", "shape_bias"])
    for c in result.per_category:
        writer.writerow(
            [c.category, c.n_shape, c.n_texture, c.n_neither,
             "" if c.bias is None else repr(c.bias)]
        )
    return buf.getvalue()


def robustness_csv(cells: list[RobustnessCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["condition", "severity", "top1_accuracy", "n_records"])
    for cell in cells:
        writer.writerow(
            [cell.condition, cell.severity, repr(cell.top1_accuracy), cell.n_records]
        )
    return buf.getvalue()


def metrics_json(
    *,
    bias: ShapeBiasResult | None = None,
    recall: RecallResult | None = None,
    robustness: list[RobustnessCell] | None = None,
) -> str:
    """Bundle any subset of metric results into one schema-versioned JSON doc."""
    doc: dict = {"schema_version": METRICS_SCHEMA_VERSION}
    if bias is not None:
        doc["shape_bias"] = bias.to_dict()
    if recall is not None:
        doc["shape_scene_recall"] = recall.to_dict()
    if robustness is not None:
        doc["robustness_curve"] = [
            {
                "condition": c.condition,
                "severity": c.severity,
                "top1_accuracy": c.top1_accuracy,
                "n_records": c.n_records,
            }
            for c in robustness
        ]
    return json.dumps(doc, indent=2, sort_keys=True)
