"""In-process bridge from external training loops to the devdiet transforms.

The bridge exposes three operations over an immutable handle:

- :func:`make_handle` — load and validate a complete JSON config file,
  fit the developmental schedules once, and snapshot everything that
  determines pixel outputs. The handle echoes the same reproducibility
  fingerprint the dataset pipeline writes into its ``manifest.json``.
- :func:`transform_batch` — age-parameterized visual-diet transform over a
  batch of images.
- :func:`corrupt_batch` — seeded degradations (corruption kinds or noise
  attacks) over a batch of images.

Buffer contract: the caller owns the input buffer and it is never written
to; every output buffer is freshly allocated by the bridge, so no output
aliases an input. Inputs must be C-contiguous float32 ``(N, H, W, 3)``
arrays with values in ``[0, 1]``; outputs are float64 at the core's full
numeric precision, bit-identical to calling the core per image.

Handles are deeply immutable and hold no hidden state, so they can be
shared freely across threads; concurrent calls are independent because
each call allocates its own output and derives its own RNG streams.
Ages are passed per call, not stored on the handle, so the training loop
owns the developmental clock.
"""

from __future__ import annotations

import json
import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from devdiet.degradations import (
    CorruptionSpec,
    NoiseAttackSpec,
    corrupt,
    derive_seed,
    perturb,
)
from devdiet.pipeline import setup_fingerprint
from devdiet.schedules import (
    ScheduleSet,
    acuity_at,
    build_schedule_set,
    chromatic_sensitivity_at,
    contrast_sensitivity_at,
)
from devdiet.transforms import TRANSFORM_ORDER, DvdConfig, dvd_transform

__version__ = "0.1.0"  # kept in lockstep with devdiet

__all__ = [
    "BoundTransformHandle",
    "HandleConfigError",
    "corrupt_batch",
    "make_handle",
    "schedule_levels",
    "transform_batch",
]


class HandleConfigError(ValueError):
    """A config file failed validation.

    ``field`` names the offending config field when the failure is
    attributable to one (missing field, bad type, violated invariant,
    unknown key); it is None for file-level problems such as unreadable
    paths or malformed JSON.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class BoundTransformHandle:
    """Immutable snapshot of everything that determines transform outputs.

    ``fingerprint`` is identical to the ``fingerprint`` field of the
    ``manifest.json`` the dataset pipeline writes for the same config, so a
    training loop can assert it is seeing the exact same setup as an
    offline run.
    """

    config: DvdConfig
    schedule: ScheduleSet
    transform_order: tuple[str, ...]
    fingerprint: str


# Complete explicit schema: a handle is a self-contained snapshot, so every
# field must be present in the file — nothing is inherited from defaults.
_SCALAR_FIELDS = ("alpha", "beta", "lambda", "seed")
_SWITCH_FIELDS = ("enable_acuity", "enable_contrast", "enable_chroma")
_ALL_FIELDS = _SCALAR_FIELDS + _SWITCH_FIELDS


def _field_error_from_config(exc: ValueError) -> HandleConfigError:
    """Map a core config error to a field-level bridge error; the core's
    messages lead with the config-key name."""
    message = str(exc)
    first = message.split()[0] if message else ""
    return HandleConfigError(message, field=first if first in _ALL_FIELDS else None)


def make_handle(config_path) -> BoundTransformHandle:
    """Load a complete JSON config file and build a transform handle.

    The file must be a JSON object providing every config field:
    ``alpha``, ``beta``, ``lambda``, ``seed`` (numbers; seed a non-negative
    integer) and ``enable_acuity``, ``enable_contrast``, ``enable_chroma``
    (booleans). Raises :class:`HandleConfigError` with a field-level
    message on any violation.
    """
    path = Path(config_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise HandleConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HandleConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise HandleConfigError(
            f"config root must be a JSON object, got {type(doc).__name__}"
        )
    unknown = sorted(set(doc) - set(_ALL_FIELDS))
    if unknown:
        raise HandleConfigError(
            f"unknown config field(s): {unknown}", field=unknown[0]
        )
    for name in _ALL_FIELDS:
        if name not in doc:
            raise HandleConfigError(
                f'missing required config field "{name}"', field=name
            )
    for name in ("alpha", "beta", "lambda"):
        value = doc[name]
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            raise HandleConfigError(
                f"{name} must be a number, got {value!r}", field=name
            )
    if isinstance(doc["seed"], bool) or not isinstance(doc["seed"], int):
        raise HandleConfigError(
            f"seed must be an integer, got {doc['seed']!r}", field="seed"
        )
    for name in _SWITCH_FIELDS:
        if not isinstance(doc[name], bool):
            raise HandleConfigError(
                f"{name} must be a boolean, got {doc[name]!r}", field=name
            )
    try:
        cfg = DvdConfig.from_dict(doc)
    except ValueError as exc:  # invariant violations (e.g. negative lambda)
        raise _field_error_from_config(exc) from exc
    schedule = build_schedule_set()
    return BoundTransformHandle(
        config=cfg,
        schedule=schedule,
        transform_order=tuple(TRANSFORM_ORDER),
        fingerprint=setup_fingerprint(cfg, schedule),
    )


def _check_batch(images: np.ndarray) -> None:
    """Reject a bad input buffer before doing any work."""
    if not isinstance(images, np.ndarray):
        raise TypeError(f"images must be a numpy array, got {type(images).__name__}")
    if images.dtype != np.float32:
        raise TypeError(f"images must be float32, got {images.dtype}")
    if images.ndim != 4 or images.shape[-1] != 3:
        raise ValueError(f"images must have shape (N, H, W, 3), got {images.shape}")
    if images.shape[0] == 0:
        raise ValueError("images batch is empty")
    if not images.flags["C_CONTIGUOUS"]:
        raise ValueError("images buffer must be C-contiguous")
    lo, hi = float(images.min()), float(images.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"pixel values must lie in [0, 1], found [{lo}, {hi}]")


def transform_batch(
    handle: BoundTransformHandle, images: np.ndarray, age: float
) -> np.ndarray:
    """Apply the visual-diet transform at ``age`` months to every image.

    ``images``: C-contiguous float32 ``(N, H, W, 3)`` in ``[0, 1]``; the
    buffer is only read. Returns a freshly allocated float64 array of the
    same shape, each slice bit-identical to the core single-image transform.
    """
    _check_batch(images)
    age = float(age)
    if not 0.0 <= age <= 300.0:
        raise ValueError(f"age must lie in [0, 300] months, got {age}")
    out = np.empty(images.shape, dtype=np.float64)
    for i in range(images.shape[0]):
        out[i] = dvd_transform(
            images[i].astype(np.float64), age, handle.config, handle.schedule
        )
    return out


def corrupt_batch(
    handle: BoundTransformHandle,
    images: np.ndarray,
    spec,
    image_ids: Sequence[str] | None = None,
) -> np.ndarray:
    """Apply one degradation spec to every image, with per-image seeds.

    ``spec`` is a :class:`CorruptionSpec` or :class:`NoiseAttackSpec`. Each
    image's seed is derived from ``(handle.config.seed, image_id, spec)``;
    ``image_ids`` defaults to the zero-padded batch indices
    (``"000000"``, ``"000001"``, ...). Pass the pipeline's ``class/stem``
    ids to reproduce dataset outputs byte-for-byte. Buffer contract as in
    :func:`transform_batch`.
    """
    _check_batch(images)
    if not isinstance(spec, (CorruptionSpec, NoiseAttackSpec)):
        raise TypeError(f"not a degradation spec: {spec!r}")
    n = images.shape[0]
    if image_ids is None:
        ids = [f"{i:06d}" for i in range(n)]
    else:
        ids = [str(s) for s in image_ids]
        if len(ids) != n:
            raise ValueError(f"got {len(ids)} image_ids for a batch of {n}")
    apply_one = corrupt if isinstance(spec, CorruptionSpec) else perturb
    out = np.empty(images.shape, dtype=np.float64)
    for i in range(n):
        seed = derive_seed(handle.config.seed, ids[i], spec)
        out[i] = apply_one(images[i].astype(np.float64), spec, seed)
    return out


def schedule_levels(handle: BoundTransformHandle, age: float) -> dict[str, float]:
    """Developmental levels at ``age`` months: acuity MAR plus contrast and
    chromatic sensitivities, from the handle's fitted schedules."""
    age = float(age)
    if not 0.0 <= age <= 300.0:
        raise ValueError(f"age must lie in [0, 300] months, got {age}")
    return {
        "acuity_mar": acuity_at(handle.schedule, age),
        "contrast_sensitivity": contrast_sensitivity_at(handle.schedule, age),
        "chromatic_sensitivity": chromatic_sensitivity_at(handle.schedule, age),
    }
