"""Developmental schedules: logistic curves fitted to anchor tables.

Each visual dimension (acuity, contrast sensitivity, chromatic sensitivity)
matures along a smooth monotone curve over ages 0..300 months.  Acuity is
expressed as MAR (minimum angle of resolution, Snellen denominator / 20, so
20/600 -> 30 and 20/20 -> 1) and decreases with age; the two sensitivities
are fractions of the adult level in [0, 1] and increase with age.  Ages past
300 months clamp to the adult plateau.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

AgeMonths = float

ADULT_AGE_MONTHS = 300.0

DIMENSIONS = ("acuity", "contrast", "chroma")

# Direction of maturation and physical level range per dimension.
_DIRECTION = {"acuity": -1.0, "contrast": 1.0, "chroma": 1.0}
_LEVEL_RANGE = {
    "acuity": (1.0, math.inf),
    "contrast": (0.0, 1.0),
    "chroma": (0.0, 1.0),
}
# Offset used when three anchors leave the 4-parameter logistic underdetermined.
_FLOOR = {"acuity": 1.0, "contrast": 0.0, "chroma": 0.0}


class AnchorError(ValueError):
    """Anchor table fails validation (ordering, monotonicity, or size)."""


class FitConvergenceError(RuntimeError):
    """Fit ran out of iterations; carries the best parameters seen so far."""

    def __init__(self, message: str, best_params: tuple[float, float, float, float], rms: float):
        super().__init__(message)
        self.best_params = best_params
        self.rms = rms


def clamp_age(t: AgeMonths) -> AgeMonths:
    """Clamp an age in months into [0, 300]; rejects NaN."""
    t = float(t)
    if math.isnan(t):
        raise ValueError("age is NaN")
    return min(max(t, 0.0), ADULT_AGE_MONTHS)


@dataclass(frozen=True)
class AnchorTable:
    """Sparse (age_months, level) anchors for one dimension.

    Ages must be strictly increasing; levels must be monotone in the
    dimension's direction of maturation (non-increasing MAR for acuity,
    non-decreasing sensitivity otherwise). At least three anchors.
    """

    dimension: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise AnchorError(f"unknown dimension {self.dimension!r}, expected one of {DIMENSIONS}")
        pts = tuple((float(a), float(v)) for a, v in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 3:
            raise AnchorError(f"{self.dimension}: need at least 3 anchors, got {len(pts)}")
        ages = [a for a, _ in pts]
        for i in range(1, len(ages)):
            if not ages[i] > ages[i - 1]:
                raise AnchorError(
                    f"{self.dimension}: anchor ages must be strictly increasing "
                    f"(age[{i - 1}]={ages[i - 1]} >= age[{i}]={ages[i]})"
                )
        lo, hi = _LEVEL_RANGE[self.dimension]
        d = _DIRECTION[self.dimension]
        levels = [v for _, v in pts]
        for i, v in enumerate(levels):
            if not (lo <= v <= hi):
                raise AnchorError(f"{self.dimension}: level {v} at index {i} outside [{lo}, {hi}]")
        for i in range(1, len(levels)):
            if d * (levels[i] - levels[i - 1]) < 0:
                raise AnchorError(
                    f"{self.dimension}: levels must be "
                    f"{'non-decreasing' if d > 0 else 'non-increasing'}; violated at index {i} "
                    f"({levels[i - 1]} -> {levels[i]})"
                )

    @property
    def ages(self) -> np.ndarray:
        return np.array([a for a, _ in self.points], dtype=np.float64)

    @property
    def levels(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=np.float64)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "points": [list(p) for p in self.points]}

    @staticmethod
    def from_dict(d: dict) -> "AnchorTable":
        return AnchorTable(dimension=d["dimension"], points=tuple(tuple(p) for p in d["points"]))


@dataclass(frozen=True)
class LogisticCurve:
    """level(t) = c + L * sigmoid(direction * k * (t - t0)), clamped to the
    dimension's physical range.

    direction is +1 for curves that rise with age (sensitivities) and -1 for
    curves that fall (MAR). k > 0 always; the direction carries the sign.
    """

    L: float
    k: float
    t0: float
    c: float
    direction: float
    level_range: tuple[float, float]

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.direction not in (-1.0, 1.0):
            raise ValueError(f"direction must be +/-1, got {self.direction}")

    def eval(self, t: AgeMonths) -> float:
        z = self.direction * self.k * (float(t) - self.t0)
        # stable sigmoid for large |z|
        if z >= 0:
            s = 1.0 / (1.0 + math.exp(-z))
        else:
            e = math.exp(z)
            s = e / (1.0 + e)
        v = self.c + self.L * s
        lo, hi = self.level_range
        return min(max(v, lo), hi)

    def to_dict(self) -> dict:
        return {
            "family": "logistic",
            "L": self.L,
            "k": self.k,
            "t0": self.t0,
            "c": self.c,
            "direction": self.direction,
            "level_range": [self.level_range[0], self.level_range[1]],
        }

    @staticmethod
    def from_dict(d: dict) -> "LogisticCurve":
        return LogisticCurve(
            L=d["L"], k=d["k"], t0=d["t0"], c=d["c"],
            direction=d["direction"], level_range=tuple(d["level_range"]),
        )


@dataclass(frozen=True)
class MonotonePiecewiseCurve:
    """Fallback curve: monotone piecewise-linear interpolation of the anchors,
    held flat outside the anchored age range."""

    ages: tuple[float, ...]
    levels: tuple[float, ...]
    level_range: tuple[float, float]

    def eval(self, t: AgeMonths) -> float:
        v = float(np.interp(float(t), self.ages, self.levels))
        lo, hi = self.level_range
        return min(max(v, lo), hi)

    def to_dict(self) -> dict:
        return {
            "family": "piecewise_linear",
            "ages": list(self.ages),
            "levels": list(self.levels),
            "level_range": [self.level_range[0], self.level_range[1]],
        }

    @staticmethod
    def from_dict(d: dict) -> "MonotonePiecewiseCurve":
        return MonotonePiecewiseCurve(
            ages=tuple(d["ages"]), levels=tuple(d["levels"]),
            level_range=tuple(d["level_range"]),
        )


Curve = LogisticCurve | MonotonePiecewiseCurve


def _curve_from_dict(d: dict) -> Curve:
    if d["family"] == "logistic":
        return LogisticCurve.from_dict(d)
    if d["family"] == "piecewise_linear":
        return MonotonePiecewiseCurve.from_dict(d)
    raise ValueError(f"unknown curve family {d['family']!r}")


@dataclass(frozen=True)
class FitResult:
    curve: LogisticCurve
    rms: float


def _logistic_model(params, ages, direction):
    L, k, t0, c = params
    z = direction * k * (ages - t0)
    return c + L / (1.0 + np.exp(-np.clip(z, -500, 500)))


def fit_logistic(anchors: AnchorTable, max_iter: int = 400) -> FitResult:
    """Fit a monotone logistic to an anchor table by bounded-iteration damped
    least squares.

    With exactly three anchors the offset c is frozen at the dimension's
    physical floor (MAR 1.0, sensitivities 0.0) so the problem is determined.
    Constant anchors short-circuit to the degenerate flat curve (L ~ 0,
    c = level). Raises FitConvergenceError (carrying best-so-far parameters)
    if the iteration budget is exhausted.
    """
    ages = anchors.ages
    levels = anchors.levels
    direction = _DIRECTION[anchors.dimension]
    level_range = _LEVEL_RANGE[anchors.dimension]

    if np.all(levels == levels[0]):
        flat = LogisticCurve(
            L=0.0, k=1.0, t0=float(ages.mean()), c=float(levels[0]),
            direction=direction, level_range=level_range,
        )
        return FitResult(curve=flat, rms=0.0)

    span = float(levels.max() - levels.min())
    floor = float(levels.min())
    # initial guesses: amplitude from the data span, midpoint where the
    # level crosses half-span, slope from the steepest anchor-to-anchor rise
    if direction > 0:
        half_age = float(np.interp(floor + span / 2.0, levels, ages))
    else:
        half_age = float(np.interp(floor + span / 2.0, levels[::-1], ages[::-1]))
    slopes = np.abs(np.diff(levels) / np.diff(ages))
    k0 = float(np.clip(4.0 * slopes.max() / span, 1e-3, 5.0))
    fit_c = len(anchors.points) > 3

    lo_c, hi_c = level_range
    hi_L = span * 10.0 if math.isinf(hi_c) else (hi_c - lo_c)

    if fit_c:
        x0 = np.array([span, k0, half_age, floor])
        lower = [1e-12, 1e-6, -600.0, lo_c]
        upper = [hi_L, 50.0, 900.0, hi_c if not math.isinf(hi_c) else floor + span]
        def resid(x):
            return _logistic_model(x, ages, direction) - levels
    else:
        c_fixed = _FLOOR[anchors.dimension]
        x0 = np.array([span, k0, half_age])
        lower = [1e-12, 1e-6, -600.0]
        upper = [hi_L, 50.0, 900.0]
        def resid(x):
            return _logistic_model((x[0], x[1], x[2], c_fixed), ages, direction) - levels

    x0 = np.minimum(np.maximum(x0, lower), upper)
    res = least_squares(resid, x0, bounds=(lower, upper), method="trf",
                        max_nfev=max_iter, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    params = tuple(res.x) if fit_c else (res.x[0], res.x[1], res.x[2], _FLOOR[anchors.dimension])
    rms = float(np.sqrt(np.mean(resid(res.x) ** 2)))
    if res.status == 0:
        raise FitConvergenceError(
            f"{anchors.dimension}: logistic fit did not converge in {max_iter} evaluations",
            best_params=params, rms=rms,
        )
    curve = LogisticCurve(L=float(params[0]), k=float(params[1]), t0=float(params[2]),
                          c=float(params[3]), direction=direction, level_range=level_range)
    _check_monotone(curve, direction)
    return FitResult(curve=curve, rms=rms)


def _check_monotone(curve: Curve, direction: float) -> None:
    grid = np.arange(0.0, ADULT_AGE_MONTHS + 1.0)
    vals = np.array([curve.eval(t) for t in grid])
    diffs = direction * np.diff(vals)
    if np.any(diffs < -1e-12):
        raise AnchorError("fitted curve is not monotone over [0, 300] months")


def fallback_curve(anchors: AnchorTable) -> MonotonePiecewiseCurve:
    """Monotone piecewise-linear interpolation used when the fit fails."""
    return MonotonePiecewiseCurve(
        ages=tuple(float(a) for a in anchors.ages),
        levels=tuple(float(v) for v in anchors.levels),
        level_range=_LEVEL_RANGE[anchors.dimension],
    )


@dataclass(frozen=True)
class ScheduleSet:
    """Fitted curves for all three dimensions plus provenance for manifests."""

    acuity: Curve
    contrast: Curve
    chroma: Curve
    anchors_version: str = "unversioned"
    fallbacks: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "anchors_version": self.anchors_version,
            "fallbacks": list(self.fallbacks),
            "curves": {
                "acuity": self.acuity.to_dict(),
                "contrast": self.contrast.to_dict(),
                "chroma": self.chroma.to_dict(),
            },
        }

    @staticmethod
    def from_dict(d: dict) -> "ScheduleSet":
        return ScheduleSet(
            acuity=_curve_from_dict(d["curves"]["acuity"]),
            contrast=_curve_from_dict(d["curves"]["contrast"]),
            chroma=_curve_from_dict(d["curves"]["chroma"]),
            anchors_version=d.get("anchors_version", "unversioned"),
            fallbacks=tuple(d.get("fallbacks", ())),
        )

    def fingerprint(self) -> str:
        """SHA-256 over the canonical JSON serialization of the fitted curves."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# Fitted curves approach their adult asymptote but never quite touch it; a
# value this close to the physical bound is reported as exactly adult so the
# diet is a true pass-through at maturity.
ADULT_SNAP = 1e-4


def acuity_at(s: ScheduleSet, t: AgeMonths) -> float:
    """MAR at age t (months); >= 1, clamped age, snapped to 1 near maturity."""
    v = max(s.acuity.eval(clamp_age(t)), 1.0)
    return 1.0 if v - 1.0 < ADULT_SNAP else v


def contrast_sensitivity_at(s: ScheduleSet, t: AgeMonths) -> float:
    """Fraction of adult contrast sensitivity at age t, in [0, 1]."""
    v = min(max(s.contrast.eval(clamp_age(t)), 0.0), 1.0)
    return 1.0 if 1.0 - v < ADULT_SNAP else v


def chromatic_sensitivity_at(s: ScheduleSet, t: AgeMonths) -> float:
    """Fraction of adult chromatic sensitivity at age t, in [0, 1]."""
    v = min(max(s.chroma.eval(clamp_age(t)), 0.0), 1.0)
    return 1.0 if 1.0 - v < ADULT_SNAP else v


def build_schedule_set(tables: dict[str, AnchorTable] | None = None,
                       anchors_version: str | None = None) -> ScheduleSet:
    """Fit all three curves; fall back to monotone piecewise-linear
    interpolation (recorded in `fallbacks`) for any dimension whose fit does
    not converge."""
    if tables is None:
        tables, file_version = load_default_anchors()
        anchors_version = anchors_version or file_version
    missing = [d for d in DIMENSIONS if d not in tables]
    if missing:
        raise AnchorError(f"missing anchor tables for {missing}")
    curves: dict[str, Curve] = {}
    fallbacks: list[str] = []
    for dim in DIMENSIONS:
        try:
            curves[dim] = fit_logistic(tables[dim]).curve
        except FitConvergenceError:
            curves[dim] = fallback_curve(tables[dim])
            fallbacks.append(dim)
    return ScheduleSet(
        acuity=curves["acuity"], contrast=curves["contrast"], chroma=curves["chroma"],
        anchors_version=anchors_version or "unversioned", fallbacks=tuple(fallbacks),
    )


def load_default_anchors() -> tuple[dict[str, AnchorTable], str]:
    """Load the packaged default anchor tables; returns (tables, version)."""
    text = resources.files("devdiet.data").joinpath("anchors.json").read_text("utf-8")
    return parse_anchors_json(text)


def parse_anchors_json(text: str) -> tuple[dict[str, AnchorTable], str]:
    """Parse an anchors JSON document (same shape as the packaged default)."""
    doc = json.loads(text)
    raw = doc["anchors"] if "anchors" in doc else doc
    tables = {
        dim: AnchorTable(dimension=dim, points=tuple(tuple(p) for p in raw[dim]))
        for dim in DIMENSIONS if dim in raw
    }
    missing = [d for d in DIMENSIONS if d not in tables]
    if missing:
        raise AnchorError(f"anchors document missing dimensions {missing}")
    return tables, str(doc.get("version", "unversioned"))


@dataclass(frozen=True)
class EpochClock:
    """Maps training epochs to developmental age: age = min(alpha * epoch, 300)."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def epoch_to_age(clock: EpochClock, epoch: int) -> AgeMonths:
    """Developmental age in months at a given epoch (clamped to maturity)."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return min(clock.alpha * float(epoch), ADULT_AGE_MONTHS)


SCHEDULE_CSV_HEADER = "age_months,mar,contrast_sensitivity,chromatic_sensitivity"


def export_schedule(s: ScheduleSet, step: float) -> list[tuple[float, float, float, float]]:
    """Sample all three curves on ages 0..300 inclusive at the given step."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    ages = np.arange(0.0, ADULT_AGE_MONTHS + step * 1e-9, step)
    if ages[-1] < ADULT_AGE_MONTHS:
        ages = np.append(ages, ADULT_AGE_MONTHS)
    return [
        (float(t), acuity_at(s, t), contrast_sensitivity_at(s, t), chromatic_sensitivity_at(s, t))
        for t in ages
    ]


def schedule_csv(s: ScheduleSet, step: float) -> str:
    rows = [SCHEDULE_CSV_HEADER]
    for t, m, c, ch in export_schedule(s, step):
        rows.append(f"{t:g},{m:.6g},{c:.6g},{ch:.6g}")
    return "\n".join(rows) + "\n"
