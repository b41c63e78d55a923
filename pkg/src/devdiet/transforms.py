"""Age-parameterized image transforms: acuity blur, contrast limiting,
chromatic fidelity, and their composite.

Images are (H, W, 3) float arrays in [0, 1]. Internal math runs in float64
for numerical headroom; callers that need float32 cast at the boundary. The
composite applies acuity -> contrast -> chroma (recorded in manifests) and
clamps to [0, 1] once at the end; the contrast stage additionally clamps
after its inverse DFT since thresholding can overshoot the pixel range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import spectral
from .schedules import (
    ScheduleSet,
    acuity_at,
    chromatic_sensitivity_at,
    contrast_sensitivity_at,
)

# Rec. 601 luma weights; fixed, not configurable.
LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)

# Blur sigmas below this are visually null; skip the convolution entirely so
# mature ages stay byte-exact.
SIGMA_IDENTITY_CUTOFF = 0.05

TRANSFORM_ORDER = ("acuity", "contrast", "chroma")

REARING_CONDITIONS = {
    "all": (True, True, True),
    "acuity_chromatic": (True, False, True),
    "acuity_contrast": (True, True, False),
    "contrast_chromatic": (False, True, True),
    "acuity_only": (True, False, False),
    "contrast_only": (False, True, False),
    "chromatic_only": (False, False, True),
}


class ConfigError(ValueError):
    """Bad transform configuration; message names the offending field."""


@dataclass(frozen=True)
class DvdConfig:
    """Knobs for the developmental diet.

    alpha: months of age per training epoch.
    beta: base fraction of peak spectral power used by the contrast cutoff.
    lam: age-decay period of the contrast cutoff, in months.
    enable_*: controlled-rearing switches; all False is the baseline
        pass-through.
    seed: root seed for seeded pipeline stages (degradations).
    """

    alpha: float = 2.0
    beta: float = 1e-4
    lam: float = 100.0
    enable_acuity: bool = True
    enable_contrast: bool = True
    enable_chroma: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be a positive number, got {self.alpha!r}")
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be a positive number, got {self.beta!r}")
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lambda must be a positive number, got {self.lam!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        for name in ("enable_acuity", "enable_contrast", "enable_chroma"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be a boolean, got {getattr(self, name)!r}")

    def flags(self) -> tuple[bool, bool, bool]:
        return (self.enable_acuity, self.enable_contrast, self.enable_chroma)

    def with_rearing(self, condition: str) -> "DvdConfig":
        a, c, s = rearing_condition(condition)
        return replace(self, enable_acuity=a, enable_contrast=c, enable_chroma=s)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda": self.lam,
            "enable_acuity": self.enable_acuity,
            "enable_contrast": self.enable_contrast,
            "enable_chroma": self.enable_chroma,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "DvdConfig":
        known = {"alpha", "beta", "lambda", "enable_acuity", "enable_contrast",
                 "enable_chroma", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "lambda" in kwargs:
            kwargs["lam"] = kwargs.pop("lambda")
        return DvdConfig(**kwargs)

    @staticmethod
    def from_json(text: str) -> "DvdConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config JSON must be an object")
        return DvdConfig.from_dict(doc)


def rearing_condition(name: str) -> tuple[bool, bool, bool]:
    """Map a named rearing condition to (acuity, contrast, chroma) flags.

    Accepts the seven canonical names with '_', '+', '-', or spaces as
    separators (e.g. "contrast_only", "acuity+chromatic").
    """
    key = name.strip().lower().replace("+", "_").replace("-", "_").replace(" ", "_")
    if key not in REARING_CONDITIONS:
        raise ConfigError(
            f"unknown rearing condition {name!r}; expected one of {sorted(REARING_CONDITIONS)}"
        )
    return REARING_CONDITIONS[key]


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("zero-sized image")
    return img.astype(np.float64, copy=False)


def snellen_to_sigma(image_width: int, mar: float) -> float:
    """Blur sigma in pixels for an image width and an acuity level in MAR.

    sigma = 4 * (width / 100) * (mar / 30): anchored so a 100-pixel-wide
    image at newborn acuity (MAR 30, i.e. 20/600) gets sigma 4, scaling
    linearly both with image width and with MAR.
    """
    if image_width <= 0:
        raise ValueError(f"image width must be positive, got {image_width}")
    if mar < 1.0:
        raise ValueError(f"MAR must be >= 1 (20/20 adult), got {mar}")
    return 4.0 * (image_width / 100.0) * (mar / 30.0)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian samples with radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def apply_acuity_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with kernel radius ceil(3*sigma) and symmetric
    (reflective) borders, which conserves the image mean exactly.

    sigma below SIGMA_IDENTITY_CUTOFF returns the input values unchanged.
    """
    img = _check_image(img)
    if not math.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and non-negative, got {sigma}")
    if sigma < SIGMA_IDENTITY_CUTOFF:
        return img.copy()
    radius = math.ceil(3.0 * sigma)
    out = gaussian_filter1d(img, sigma, axis=0, mode="reflect", radius=radius)
    out = gaussian_filter1d(out, sigma, axis=1, mode="reflect", radius=radius)
    return out


def contrast_threshold_value(p_max: float, c_t: float, t: float, beta: float, lam: float) -> float:
    """Power cutoff T = p_max * (1 - c_t) * beta / max(floor(t / lam), 1).

    Fully mature sensitivity (c_t = 1) gives T = 0, which keeps every
    coefficient; the floor term relaxes the cutoff stepwise as age crosses
    multiples of lam.
    """
    if p_max < 0:
        raise ValueError(f"p_max must be non-negative, got {p_max}")
    if not 0.0 <= c_t <= 1.0:
        raise ValueError(f"contrast sensitivity must lie in [0, 1], got {c_t}")
    if t < 0:
        raise ValueError(f"age must be non-negative, got {t}")
    if beta <= 0 or lam <= 0:
        raise ValueError(f"beta and lambda must be positive, got beta={beta}, lambda={lam}")
    decay = max(math.floor(t / lam), 1)
    return p_max * (1.0 - c_t) * beta / decay


def apply_contrast_limit(img: np.ndarray, c_t: float, t: float, beta: float, lam: float) -> np.ndarray:
    """Remove spectral content below the age-dependent power cutoff.

    Per-channel DFT; one cutoff shared by all channels, derived from the
    cross-channel peak power; DC survives so the mean is preserved. The
    result is clamped to [0, 1] because removing coefficients can overshoot.
    """
    img = _check_image(img)
    spec = spectral.forward_transform(img)
    threshold = contrast_threshold_value(spectral.max_power(spec), c_t, t, beta, lam)
    limited = spectral.apply_amplitude_threshold(spec, threshold)
    out = spectral.inverse_transform(limited)
    return np.clip(out, 0.0, 1.0)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luminance image replicated over all three channels (0.299/0.587/0.114)."""
    img = _check_image(img)
    lum = (img[..., 0] * LUMINANCE_WEIGHTS[0]
           + img[..., 1] * LUMINANCE_WEIGHTS[1]
           + img[..., 2] * LUMINANCE_WEIGHTS[2])
    return np.repeat(lum[..., None], 3, axis=2)


def apply_chromatic_fidelity(img: np.ndarray, s_t: float) -> np.ndarray:
    """Blend between the grayscale image (s_t = 0) and the original (s_t = 1)."""
    img = _check_image(img)
    if not 0.0 <= s_t <= 1.0:
        raise ValueError(f"chromatic sensitivity must lie in [0, 1], got {s_t}")
    if s_t == 1.0:
        return img.copy()
    gray = to_grayscale(img)
    if s_t == 0.0:
        return gray
    return (1.0 - s_t) * gray + s_t * img


def dvd_transform(img: np.ndarray, t: float, cfg: DvdConfig, schedule: ScheduleSet) -> np.ndarray:
    """Apply the enabled age-parameterized transforms in order
    acuity -> contrast -> chroma, then clamp to [0, 1].

    With every component disabled the input values pass through unchanged.
    """
    img = _check_image(img)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"age must be finite and non-negative, got {t}")
    if not (cfg.enable_acuity or cfg.enable_contrast or cfg.enable_chroma):
        return img.copy()
    out = img
    if cfg.enable_acuity:
        sigma = snellen_to_sigma(img.shape[1], acuity_at(schedule, t))
        out = apply_acuity_blur(out, sigma)
    if cfg.enable_contrast:
        out = apply_contrast_limit(out, contrast_sensitivity_at(schedule, t), t, cfg.beta, cfg.lam)
    if cfg.enable_chroma:
        out = apply_chromatic_fidelity(out, chromatic_sensitivity_at(schedule, t))
    return np.clip(out, 0.0, 1.0)
