"""Parametric image corruptions (16 kinds x 5 severities) and seeded noise
attacks.

All functions are pure: (image, spec, seed) fully determines the output,
byte-for-byte, across runs and machines. Randomness comes from a
counter-based generator (Philox) keyed by the seed, so outputs are
reproducible regardless of call order or process count. Severity constants
live in data/corruption_constants.json; its version string travels into run
manifests so downstream fixtures can detect drift.

Images are (H, W, 3) float arrays in [0, 1]; outputs are float64 in [0, 1].
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

import cv2
import numpy as np
from PIL import Image
from scipy.ndimage import convolve, gaussian_filter, map_coordinates
from scipy.ndimage import zoom as ndzoom

from .transforms import LUMINANCE_WEIGHTS


def _load_constants() -> dict:
    text = resources.files("devdiet.data").joinpath("corruption_constants.json").read_text("utf-8")
    return json.loads(text)


_CONSTANTS = _load_constants()
CONSTANTS_VERSION: str = _CONSTANTS["version"]

CORRUPTION_KINDS = (
    "gaussian_noise", "shot_noise", "impulse_noise", "speckle_noise",
    "motion_blur", "zoom_blur", "gaussian_blur", "defocus_blur",
    "rain", "icy_window", "drizzle", "snow",
    "pixelate", "jpeg_compression", "pixel_dropout", "wave_distortion",
)

ATTACK_KINDS = ("l2_gaussian", "l2_uniform", "salt_and_pepper")

ATTACK_AMPLITUDES = tuple(_CONSTANTS["attacks"]["amplitudes"])

_SEVERITIES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(
                f"unknown corruption kind {self.kind!r}; expected one of {list(CORRUPTION_KINDS)}"
            )
        if self.severity not in _SEVERITIES:
            raise ValueError(f"severity must be in 1..5, got {self.severity!r}")

    def spec_string(self) -> str:
        return f"corrupt:{self.kind}:{self.severity}"


@dataclass(frozen=True)
class NoiseAttackSpec:
    kind: str
    amplitude: int

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(
                f"unknown attack kind {self.kind!r}; expected one of {list(ATTACK_KINDS)}"
            )
        if self.amplitude not in ATTACK_AMPLITUDES:
            raise ValueError(
                f"amplitude must be one of {list(ATTACK_AMPLITUDES)}, got {self.amplitude!r}"
            )

    def spec_string(self) -> str:
        return f"attack:{self.kind}:{self.amplitude}"


DegradationSpec = CorruptionSpec | NoiseAttackSpec


def all_corruption_specs() -> list[CorruptionSpec]:
    """The full 16 x 5 corruption grid, in taxonomy order."""
    return [CorruptionSpec(kind, s) for kind in CORRUPTION_KINDS for s in _SEVERITIES]


def derive_seed(root_seed: int, image_id: str, spec: DegradationSpec) -> int:
    """Per-image seed: hash of (root seed, image id, spec). 128-bit."""
    blob = f"{root_seed}|{image_id}|{spec.spec_string()}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:16], "big")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("zero-sized image")
    return img.astype(np.float64, copy=False)


def psnr(clean: np.ndarray, degraded: np.ndarray, cap: float = 100.0) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images, capped for the
    identical-image case."""
    mse = float(np.mean((np.asarray(clean, np.float64) - np.asarray(degraded, np.float64)) ** 2))
    if mse <= 0:
        return cap
    return min(10.0 * math.log10(1.0 / mse), cap)


def _luminance(img: np.ndarray) -> np.ndarray:
    return (img[..., 0] * LUMINANCE_WEIGHTS[0]
            + img[..., 1] * LUMINANCE_WEIGHTS[1]
            + img[..., 2] * LUMINANCE_WEIGHTS[2])


def _clipped_zoom(img: np.ndarray, factor: float) -> np.ndarray:
    """Zoom into the center keeping the original canvas size."""
    h, w = img.shape[0], img.shape[1]
    ch, cw = math.ceil(h / factor), math.ceil(w / factor)
    top, left = (h - ch) // 2, (w - cw) // 2
    crop = img[top:top + ch, left:left + cw]
    zoom_spec = (factor, factor) + (1,) * (img.ndim - 2)
    big = ndzoom(crop, zoom_spec, order=1)
    t2, l2 = (big.shape[0] - h) // 2, (big.shape[1] - w) // 2
    return big[t2:t2 + h, l2:l2 + w]


def _motion_kernel(radius: int, sigma: float, angle_deg: float) -> np.ndarray:
    """Directional streak kernel: Gaussian-weighted samples trailing from the
    center along the given angle."""
    length = 2 * radius + 1
    size = 2 * length + 1
    kernel = np.zeros((size, size), dtype=np.float64)
    theta = math.radians(angle_deg)
    for i in range(length):
        wgt = math.exp(-0.5 * (i / max(sigma, 1e-6)) ** 2)
        r = length + int(round(-i * math.sin(theta)))
        c = length + int(round(i * math.cos(theta)))
        kernel[r, c] += wgt
    return kernel / kernel.sum()


def _convolve_rgb(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = np.empty_like(img)
    for ch in range(3):
        out[..., ch] = convolve(img[..., ch], kernel, mode="reflect")
    return out


# --- the 16 corruption kinds ------------------------------------------------

def _gaussian_noise(img, c, rng):
    return img + rng.normal(size=img.shape) * c["std"]


def _shot_noise(img, c, rng):
    return rng.poisson(img * c["rate"]) / float(c["rate"])


def _impulse_noise(img, c, rng):
    # per-element salt/pepper replacement, like sk random_noise mode="s&p"
    out = img.copy()
    mask = rng.random(img.shape) < c["amount"]
    salt = rng.random(img.shape) < 0.5
    out[mask & salt] = 1.0
    out[mask & ~salt] = 0.0
    return out


def _speckle_noise(img, c, rng):
    return img + img * rng.normal(size=img.shape) * c["scale"]


def _motion_blur(img, c, rng):
    lo, hi = c["angle_range"]
    angle = rng.uniform(lo, hi)
    kernel = _motion_kernel(int(c["radius"]), float(c["sigma"]), angle)
    return _convolve_rgb(img, kernel)


def _zoom_blur(img, c, rng):
    factors = np.arange(1.0, c["zoom_stop"], c["zoom_step"])
    acc = img.copy()
    for f in factors:
        acc += _clipped_zoom(img, float(f))
    return acc / (len(factors) + 1)


def _gaussian_blur(img, c, rng):
    sigma = float(c["sigma"])
    return gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="reflect",
                           radius=(math.ceil(3 * sigma), math.ceil(3 * sigma), 0))


def _defocus_blur(img, c, rng):
    radius = int(c["radius"])
    coords = np.arange(-radius, radius + 1)
    xx, yy = np.meshgrid(coords, coords)
    disk = ((xx ** 2 + yy ** 2) <= radius ** 2).astype(np.float64)
    disk /= disk.sum()
    disk = gaussian_filter(disk, sigma=float(c["alias_blur"]), mode="constant")
    disk /= disk.sum()
    return _convolve_rgb(img, disk)


def _rain(img, c, rng):
    # spatter-style droplets: translucent water sheet at low severity,
    # opaque muddy splatter at high severity
    h, w = img.shape[:2]
    liquid = rng.normal(loc=c["loc"], scale=c["scale"], size=(h, w))
    liquid = gaussian_filter(liquid, sigma=float(c["smooth_sigma"]))
    if int(c["mode"]) == 0:
        layer = liquid.copy()
        layer[layer < c["threshold"]] = 0
        layer_u8 = np.clip(layer * 255, 0, 255).astype(np.uint8)
        dist = 255 - cv2.Canny(layer_u8, 50, 150)
        dist = cv2.distanceTransform(dist, cv2.DIST_L2, 5)
        _, dist = cv2.threshold(dist, 20, 20, cv2.THRESH_TRUNC)
        dist = cv2.blur(dist, (3, 3)).astype(np.uint8)
        dist = cv2.equalizeHist(dist)
        ker = np.array([[-2, -1, 0], [-1, 1, 1], [0, 1, 2]], dtype=np.float32)
        dist = cv2.filter2D(dist, cv2.CV_8U, ker)
        dist = cv2.blur(dist, (3, 3)).astype(np.float64)
        m = layer * dist
        peak = m.max()
        if peak <= 0:
            return img
        m = m / peak * c["intensity"]
        water = np.array([175 / 255.0, 238 / 255.0, 238 / 255.0])
        return img + m[..., None] * water[None, None, :]
    mask = (liquid > c["threshold"]).astype(np.float64)
    mask = gaussian_filter(mask, sigma=float(c["intensity"]))
    mask[mask < 0.8] = 0
    mud = np.array([63 / 255.0, 42 / 255.0, 20 / 255.0])
    return img * (1.0 - mask[..., None]) + mask[..., None] * mud[None, None, :]


def _icy_window(img, c, rng):
    h, w = img.shape[:2]
    patches = gaussian_filter(rng.standard_normal((h, w)), sigma=6.0)
    detail = gaussian_filter(rng.standard_normal((h, w)), sigma=1.2)
    field = 0.7 * patches / max(patches.std(), 1e-9) + 0.3 * detail / max(detail.std(), 1e-9)
    cut = np.quantile(field, 1.0 - c["coverage"])
    mask = np.clip((field - cut) / 0.5, 0.0, 1.0)
    # refraction: displace lookups under the ice
    d = float(c["displacement"])
    dx = gaussian_filter(rng.standard_normal((h, w)), sigma=3.0)
    dy = gaussian_filter(rng.standard_normal((h, w)), sigma=3.0)
    dx = dx / max(np.abs(dx).max(), 1e-9) * d * mask
    dy = dy / max(np.abs(dy).max(), 1e-9) * d * mask
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    warped = np.empty_like(img)
    for ch in range(3):
        warped[..., ch] = map_coordinates(img[..., ch], [yy + dy, xx + dx],
                                          order=1, mode="reflect")
    ice = np.array([0.82, 0.87, 0.93])
    a = c["opacity"] * mask[..., None]
    return warped * (1.0 - a) + ice[None, None, :] * a


def _drizzle(img, c, rng):
    h, w = img.shape[:2]
    drops = (rng.random((h, w)) < c["density"]) * rng.uniform(0.5, 1.0, size=(h, w))
    angle = rng.uniform(65.0, 80.0)
    length = int(c["length"])
    kernel = np.zeros((2 * length + 1, 2 * length + 1))
    theta = math.radians(angle)
    for i in range(length):
        r = length + int(round(-i * math.sin(theta)))
        col = length + int(round(i * math.cos(theta)))
        kernel[r, col] = 1.0
    streaks = convolve(drops, kernel, mode="constant")
    streaks = np.clip(streaks * 2.0, 0.0, 1.0)
    a = c["alpha"] * streaks[..., None]
    return img * (1.0 - 0.6 * a) + 0.9 * a


def _snow(img, c, rng):
    h, w = img.shape[:2]
    layer = rng.normal(loc=c["loc"], scale=c["scale"], size=(h, w))
    layer = _clipped_zoom(layer, float(c["zoom"]))
    layer[layer < c["threshold"]] = 0
    lo, hi = c["angle_range"]
    kernel = _motion_kernel(int(c["blur_radius"]), float(c["blur_sigma"]),
                            rng.uniform(lo, hi))
    layer = convolve(layer, kernel, mode="reflect")
    blend = c["blend"]
    lum = _luminance(img)
    grayed = np.maximum(img, (lum * 1.5 + 0.5)[..., None])
    out = blend * img + (1.0 - blend) * grayed
    return out + layer[..., None] + np.rot90(layer, k=2)[..., None]


def _pixelate(img, c, rng):
    # box-filter down and back up, through 8-bit like the codecs
    h, w = img.shape[:2]
    scale = float(c["scale"])
    u8 = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    pim = Image.fromarray(u8)
    small = pim.resize((max(int(w * scale), 1), max(int(h * scale), 1)), Image.BOX)
    big = small.resize((w, h), Image.BOX)
    return np.asarray(big, dtype=np.float64) / 255.0


def _jpeg_compression(img, c, rng):
    u8 = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    from io import BytesIO
    buf = BytesIO()
    Image.fromarray(u8).save(buf, format="JPEG", quality=int(c["quality"]))
    buf.seek(0)
    back = np.asarray(Image.open(buf).convert("RGB"), dtype=np.float64)
    return back / 255.0


def _pixel_dropout(img, c, rng):
    h, w = img.shape[:2]
    out = img.copy()
    out[rng.random((h, w)) < c["fraction"]] = 0.0
    return out


def _wave_distortion(img, c, rng):
    h, w = img.shape[:2]
    amp, period = float(c["amplitude"]), float(c["period"])
    phase_r, phase_c = rng.uniform(0, 2 * math.pi, size=2)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    rows = yy + amp * np.sin(2 * math.pi * xx / period + phase_r)
    cols = xx + amp * np.sin(2 * math.pi * yy / period + phase_c)
    out = np.empty_like(img)
    for ch in range(3):
        out[..., ch] = map_coordinates(img[..., ch], [rows, cols], order=1, mode="reflect")
    return out


_KIND_FUNCS = {
    "gaussian_noise": _gaussian_noise,
    "shot_noise": _shot_noise,
    "impulse_noise": _impulse_noise,
    "speckle_noise": _speckle_noise,
    "motion_blur": _motion_blur,
    "zoom_blur": _zoom_blur,
    "gaussian_blur": _gaussian_blur,
    "defocus_blur": _defocus_blur,
    "rain": _rain,
    "icy_window": _icy_window,
    "drizzle": _drizzle,
    "snow": _snow,
    "pixelate": _pixelate,
    "jpeg_compression": _jpeg_compression,
    "pixel_dropout": _pixel_dropout,
    "wave_distortion": _wave_distortion,
}


def _severity_params(kind: str, severity: int) -> dict:
    table = _CONSTANTS["kinds"][kind]
    params = {}
    for key, values in table.items():
        if key == "angle_range":
            params[key] = values
        else:
            params[key] = values[severity - 1]
    return params


def corrupt(img: np.ndarray, spec: CorruptionSpec, seed: int) -> np.ndarray:
    """Apply one corruption at one severity. Deterministic in (img, spec, seed)."""
    img = _check_image(img)
    if not isinstance(spec, CorruptionSpec):
        raise TypeError(f"expected CorruptionSpec, got {type(spec).__name__}")
    params = _severity_params(spec.kind, spec.severity)
    out = _KIND_FUNCS[spec.kind](img, params, _rng(seed))
    return np.clip(out, 0.0, 1.0)


def attack_noise(shape: tuple[int, ...], spec: NoiseAttackSpec, seed: int) -> np.ndarray:
    """Raw additive perturbation in 255-scale, before division and clamping.

    For the L2 attacks the returned tensor has L2 norm exactly equal to the
    amplitude. salt_and_pepper is not additive, so this helper rejects it.
    """
    if spec.kind == "salt_and_pepper":
        raise ValueError("salt_and_pepper is a replacement attack, not additive noise")
    rng = _rng(seed)
    if spec.kind == "l2_gaussian":
        direction = rng.normal(size=shape)
    else:
        direction = rng.uniform(-1.0, 1.0, size=shape)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        direction = np.ones(shape)
        norm = float(np.linalg.norm(direction))
    return direction / norm * float(spec.amplitude)


def perturb(img: np.ndarray, spec: NoiseAttackSpec, seed: int) -> np.ndarray:
    """Apply a noise attack. Deterministic in (img, spec, seed).

    L2 attacks add a random direction scaled to the requested norm in
    255-scale, then clamp. salt_and_pepper flips a pixel fraction
    amplitude/1000 to 0 or 1 equiprobably (whole pixels).
    """
    img = _check_image(img)
    if not isinstance(spec, NoiseAttackSpec):
        raise TypeError(f"expected NoiseAttackSpec, got {type(spec).__name__}")
    if spec.kind == "salt_and_pepper":
        rng = _rng(seed)
        h, w = img.shape[:2]
        divisor = _CONSTANTS["attacks"]["salt_pepper_fraction_divisor"]
        fraction = spec.amplitude / divisor
        out = img.copy()
        flip = rng.random((h, w)) < fraction
        salt = rng.random((h, w)) < 0.5
        out[flip & salt] = 1.0
        out[flip & ~salt] = 0.0
        return out
    noise = attack_noise(img.shape, spec, seed)
    return np.clip(img + noise / 255.0, 0.0, 1.0)


def degrade(img: np.ndarray, spec: DegradationSpec, seed: int) -> np.ndarray:
    """Dispatch to corrupt() or perturb() based on the spec type."""
    if isinstance(spec, CorruptionSpec):
        return corrupt(img, spec, seed)
    if isinstance(spec, NoiseAttackSpec):
        return perturb(img, spec, seed)
    raise TypeError(f"unknown spec type {type(spec).__name__}")
