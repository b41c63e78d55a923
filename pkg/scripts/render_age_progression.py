#!/usr/bin/env python3
"""Render a developmental age progression for one image.

Applies the age-parameterized visual-diet transform at a sweep of ages and
writes the results side by side as a single montage PNG, plus the per-age
schedule values (acuity MAR, contrast sensitivity, chromatic sensitivity)
as CSV on stdout. With no --image argument a synthetic test card is used,
so the script runs out of the box:

    python3 scripts/render_age_progression.py --out montage.png
    python3 scripts/render_age_progression.py --image photo.png \
        --ages 0,3,6,12,24,60,300 --out strip.png
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from devdiet.pipeline import load_image, save_png
from devdiet.schedules import (
    acuity_at,
    build_schedule_set,
    chromatic_sensitivity_at,
    contrast_sensitivity_at,
)
from devdiet.transforms import DvdConfig, dvd_transform


def synthetic_card(size: int = 128) -> np.ndarray:
    """A colorful test card with edges at several scales."""
    rng = np.random.Generator(np.random.Philox(key=7))
    y, x = np.mgrid[0:size, 0:size] / size
    img = np.stack(
        [
            0.5 + 0.5 * np.sin(2 * np.pi * 6 * x),
            0.5 + 0.5 * np.sin(2 * np.pi * 3 * y),
            np.clip(x + y, 0, 1),
        ],
        axis=2,
    )
    # checkerboard patch for high-frequency content
    block = ((np.arange(size) // 8)[:, None] + (np.arange(size) // 8)[None, :]) % 2
    img[: size // 3, : size // 3] = block[: size // 3, : size // 3, None]
    img += rng.normal(0.0, 0.02, img.shape)
    return np.clip(img, 0.0, 1.0)


def parse_ages(text: str) -> list[float]:
    ages = [float(tok) for tok in text.split(",") if tok.strip()]
    for age in ages:
        if not 0.0 <= age <= 300.0:
            raise argparse.ArgumentTypeError(f"age {age} outside [0, 300] months")
    return ages


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--image", type=Path, default=None,
                        help="input image (default: built-in synthetic card)")
    parser.add_argument("--ages", type=parse_ages, default="0,3,6,12,24,60,120,300",
                        help="comma-separated ages in months (default: %(default)s)")
    parser.add_argument("--out", type=Path, default=Path("age_progression.png"),
                        help="output montage path (default: %(default)s)")
    parser.add_argument("--gap", type=int, default=4,
                        help="pixel gap between panels (default: %(default)s)")
    args = parser.parse_args(argv)
    ages = parse_ages(args.ages) if isinstance(args.ages, str) else args.ages

    img = synthetic_card() if args.image is None else load_image(args.image)
    cfg = DvdConfig()
    schedule = build_schedule_set()

    panels = [dvd_transform(img, age, cfg, schedule) for age in ages]
    h, w, _ = img.shape
    montage = np.ones((h, len(panels) * w + (len(panels) - 1) * args.gap, 3))
    for i, panel in enumerate(panels):
        x0 = i * (w + args.gap)
        montage[:, x0 : x0 + w] = panel
    save_png(montage, args.out)

    print("age_months,acuity_mar,contrast_sensitivity,chromatic_sensitivity")
    for age in ages:
        print(
            f"{age:g},{acuity_at(schedule, age):.6f},"
            f"{contrast_sensitivity_at(schedule, age):.6f},"
            f"{chromatic_sensitivity_at(schedule, age):.6f}"
        )
    print(f"wrote {args.out} ({len(panels)} panels, ages {ages})", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
