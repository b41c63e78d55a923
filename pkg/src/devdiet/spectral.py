"""Per-channel 2-D DFT with power thresholding.

Convention (recorded in run manifests): the forward transform is the plain
unnormalized DFT, X[u,v] = sum_xy img[x,y] * exp(-2*pi*i*(ux/H + vy/W)); the
inverse divides by H*W. Thresholding compares squared coefficient magnitude
(power) against an absolute cutoff; the DC coefficient of each channel is
exempt so the mean always survives.

`reference_dft` is a deliberately slow O(N^4) double-sum reimplementation
kept as an independent check on the production FFT path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DFT_CONVENTION = "forward unnormalized; inverse scaled by 1/(H*W); power = |coef|^2"

REFERENCE_DFT_MAX_SIDE = 64


@dataclass(frozen=True)
class SpectralImage:
    """Complex DFT coefficients of an RGB image, one plane per channel."""

    coefficients: np.ndarray  # (H, W, 3) complex128
    height: int
    width: int

    def __post_init__(self):
        c = self.coefficients
        if c.ndim != 3 or c.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) coefficients, got {c.shape}")
        if c.shape[0] != self.height or c.shape[1] != self.width:
            raise ValueError(
                f"coefficient shape {c.shape[:2]} disagrees with ({self.height}, {self.width})"
            )


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("zero-sized image")
    return img.astype(np.float64, copy=False)


def forward_transform(img: np.ndarray) -> SpectralImage:
    """Unnormalized per-channel 2-D DFT of an (H, W, 3) image."""
    img = _check_image(img)
    coef = np.fft.fft2(img, axes=(0, 1)).astype(np.complex128, copy=False)
    return SpectralImage(coefficients=coef, height=img.shape[0], width=img.shape[1])


def inverse_transform(spec: SpectralImage) -> np.ndarray:
    """Inverse DFT (scaled by 1/(H*W)); returns the real image plane.

    Raises if the reconstruction has residual imaginary magnitude above
    1e-4, which indicates corrupted coefficients. No [0, 1] clamping here;
    that belongs to the caller's final stage.
    """
    out = np.fft.ifft2(spec.coefficients, axes=(0, 1))
    resid = float(np.abs(out.imag).max())
    if resid > 1e-4:
        raise ValueError(f"inverse transform has residual imaginary magnitude {resid:g}")
    return np.ascontiguousarray(out.real)


def max_power(spec: SpectralImage) -> float:
    """Largest squared coefficient magnitude across all three channels."""
    return float((spec.coefficients.real ** 2 + spec.coefficients.imag ** 2).max())


def apply_amplitude_threshold(spec: SpectralImage, threshold: float) -> SpectralImage:
    """Zero every coefficient whose power falls strictly below `threshold`.

    The [0, 0] (DC) coefficient of each channel is exempt. threshold <= 0
    returns the spectrum unchanged; a threshold above max_power leaves only
    the DC terms.
    """
    if not np.isfinite(threshold):
        raise ValueError(f"threshold must be finite, got {threshold}")
    coef = spec.coefficients.copy()
    if threshold > 0:
        power = coef.real ** 2 + coef.imag ** 2
        kill = power < threshold
        kill[0, 0, :] = False
        coef[kill] = 0
    return SpectralImage(coefficients=coef, height=spec.height, width=spec.width)


def surviving_count(spec: SpectralImage, threshold: float) -> int:
    """Number of non-DC coefficients that survive the power threshold."""
    coef = spec.coefficients
    power = coef.real ** 2 + coef.imag ** 2
    keep = power >= threshold
    keep[0, 0, :] = True
    return int(keep.sum())


def spectral_power_sum(spec: SpectralImage) -> float:
    """Total power, sum |X[u,v]|^2, over all channels (Parseval checks)."""
    return float((spec.coefficients.real ** 2 + spec.coefficients.imag ** 2).sum())


def reference_dft(img: np.ndarray) -> SpectralImage:
    """Brute-force double-sum DFT for small images (sides <= 64).

    Independent of the FFT path on purpose: each output frequency is an
    explicit sum over pixels. Quartic cost, test use only.
    """
    img = _check_image(img)
    h, w = img.shape[0], img.shape[1]
    if h > REFERENCE_DFT_MAX_SIDE or w > REFERENCE_DFT_MAX_SIDE:
        raise ValueError(
            f"reference_dft is limited to {REFERENCE_DFT_MAX_SIDE}x{REFERENCE_DFT_MAX_SIDE}, "
            f"got {h}x{w}"
        )
    x = np.arange(h)
    y = np.arange(w)
    coef = np.zeros((h, w, 3), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            phase = np.exp(-2j * np.pi * (u * x[:, None] / h + v * y[None, :] / w))
            for ch in range(3):
                coef[u, v, ch] = np.sum(img[:, :, ch] * phase)
    return SpectralImage(coefficients=coef, height=h, width=w)


def reference_inverse_dft(spec: SpectralImage) -> np.ndarray:
    """Brute-force inverse counterpart of reference_dft (test use only)."""
    h, w = spec.height, spec.width
    if h > REFERENCE_DFT_MAX_SIDE or w > REFERENCE_DFT_MAX_SIDE:
        raise ValueError("reference_inverse_dft is limited to 64x64")
    u = np.arange(h)
    v = np.arange(w)
    out = np.zeros((h, w, 3), dtype=np.complex128)
    for x in range(h):
        for y in range(w):
            phase = np.exp(2j * np.pi * (x * u[:, None] / h + y * v[None, :] / w))
            for ch in range(3):
                out[x, y, ch] = np.sum(spec.coefficients[:, :, ch] * phase)
    return (out / (h * w)).real
