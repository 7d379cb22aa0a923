"""Reconstruction quality metrics against a reference cube.

Conventions, fixed so numbers are comparable across runs:

* RMSE is reported on the 0-255 scale: 255 times the root mean square error of
  [0, 1]-scaled cubes.
* PSNR uses peak 1.0 and averages per-band values, each capped at 99 dB (the
  cap is what an identical pair reports). A whole-cube variant is available
  behind ``psnr_global``.
* SAM is the mean spectral angle in degrees; pixels where either spectrum has
  zero norm are skipped. Cosines are clipped into [-1, 1] before arccos.
* ERGAS uses the resolution ratio ``factor``; bands whose reference mean is
  below 1e-6 are excluded with a warning.
* SSIM follows the single-scale formulation with an 11x11 Gaussian window
  (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.0, window-weighted
  moments, and 'valid'-mode borders; per-band values are averaged.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .cube import HsiCube
from .errors import ValidationError

__all__ = ["MetricReport", "CSV_HEADER", "evaluate"]

CSV_HEADER = "rmse,psnr,ergas,sam,ssim"

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_PSNR_CAP = 99.0


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    psnr: float
    sam: float
    ergas: float
    ssim: float

    def to_dict(self) -> dict[str, float]:
        return {
            "rmse": self.rmse,
            "psnr": self.psnr,
            "sam": self.sam,
            "ergas": self.ergas,
            "ssim": self.ssim,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> str:
        """Values in the column order of ``CSV_HEADER``."""
        return ",".join(
            format(v, ".10g") for v in (self.rmse, self.psnr, self.ergas, self.sam, self.ssim)
        )


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    offsets = np.arange(size) - half
    prof = np.exp(-0.5 * (offsets / sigma) ** 2)
    win = np.outer(prof, prof)
    return win / win.sum()


def _ssim_band(a: np.ndarray, b: np.ndarray, win: np.ndarray, c1: float, c2: float) -> float:
    mu_a = fftconvolve(a, win, mode="valid")
    mu_b = fftconvolve(b, win, mode="valid")
    var_a = fftconvolve(a * a, win, mode="valid") - mu_a * mu_a
    var_b = fftconvolve(b * b, win, mode="valid") - mu_b * mu_b
    cov = fftconvolve(a * b, win, mode="valid") - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _psnr_from_mse(mse: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        vals = 10.0 * np.log10(1.0 / mse)
    return np.minimum(vals, _PSNR_CAP)


def evaluate(
    x_hat: HsiCube, x_ref: HsiCube, factor: int, psnr_global: bool = False
) -> MetricReport:
    """All five metrics of ``x_hat`` against the reference ``x_ref``."""
    if x_hat.data.shape != x_ref.data.shape:
        raise ValidationError(
            f"cube shapes differ: {x_hat.data.shape} vs {x_ref.data.shape}"
        )
    if int(factor) != factor or factor < 1:
        raise ValidationError(f"factor must be a positive integer, got {factor!r}")
    if min(x_hat.height, x_hat.width) < _SSIM_WINDOW:
        raise ValidationError(
            f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} for the SSIM window"
        )
    a = x_hat.data
    b = x_ref.data
    diff = a - b
    mse_b = np.mean(diff * diff, axis=(1, 2))

    rmse = 255.0 * float(np.sqrt(np.mean(diff * diff)))

    if psnr_global:
        psnr = float(_psnr_from_mse(np.asarray(np.mean(diff * diff))))
    else:
        psnr = float(np.mean(_psnr_from_mse(mse_b)))

    flat_a = x_hat.as_matrix()
    flat_b = x_ref.as_matrix()
    dots = np.sum(flat_a * flat_b, axis=0)
    sq_a = np.sum(flat_a * flat_a, axis=0)
    sq_b = np.sum(flat_b * flat_b, axis=0)
    valid = (sq_a > 0) & (sq_b > 0)
    if np.any(valid):
        # sqrt of the product (not product of sqrts) so identical spectra give
        # cosine exactly 1
        cosines = np.clip(dots[valid] / np.sqrt(sq_a[valid] * sq_b[valid]), -1.0, 1.0)
        sam = float(np.mean(np.degrees(np.arccos(cosines))))
    else:
        sam = 0.0

    ref_means = np.mean(b, axis=(1, 2))
    usable = ref_means >= 1e-6
    if not np.all(usable):
        warnings.warn(
            f"ERGAS: excluded {int(np.sum(~usable))} band(s) with near-zero reference mean",
            stacklevel=2,
        )
    if np.any(usable):
        ratios = mse_b[usable] / ref_means[usable] ** 2
        ergas = (100.0 / factor) * float(np.sqrt(np.mean(ratios)))
    else:
        ergas = 0.0

    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    ssim = float(np.mean([_ssim_band(a[i], b[i], win, c1, c2) for i in range(x_hat.bands)]))

    return MetricReport(rmse=rmse, psnr=psnr, sam=sam, ergas=ergas, ssim=ssim)
