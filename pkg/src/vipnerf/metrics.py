"""Quantitative evaluation: PSNR, SSIM, depth RMSE/SROCC, and binary prior
precision/recall/F1, collected into a JSON-serializable report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d
from scipy.stats import spearmanr

__all__ = [
    "MetricsReport",
    "psnr",
    "ssim",
    "depth_rmse_srocc",
    "prior_prf",
]

_LUMA = np.array([0.299, 0.587, 0.114])


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 * log10(1 / MSE) for images in [0, 1]; +inf when identical."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    k1: float = 0.01,
    k2: float = 0.03,
    window: int = 11,
    sigma: float = 1.5,
) -> float:
    """Structural similarity on luma, Gaussian-weighted 11x11 windows,
    dynamic range 1.0, averaged over valid (fully covered) window centers."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a = a @ _LUMA
        b = b @ _LUMA
    if min(a.shape) < window:
        raise ValueError(f"image {a.shape} smaller than the {window}x{window} window")
    kernel = _gaussian_kernel(window, sigma)
    c1 = k1**2
    c2 = k2**2

    def filt(x):
        return convolve2d(x, kernel, mode="valid")

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def depth_rmse_srocc(
    pred: np.ndarray, ref: np.ndarray, valid: np.ndarray | None = None
) -> tuple[float, float]:
    """RMSE over valid pixels and Spearman rank correlation (ties midranked)."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if valid is None:
        valid = np.ones(pred.shape, dtype=bool)
    p = pred[valid]
    r = ref[valid]
    if p.size < 2:
        raise ValueError("need at least 2 valid pixels")
    rmse = float(np.sqrt(np.mean((p - r) ** 2)))
    rho = spearmanr(p, r).statistic
    return rmse, float(rho)


def prior_prf(
    predicted: np.ndarray, reference: np.ndarray
) -> tuple[float | None, float | None, float | None]:
    """Precision/recall/F1 with visible (=1) as the positive class.

    Undefined ratios (no predicted positives, or no reference positives) are
    returned as None.
    """
    predicted = np.asarray(predicted).astype(bool)
    reference = np.asarray(reference).astype(bool)
    if predicted.shape != reference.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {reference.shape}")
    tp = int(np.sum(predicted & reference))
    fp = int(np.sum(predicted & ~reference))
    fn = int(np.sum(~predicted & reference))
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision and recall:
        f1 = 2 * precision * recall / (precision + recall)
    elif precision == 0.0 or recall == 0.0:
        f1 = 0.0
    else:
        f1 = None
    return precision, recall, f1


@dataclass
class MetricsReport:
    """Aggregate and per-view metrics; `lpips` is reserved and always null."""

    psnr: float | None = None
    psnr_infinite: bool = False
    ssim: float | None = None
    depth_rmse: float | None = None
    depth_srocc: float | None = None
    prior_precision: float | None = None
    prior_recall: float | None = None
    prior_f1: float | None = None
    lpips: None = None
    per_view: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def aggregate_psnr(values: list[float]) -> tuple[float | None, bool]:
        """Mean PSNR; an infinite member flags the aggregate as infinite."""
        if any(math.isinf(v) for v in values):
            return None, True
        return float(np.mean(values)), False
