"""Global histogram thresholding baselines (minimum error and Yen)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_gray
from .imaging import GrayImage

METHODS = ("minimum_error", "yen")
LEVELS = np.arange(256, dtype=np.float64)


class DegenerateHistogramError(ValueError):
    pass


@dataclass(frozen=True)
class Histogram256:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (256,):
            raise ValueError("a histogram needs exactly 256 bins")
        if counts.min() < 0 or int(counts.sum()) != self.total:
            raise ValueError("bin counts must be non-negative and sum to total")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, counts) -> Histogram256:
        counts = np.asarray(counts, dtype=np.int64)
        return cls(counts, int(counts.sum()))


def _pixels8(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        if img.bit_depth != 8:
            raise ValueError("thresholding expects an 8-bit image")
        return img.pixels
    arr = check_gray(img)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("thresholding expects intensities in [0, 255]")
    return arr.astype(np.uint8, copy=False)


def histogram(img) -> Histogram256:
    pixels = _pixels8(img)
    counts = np.bincount(pixels.ravel(), minlength=256).astype(np.int64)
    return Histogram256(counts, int(pixels.size))


def minimum_error_criterion(counts) -> np.ndarray:
    """Kittler-Illingworth J(t) for every level; NaN where a class is empty or has zero variance.

    The lower class is ``v <= t``.
    """
    h = np.asarray(counts, dtype=np.float64)
    p = h / h.sum()
    occupied = np.cumsum(h > 0)
    n_occ = occupied[-1]

    p1 = np.cumsum(p)
    m1 = np.cumsum(p * LEVELS)
    s1 = np.cumsum(p * LEVELS**2)
    p2 = p.sum() - p1
    m2 = m1[-1] - m1
    s2 = s1[-1] - s1

    out = np.full(256, np.nan)
    # zero variance <=> a single occupied bin in the class
    ok = (occupied >= 2) & (n_occ - occupied >= 2)
    if not ok.any():
        return out
    P1, P2 = p1[ok], p2[ok]
    mu1, mu2 = m1[ok] / P1, m2[ok] / P2
    var1 = np.maximum(s1[ok] / P1 - mu1**2, np.finfo(float).tiny)
    var2 = np.maximum(s2[ok] / P2 - mu2**2, np.finfo(float).tiny)
    out[ok] = (
        1
        + (P1 * np.log(var1) + P2 * np.log(var2))
        - 2 * (P1 * np.log(P1) + P2 * np.log(P2))
    )
    return out


def yen_criterion(counts) -> np.ndarray:
    """Yen's maximum-correlation criterion per level; NaN where a class is empty."""
    h = np.asarray(counts, dtype=np.float64)
    p = h / h.sum()
    occupied = np.cumsum(h > 0)
    p1 = np.cumsum(p)
    p2 = p.sum() - p1
    g1 = np.cumsum(p**2)
    g2 = g1[-1] - g1
    out = np.full(256, np.nan)
    ok = (occupied >= 1) & (occupied[-1] - occupied >= 1)
    out[ok] = -np.log(g1[ok] * g2[ok]) + 2 * np.log(p1[ok] * p2[ok])
    return out


def _split_levels(counts) -> np.ndarray:
    occupied = np.cumsum(np.asarray(counts) > 0)
    return np.flatnonzero((occupied >= 1) & (occupied[-1] - occupied >= 1))


def _pick(levels: np.ndarray) -> int:
    # plateaus of equal criterion resolve to their lower median
    return int(levels[(len(levels) - 1) // 2])


def compute_threshold(hist, method: str = "minimum_error") -> int:
    """Exhaustive scan of all 256 levels; foreground is ``v > level``.

    Ties in the criterion resolve to the lower median of the tied levels.
    When every splitting level is degenerate for the minimum-error criterion
    (each class a single spike), all of them count as tied.
    """
    counts = hist.counts if isinstance(hist, Histogram256) else np.asarray(hist)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    candidates = _split_levels(counts)
    if candidates.size == 0:
        raise DegenerateHistogramError("degenerate histogram: fewer than two occupied bins")

    if method == "minimum_error":
        crit = minimum_error_criterion(counts)
        best = np.nanmin(crit) if np.isfinite(crit).any() else None
    else:
        crit = -yen_criterion(counts)
        best = np.nanmin(crit)
    if best is None:
        return _pick(candidates)
    tol = 1e-12 * max(1.0, abs(best))
    tied = np.flatnonzero(np.isfinite(crit) & (crit <= best + tol))
    return _pick(tied)


def apply_threshold(img, level: int, foreground: str = "above") -> np.ndarray:
    """``above``: foreground where v > level; ``below``: where v <= level."""
    if not 0 <= level <= 255:
        raise ValueError("level must lie in [0, 255]")
    pixels = _pixels8(img)
    if foreground == "above":
        return pixels > level
    if foreground == "below":
        return pixels <= level
    raise ValueError(f"foreground must be 'above' or 'below', got {foreground!r}")


class ThresholdSegmenter(BaseEstimator, TransformerMixin):
    """Learn a global threshold from an 8-bit image and binarise with it."""

    def __init__(self, method: str = "minimum_error", foreground: str = "above"):
        self.method = method
        self.foreground = foreground

    def fit(self, X, y=None):
        self.threshold_ = compute_threshold(histogram(X), self.method)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        return apply_threshold(X, self.threshold_, self.foreground)
