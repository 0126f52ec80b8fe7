"""Input validation helpers shared by the estimators and the functional API."""
from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid evaluation or analysis parameters."""


def check_mask(mask, name: str = "mask") -> np.ndarray:
    """Return ``mask`` as a 2D boolean array.

    Nonzero values are foreground.
    """
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.dtype != bool:
        arr = arr != 0
    return arr


def check_gray(pixels, name: str = "image") -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a single-channel 2D array, got shape {arr.shape}")
    if not (np.issubdtype(arr.dtype, np.integer) or np.issubdtype(arr.dtype, np.floating)):
        raise ValueError(f"{name} has non-numeric dtype {arr.dtype}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, names=("a", "b")) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"dimension mismatch: {names[0]} has shape {a.shape}, {names[1]} has shape {b.shape}"
        )


def check_iou_threshold(threshold: float) -> float:
    threshold = float(threshold)
    # matches are only unique when T > 0.5
    if not 0.5 < threshold <= 1.0:
        raise ConfigurationError(f"IoU threshold must lie in (0.5, 1], got {threshold}")
    return threshold


def check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError(f"beta must lie in [0, 1], got {beta}")
    return beta


def check_non_negative(value, name: str):
    if value < 0:
        raise ConfigurationError(f"{name} must be >= 0, got {value}")
    return value


def check_positive(value, name: str):
    if not value > 0:
        raise ConfigurationError(f"{name} must be > 0, got {value}")
    return value
