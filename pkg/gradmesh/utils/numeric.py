from typing import Iterable

import numpy as np


def running_mean(arrays: Iterable[np.ndarray]) -> np.ndarray:
    """
    Elementwise mean of equal-length float64 arrays, accumulated in iteration order.

    Uses m <- m + (x - m) / k so identical inputs come back bitwise unchanged. Every
    aggregation path (in-database, client-side, chunked) goes through here, which keeps
    aggregates bitwise-equal across strategies for the same inputs in the same order.
    """
    mean: np.ndarray | None = None
    for k, array in enumerate(arrays, start=1):
        values = np.asarray(array, dtype=np.float64)
        if mean is None:
            mean = values.copy()
            continue
        if values.shape != mean.shape:
            raise ValueError(f"cannot average arrays of shapes {mean.shape} and {values.shape}")
        mean = mean + (values - mean) / k
    if mean is None:
        raise ValueError("running_mean of an empty sequence")
    return mean


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / max(||a||, ||b||); 0 when both are zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale


def max_relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    """Largest elementwise |a - b| relative to the largest magnitude of b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(float(np.max(np.abs(b))) if b.size else 0.0, 1e-300)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0
