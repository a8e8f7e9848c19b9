"""Quantile quantizations of continuous reference laws on R."""
from __future__ import annotations

import logging

import numpy as np
from scipy.special import ndtri

from ..errors import InputError
from .measures import DiscreteMeasure

logger = logging.getLogger(__name__)


def _levels(m: int) -> np.ndarray:
    if int(m) != m or m < 2:
        raise InputError(f"m must be an integer >= 2, got {m!r}")
    return (np.arange(1, int(m) + 1) - 0.5) / m


def quantize_gaussian(m: int, sigma: float = 1.0) -> DiscreteMeasure:
    """m equal-weight atoms at sigma * Phi^{-1}((k - 1/2) / m), exactly antisymmetric."""

    if not (np.isfinite(sigma) and sigma > 0):
        raise InputError(f"sigma must be > 0, got {sigma!r}")
    lower = sigma * ndtri(_levels(m)[: m // 2])
    middle = [0.0] if m % 2 else []
    atoms = np.concatenate([lower, middle, -lower[::-1]])
    return DiscreteMeasure(atoms, np.full(m, 1.0 / m))


def quantize_laplace(m: int, left_scale: float = 1.0, right_scale: float = 1.0) -> DiscreteMeasure:
    """Quantile quantization of the two-sided exponential law with different tail scales.

    The density is proportional to exp(x / left_scale) on x < 0 and exp(-x / right_scale)
    on x >= 0; its mean is right_scale - left_scale.
    """

    if not (left_scale > 0 and right_scale > 0):
        raise InputError("both scales must be > 0")
    levels = _levels(m)
    total = left_scale + right_scale
    split = left_scale / total
    atoms = np.where(
        levels < split,
        left_scale * np.log(np.minimum(levels, split) * total / left_scale),
        -right_scale * np.log(np.maximum(1.0 - levels, 1.0 - split) * total / right_scale),
    )
    return DiscreteMeasure(atoms, np.full(m, 1.0 / m))


__all__ = ["quantize_gaussian", "quantize_laplace"]
