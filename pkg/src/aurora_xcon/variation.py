"""Uniform parent selection and the Iso+LineDD directional operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VariationParams:
    iso_sigma: float = 0.2
    line_sigma: float = 0.0
    batch_size: int = 64

    def __post_init__(self):
        if self.iso_sigma < 0 or self.line_sigma < 0:
            raise ValueError("variation scales must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


def select_uniform(n_members: int, b: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Indices of ``b`` parent pairs drawn uniformly with replacement."""
    if n_members < 1:
        raise ValueError("cannot select from an empty repertoire")
    first = rng.integers(0, n_members, b)
    second = rng.integers(0, n_members, b)
    return first, second


def iso_line_dd(x1, x2, params: VariationParams, rng: np.random.Generator) -> np.ndarray:
    """x1 + iso_sigma * N(0, I) + line_sigma * N(0, 1) * (x2 - x1).

    Works on single genotypes or on (b, P) stacks; in the batched form each
    row draws its own line coefficient.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError(f"parent shapes differ: {x1.shape} vs {x2.shape}")
    iso = rng.standard_normal(x1.shape)
    line = rng.standard_normal(x1.shape[:-1] + (1,))
    return x1 + params.iso_sigma * iso + params.line_sigma * line * (x2 - x1)
