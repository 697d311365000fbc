"""Shared oracles and sample builders for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ghlin import SparseVector, WeightSpec


def random_sparse(rng: np.random.Generator, window=range(-5, 6), density=0.7) -> SparseVector:
    coords = {}
    for i in window:
        if rng.uniform() < density:
            v = rng.uniform(-2.0, 2.0)
            if v != 0.0:
                coords[i] = v
    return SparseVector(coords)


def weight_array(spec: WeightSpec, lo: int, hi: int) -> np.ndarray:
    return np.array([spec.weight(i) for i in range(lo, hi + 1)])


def brute_force_margins(spec: WeightSpec, k_max: int = 500, n: int = 200) -> tuple[float, float]:
    """Limit of the two-sided weight-product geometric means, by extrapolation.

    For eventually constant weights the log of the windowed supremum /
    infimum at window length n equals the limit plus a constant over n, so
    evaluating at n and 2n and eliminating the 1/n term recovers the limit
    up to float rounding.  The windows sweep k in [0, k_max].
    """

    def log_sup_left(nn: int) -> float:
        logs = np.log(np.abs(weight_array(spec, -k_max - nn, 0)))
        csum = np.concatenate([[0.0], np.cumsum(logs)])
        # window sums of length nn+1 ending at index -k, k = 0..k_max
        sums = csum[nn + 1 :] - csum[: -(nn + 1)]
        return float(np.max(sums)) / nn

    def log_inf_right(nn: int) -> float:
        logs = np.log(np.abs(weight_array(spec, 0, k_max + nn)))
        csum = np.concatenate([[0.0], np.cumsum(logs)])
        sums = csum[nn + 1 :] - csum[: -(nn + 1)]
        return float(np.min(sums)) / nn

    left = 2.0 * log_sup_left(n) - log_sup_left(n // 2)
    right = 2.0 * log_inf_right(n) - log_inf_right(n // 2)
    return math.exp(left), math.exp(right)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
