"""Deterministic sample generation for verification runs.

Points are drawn from the unit ball of the ambient norm; sparse samples live
on a finite index window (a perturbation's declared support plus slack, by
default).  Everything is driven by an explicit numpy generator so identical
seeds reproduce identical samples.
"""

from __future__ import annotations

import numpy as np

from .operators import GHOperator, MatrixOperator
from .perturbations import Perturbation
from .vectors import DenseVector, NormKind, SparseVector, StateVector, norm

__all__ = ["sample_window", "sample_points", "sample_pairs"]

#: index slack added around a perturbation's support window
WINDOW_SLACK = 10


def sample_window(beta: Perturbation | None) -> tuple[int, int]:
    """Index window for sparse samples: the perturbation support plus slack."""
    if beta is not None and beta.support_window is not None:
        lo, hi = beta.support_window
        return lo - WINDOW_SLACK, hi + WINDOW_SLACK
    return -WINDOW_SLACK, WINDOW_SLACK


def _ball_point(rng: np.random.Generator, count: int, kind: NormKind) -> np.ndarray:
    coords = rng.uniform(-1.0, 1.0, size=count)
    if not kind.is_sup:
        size = float(np.sum(np.abs(coords) ** kind.p) ** (1.0 / kind.p))
        if size > 1.0:
            coords = coords / size
    return coords


def sample_points(
    rng: np.random.Generator,
    op: GHOperator,
    n: int,
    beta: Perturbation | None = None,
    radius: float = 1.0,
) -> list[StateVector]:
    """n points in the ambient ball of the given radius, backend-matched to op."""
    kind = op.norm_kind
    out: list[StateVector] = []
    if isinstance(op, MatrixOperator):
        for _ in range(n):
            out.append(DenseVector(radius * _ball_point(rng, op.dim, kind)))
        return out
    lo, hi = sample_window(beta)
    idx = range(lo, hi + 1)
    for _ in range(n):
        coords = radius * _ball_point(rng, len(idx), kind)
        out.append(SparseVector({i: v for i, v in zip(idx, coords)}))
    return out


def sample_pairs(
    rng: np.random.Generator,
    op: GHOperator,
    n: int,
    max_distance: float,
    beta: Perturbation | None = None,
    min_distance: float = 1e-3,
) -> list[tuple[StateVector, StateVector]]:
    """Point pairs with ambient distance in [min_distance, max_distance]."""
    if not (0.0 < min_distance < max_distance):
        raise ValueError("need 0 < min_distance < max_distance")
    kind = op.norm_kind
    base = sample_points(rng, op, n, beta)
    pairs = []
    for x in base:
        for _ in range(64):
            (step,) = sample_points(rng, op, 1, beta, radius=max_distance / 2.0)
            y = x + step
            dist = norm(x - y, kind)
            if min_distance <= dist <= max_distance:
                pairs.append((x, y))
                break
        else:
            raise RuntimeError("could not draw a pair within the distance band")
    return pairs
