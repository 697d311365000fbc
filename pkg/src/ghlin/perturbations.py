"""Bounded Lipschitz perturbations with certified bounds.

A perturbation carries its evaluator together with certified bounds on the
sup norm and the Lipschitz constant.  "Analytic" certification means the
bounds were derived in closed form; "sampled" bounds come from finite pair
sampling and are flagged as non-certified.

The cutoff construction turns a locally Lipschitz nonlinearity vanishing at
the origin into a globally small bounded Lipschitz map that agrees with it
on an inner ball, and the perturbed-inverse solver inverts T + beta by
contraction iteration with an exact a-posteriori residual certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .operators import GHOperator
from .vectors import (
    SUP_NORM,
    NormKind,
    SparseVector,
    StateVector,
    norm,
    zero_like,
)
from .vectors import _dense_raw, _sparse_raw

__all__ = [
    "Perturbation",
    "CutoffProfile",
    "ContractionError",
    "IterationLimitError",
    "zero_perturbation",
    "constant_perturbation",
    "sine_perturbation",
    "saturating_perturbation",
    "cutoff",
    "perturbed_apply",
    "solve_perturbed_inverse",
    "perturbation_from_descriptor",
]


class ContractionError(ValueError):
    """The contraction condition for an iterative solve is violated."""


class IterationLimitError(RuntimeError):
    """An iteration cap was exhausted before the tolerance was met."""


@dataclass
class Perturbation:
    """Map from the space to itself with certified sup / Lipschitz bounds.

    ``support_window`` declares, for sparse backends, a finite index window
    containing the support of every value; it keeps series terms finitely
    supported and drives default sampling windows.
    """

    func: Callable[[StateVector], StateVector]
    sup_bound: float
    lip_bound: float
    certification: str = "analytic"
    n_samples: int = 0
    support_window: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.certification not in ("analytic", "sampled"):
            raise ValueError(f"unknown certification {self.certification!r}")
        for name, val in (("sup_bound", self.sup_bound), ("lip_bound", self.lip_bound)):
            if not math.isfinite(val) or val < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {val}")

    def __call__(self, x: StateVector) -> StateVector:
        return self.func(x)

    @property
    def is_zero(self) -> bool:
        return self.sup_bound == 0.0


def zero_perturbation() -> Perturbation:
    return Perturbation(func=zero_like, sup_bound=0.0, lip_bound=0.0)


def constant_perturbation(b: StateVector, norm_kind: NormKind = SUP_NORM) -> Perturbation:
    """The constant map x -> b; sup bound |b|, Lipschitz bound 0."""
    window = None
    if isinstance(b, SparseVector) and len(b):
        sup_idx = b.support()
        window = (sup_idx[0], sup_idx[-1])

    def func(x: StateVector) -> StateVector:
        if type(x) is not type(b):
            raise ValueError("constant perturbation backend does not match the input")
        return b

    return Perturbation(
        func=func,
        sup_bound=norm(b, norm_kind),
        lip_bound=0.0,
        support_window=window,
    )


def _window_sup_scale(count: int, norm_kind: NormKind) -> float:
    # sup norm of a vector with `count` entries of unit size
    return 1.0 if norm_kind.is_sup else float(count) ** (1.0 / norm_kind.p)


def sine_perturbation(
    amplitude: float,
    frequency: float,
    window: Iterable[int],
    norm_kind: NormKind = SUP_NORM,
) -> Perturbation:
    """Coordinatewise x -> a*sin(omega*x_n) on the given index window.

    Certified bounds: sup a (times |W|^(1/p) for an l^p ambient norm) and
    Lipschitz constant a*omega.
    """
    if amplitude < 0 or frequency < 0:
        raise ValueError("amplitude and frequency must be >= 0")
    idx = tuple(sorted(set(int(i) for i in window)))
    if not idx:
        raise ValueError("sine perturbation needs a nonempty window")
    a, om = float(amplitude), float(frequency)

    def func(x: StateVector) -> StateVector:
        if isinstance(x, SparseVector):
            out = {}
            for i in idx:
                v = a * math.sin(om * x[i])
                if v != 0.0:
                    out[i] = v
            return _sparse_raw(out)
        arr = np.zeros(x.dim)
        for i in idx:
            if 0 <= i < x.dim:
                arr[i] = a * math.sin(om * x.array[i])
        return _dense_raw(arr)

    return Perturbation(
        func=func,
        sup_bound=a * _window_sup_scale(len(idx), norm_kind),
        lip_bound=a * om,
        support_window=(idx[0], idx[-1]),
    )


def saturating_perturbation(
    amplitude: float,
    scale: float,
    window: Iterable[int] | None = None,
    norm_kind: NormKind = SUP_NORM,
) -> Perturbation:
    """Coordinatewise saturating map x -> a*tanh(s*x_n), slope a*s at the origin.

    Without a window the map acts on every coordinate, which is fine for the
    sup norm; an l^p ambient norm on the sparse backend needs a window for
    the sup bound to exist.
    """
    if amplitude < 0 or scale < 0:
        raise ValueError("amplitude and scale must be >= 0")
    a, s = float(amplitude), float(scale)
    idx = None if window is None else tuple(sorted(set(int(i) for i in window)))
    if idx is None and not norm_kind.is_sup:
        raise ValueError(
            "saturating perturbation needs a finite window under an l^p ambient norm"
        )

    def func(x: StateVector) -> StateVector:
        if isinstance(x, SparseVector):
            source = x.items() if idx is None else ((i, x[i]) for i in idx)
            out = {}
            for i, v in source:
                val = a * math.tanh(s * v)
                if val != 0.0:
                    out[i] = val
            return _sparse_raw(out)
        arr = np.zeros(x.dim)
        cols = range(x.dim) if idx is None else (i for i in idx if 0 <= i < x.dim)
        for i in cols:
            arr[i] = a * math.tanh(s * x.array[i])
        return _dense_raw(arr)

    count = len(idx) if idx is not None else 1
    return Perturbation(
        func=func,
        sup_bound=a * _window_sup_scale(count, norm_kind),
        lip_bound=a * s,
        support_window=(idx[0], idx[-1]) if idx else None,
    )


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff: identically 1 inside radius r, 0 outside 2r, affine between."""

    r: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ValueError(f"cutoff radius must be positive and finite, got {self.r}")

    @property
    def outer(self) -> float:
        return 2.0 * self.r

    def value(self, s: float) -> float:
        if s <= self.r:
            return 1.0
        if s >= self.outer:
            return 0.0
        return (self.outer - s) / self.r


def cutoff(
    alpha: Callable[[StateVector], StateVector],
    alpha_lip_on_ball: float,
    profile: CutoffProfile,
    norm_kind: NormKind = SUP_NORM,
    zero: StateVector | None = None,
    support_window: tuple[int, int] | None = None,
    certification: str = "analytic",
) -> Perturbation:
    """Globalize a local nonlinearity with alpha(0) = 0 by a radial cutoff.

    Returns beta(x) = chi(|x|) * alpha(x) where chi is the profile.  With L
    the certified Lipschitz constant of alpha on the ball of radius 2r,
    |alpha(x)| <= L |x| there, so the certified bounds are

        sup bound  = 2r * L      (plus any measured residue of alpha at 0),
        Lip bound  = 3 * L       (L from alpha, 2r*L*(1/r) from the profile).

    beta agrees with alpha exactly on the ball of radius r and vanishes
    outside radius 2r.
    """
    if alpha_lip_on_ball <= 0.0:
        raise ValueError(f"alpha_lip_on_ball must be > 0, got {alpha_lip_on_ball}")
    a0 = 0.0
    if zero is not None:
        a0 = norm(alpha(zero), norm_kind)
        if a0 > 1e-9:
            raise ValueError(f"alpha(0) must vanish; measured norm {a0}")
    r = profile.r
    lip = alpha_lip_on_ball

    def func(x: StateVector) -> StateVector:
        s = norm(x, norm_kind)
        chi = profile.value(s)
        if chi == 0.0:
            return zero_like(x)
        val = alpha(x)
        return val if chi == 1.0 else chi * val

    return Perturbation(
        func=func,
        sup_bound=2.0 * r * lip + a0,
        lip_bound=3.0 * lip + a0 / r,
        certification=certification,
        support_window=support_window,
    )


def perturbed_apply(op: GHOperator, beta: Perturbation, x: StateVector) -> StateVector:
    """Evaluate (T + beta)(x)."""
    return op.apply(x) + beta(x)


def solve_perturbed_inverse(
    op: GHOperator,
    beta: Perturbation,
    y: StateVector,
    tol: float,
    max_iter: int = 10_000,
) -> StateVector:
    """Solve (T + beta)(x) = y to residual |T x + beta(x) - y| <= tol.

    Runs the contraction iteration x <- T^{-1}(y - beta(x)) from T^{-1} y.
    Since T x + beta(x) - y = T(x - x_next) for the next iterate, the
    residual of the current point is exact and checked directly; the
    contraction factor is q = Lip(beta) * |T^{-1}|, required < 1.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    q = beta.lip_bound * op.norm_Tinv
    if q >= 1.0:
        raise ContractionError(
            f"Lip(beta) * |T^{{-1}}| = {q} >= 1; the perturbed inverse is not "
            "a certified contraction"
        )
    x = op.apply_inverse(y)
    if beta.is_zero:
        return x
    for _ in range(max_iter):
        x_next = op.apply_inverse(y - beta(x))
        residual = norm(op.apply(x - x_next), op.norm_kind)
        if residual <= tol:
            return x
        x = x_next
    raise IterationLimitError(
        f"perturbed inverse did not reach residual {tol} within {max_iter} iterations"
    )


def perturbation_from_descriptor(obj: dict, norm_kind: NormKind = SUP_NORM) -> Perturbation:
    """Build a perturbation from its JSON descriptor.

    Supported kinds: ``zero``; ``constant`` with a ``vector`` entry;
    ``sine`` with amplitude / frequency / window [lo, hi]; ``saturating``
    with amplitude / scale and an optional window.
    """
    kind = obj.get("kind")
    if kind == "zero":
        return zero_perturbation()
    if kind == "constant":
        from .vectors import vector_from_json

        return constant_perturbation(vector_from_json(obj["vector"]), norm_kind)
    if kind == "sine":
        lo, hi = obj["window"]
        return sine_perturbation(
            obj["amplitude"], obj["frequency"], range(int(lo), int(hi) + 1), norm_kind
        )
    if kind == "saturating":
        window = obj.get("window")
        if window is not None:
            lo, hi = window
            window = range(int(lo), int(hi) + 1)
        return saturating_perturbation(obj["amplitude"], obj["scale"], window, norm_kind)
    raise ValueError(f"unknown perturbation kind {kind!r}")
