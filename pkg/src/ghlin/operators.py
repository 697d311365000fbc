"""Invertible linear operators with a generalized hyperbolic splitting.

Two backends:

* ``MatrixOperator`` -- an invertible n x n real matrix whose spectrum avoids
  the unit circle.  The splitting projections are the spectral projections
  onto the eigenvalue groups inside / outside the unit disc.
* ``ShiftOperator`` -- a bilateral weighted backward shift acting on sparse
  sequences, (T x)_n = w_{n+1} x_{n+1}, with eventually constant weights.
  Its splitting is the coordinate splitting M = {support <= 0},
  N = {support >= 1}; the splitting criterion is that the asymptotic
  geometric means of the weight products are < 1 on the left and > 1 on
  the right.

Both carry certified decay constants (c, t, d): ``|T^n y| <= c t^n |y|`` on
M and ``|T^{-n} z| <= c t^n |z|`` on N, with d the larger projection norm.
The constants are certified on a finite window and extended to all powers by
submultiplicativity of operator norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .vectors import (
    SUP_NORM,
    DenseVector,
    NormKind,
    SparseVector,
    StateVector,
)
from .vectors import _dense_raw, _sparse_raw  # internal fast constructors

__all__ = [
    "CertificationError",
    "WeightSpec",
    "CriterionReport",
    "ShiftOperator",
    "MatrixOperator",
    "GHOperator",
    "check_shift_criterion",
    "make_shift",
    "make_matrix_operator",
    "estimate_constants",
    "admissible_eps",
    "AdaptedNorm",
    "adapted_norm",
    "operator_from_descriptor",
]

#: default rejection tolerance for eigenvalues near the unit circle
UNIT_CIRCLE_TOL = 1e-8

#: projections and invariant-splitting residuals must validate below this
SPLITTING_TOL = 1e-10


class CertificationError(ValueError):
    """A certified bound or constant could not be established."""


@dataclass(frozen=True)
class WeightSpec:
    """Weight sequence with eventually constant tails.

    ``core`` gives the weights on a finite contiguous index window; outside
    it the weight is ``left_tail`` (below the window) or ``right_tail``
    (above it).  An empty core means the left tail covers n <= 0 and the
    right tail covers n >= 1.  All weights must be nonzero, which makes
    inf |w_n| > 0 automatic.
    """

    left_tail: float
    right_tail: float
    core: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, val in (("left_tail", self.left_tail), ("right_tail", self.right_tail)):
            if not math.isfinite(val) or val == 0.0:
                raise ValueError(f"{name} must be finite and nonzero, got {val}")
        if self.core:
            lo, hi = min(self.core), max(self.core)
            if len(self.core) != hi - lo + 1:
                raise ValueError("core window must be contiguous")
            for i, val in self.core.items():
                if not math.isfinite(val) or val == 0.0:
                    raise ValueError(f"core weight w_{i}={val} must be finite and nonzero")
        else:
            lo, hi = 1, 0
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def window(self) -> tuple[int, int]:
        """Core window [lo, hi]; the canonical empty window is (1, 0)."""
        return (self._lo, self._hi)

    def weight(self, n: int) -> float:
        got = self.core.get(n)
        if got is not None:
            return got
        return self.left_tail if n < self._lo else self.right_tail

    def describe(self) -> dict:
        return {
            "kind": "shift",
            "left_tail": self.left_tail,
            "right_tail": self.right_tail,
            "core": {str(i): v for i, v in sorted(self.core.items())},
        }


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of the weighted-shift splitting criterion.

    ``left_margin`` is the limiting geometric mean of the left weight
    products, ``right_margin`` the limiting geometric mean of the right
    ones.  For eventually constant weights the finitely many core factors
    wash out in the n-th root, so the limits equal the tail magnitudes
    exactly.
    """

    holds: bool
    left_margin: float
    right_margin: float


def check_shift_criterion(weights: WeightSpec) -> CriterionReport:
    """Decide whether the shift has the required splitting decay on both sides."""
    left = abs(weights.left_tail)
    right = abs(weights.right_tail)
    return CriterionReport(holds=(left < 1.0 and right > 1.0), left_margin=left, right_margin=right)


@dataclass
class _Constants:
    c: float
    t: float
    d: float
    n_max: int


class ShiftOperator:
    """Bilateral weighted backward shift with the coordinate splitting.

    Acts on sparse vectors only: (T x)_n = w_{n+1} x_{n+1} and
    (T^{-1} y)_n = y_{n-1} / w_n, both exact on the stored support.
    Operator norms in the ambient norm are exact suprema / infima of weight
    products; they do not depend on p, so one formula serves every l^p and
    the sup norm.
    """

    def __init__(self, weights: WeightSpec, norm_kind: NormKind = SUP_NORM):
        self.weights = weights
        self.norm_kind = norm_kind
        self.norm_T = self._sup_abs_weight()
        self.norm_Tinv = 1.0 / self._inf_abs_weight()
        self.norm_T_on_M = self._power_norm_on_M(1)
        self.norm_Tinv_on_N = self._power_norm_on_N_inverse(1)
        self.norm_P_M = 1.0
        self.norm_P_N = 1.0
        self.m_is_trivial = False
        self.n_is_trivial = False
        self.constants: _Constants | None = None

    # -- action ---------------------------------------------------------

    def apply(self, x: StateVector) -> SparseVector:
        if not isinstance(x, SparseVector):
            raise ValueError("shift operators act on sparse vectors")
        w = self.weights.weight
        return _sparse_raw({i - 1: p for i, v in x.items() if (p := w(i) * v) != 0.0})

    def apply_inverse(self, y: StateVector) -> SparseVector:
        if not isinstance(y, SparseVector):
            raise ValueError("shift operators act on sparse vectors")
        w = self.weights.weight
        return _sparse_raw({i + 1: p for i, v in y.items() if (p := v / w(i + 1)) != 0.0})

    def project_M(self, x: SparseVector) -> SparseVector:
        return _sparse_raw({i: v for i, v in x.items() if i <= 0})

    def project_N(self, x: SparseVector) -> SparseVector:
        return _sparse_raw({i: v for i, v in x.items() if i >= 1})

    # -- raw dict kernels for the series hot loops -----------------------

    @staticmethod
    def _unwrap(v: SparseVector) -> dict:
        return v._coords

    @staticmethod
    def _wrap(coords: dict) -> SparseVector:
        return _sparse_raw(coords)

    def _apply_raw(self, coords: dict) -> dict:
        w = self.weights.weight
        return {i - 1: p for i, v in coords.items() if (p := w(i) * v) != 0.0}

    def _apply_inverse_raw(self, coords: dict) -> dict:
        w = self.weights.weight
        return {i + 1: p for i, v in coords.items() if (p := v / w(i + 1)) != 0.0}

    @staticmethod
    def _project_M_raw(coords: dict) -> dict:
        return {i: v for i, v in coords.items() if i <= 0}

    @staticmethod
    def _project_N_raw(coords: dict) -> dict:
        return {i: v for i, v in coords.items() if i >= 1}

    @staticmethod
    def _add_raw(a: dict, b: dict) -> dict:
        out = dict(a)
        for i, v in b.items():
            s = out.get(i, 0.0) + v
            if s == 0.0:
                out.pop(i, None)
            else:
                out[i] = s
        return out

    @staticmethod
    def _sub_raw(a: dict, b: dict) -> dict:
        out = dict(a)
        for i, v in b.items():
            s = out.get(i, 0.0) - v
            if s == 0.0:
                out.pop(i, None)
            else:
                out[i] = s
        return out

    # -- exact norms ----------------------------------------------------

    def _sup_abs_weight(self) -> float:
        vals = [abs(self.weights.left_tail), abs(self.weights.right_tail)]
        vals += [abs(v) for v in self.weights.core.values()]
        return max(vals)

    def _inf_abs_weight(self) -> float:
        vals = [abs(self.weights.left_tail), abs(self.weights.right_tail)]
        vals += [abs(v) for v in self.weights.core.values()]
        return min(vals)

    def _power_norm_on_M(self, n: int) -> float:
        """Exact norm of the n-th power restricted to M (support <= 0).

        T^n maps e_j to (w_j ... w_{j-n+1}) e_{j-n}; the restriction norm is
        the supremum of |product| over j <= 0.  Windows left of the core are
        pure left tail, so a finite scan is exact.
        """
        w = self.weights.weight
        lo, _ = self.weights.window
        best = abs(self.weights.left_tail) ** n
        for j in range(min(lo - 1, 0), 1):
            prod = 1.0
            for i in range(j - n + 1, j + 1):
                prod *= abs(w(i))
            best = max(best, prod)
        return best

    def _power_norm_on_N_inverse(self, n: int) -> float:
        """Exact norm of the n-th inverse power restricted to N (support >= 1).

        T^{-n} maps e_j to e_{j+n} / (w_{j+1} ... w_{j+n}); the norm is the
        reciprocal of the infimum of |product| over j >= 1.
        """
        w = self.weights.weight
        _, hi = self.weights.window
        best = abs(self.weights.right_tail) ** n
        for j in range(1, max(hi + 1, 1) + 1):
            prod = 1.0
            for i in range(j + 1, j + n + 1):
                prod *= abs(w(i))
            best = min(best, prod)
        return 1.0 / best

    def stable_spectral_radii(self) -> tuple[float, float]:
        """(spectral radius on M, spectral radius of the inverse on N)."""
        return abs(self.weights.left_tail), 1.0 / abs(self.weights.right_tail)

    def describe(self) -> dict:
        return self.weights.describe()


class MatrixOperator:
    """Invertible matrix with spectrum off the unit circle.

    M is the invariant subspace for eigenvalues inside the unit disc and N
    the one for eigenvalues outside; P_M, P_N are the spectral projections.
    Operator norms are induced matrix norms in the ambient norm (available
    for p in {1, 2} and sup).
    """

    def __init__(
        self,
        matrix: np.ndarray,
        matrix_inv: np.ndarray,
        proj_M: np.ndarray,
        eigenvalues: np.ndarray,
        norm_kind: NormKind = SUP_NORM,
    ):
        self.matrix = matrix
        self.matrix_inv = matrix_inv
        self.proj_M_matrix = proj_M
        self.proj_N_matrix = np.eye(matrix.shape[0]) - proj_M
        self.eigenvalues = eigenvalues
        self.norm_kind = norm_kind
        self.m_dim = int(round(np.trace(proj_M)))
        self.n_dim = matrix.shape[0] - self.m_dim
        self.m_is_trivial = self.m_dim == 0
        self.n_is_trivial = self.n_dim == 0
        self._ord = _matrix_norm_order(norm_kind)
        self.norm_T = self._induced(matrix)
        self.norm_Tinv = self._induced(matrix_inv)
        self.norm_T_on_M = self._induced(matrix @ proj_M)
        self.norm_Tinv_on_N = self._induced(matrix_inv @ self.proj_N_matrix)
        self.norm_P_M = self._induced(proj_M)
        self.norm_P_N = self._induced(self.proj_N_matrix)
        self.constants: _Constants | None = None

    def _induced(self, a: np.ndarray) -> float:
        return float(np.linalg.norm(a, ord=self._ord))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: StateVector) -> DenseVector:
        if not isinstance(x, DenseVector) or x.dim != self.dim:
            raise ValueError(f"matrix operator needs dense vectors of dimension {self.dim}")
        return _dense_raw(self.matrix @ x.array)

    def apply_inverse(self, y: StateVector) -> DenseVector:
        if not isinstance(y, DenseVector) or y.dim != self.dim:
            raise ValueError(f"matrix operator needs dense vectors of dimension {self.dim}")
        return _dense_raw(self.matrix_inv @ y.array)

    def project_M(self, x: DenseVector) -> DenseVector:
        return _dense_raw(self.proj_M_matrix @ x.array)

    def project_N(self, x: DenseVector) -> DenseVector:
        return _dense_raw(self.proj_N_matrix @ x.array)

    # -- raw array kernels for the series hot loops -----------------------

    @staticmethod
    def _unwrap(v: DenseVector) -> np.ndarray:
        return v.array

    @staticmethod
    def _wrap(arr: np.ndarray) -> DenseVector:
        return _dense_raw(arr)

    def _apply_raw(self, arr: np.ndarray) -> np.ndarray:
        return self.matrix @ arr

    def _apply_inverse_raw(self, arr: np.ndarray) -> np.ndarray:
        return self.matrix_inv @ arr

    def _project_M_raw(self, arr: np.ndarray) -> np.ndarray:
        return self.proj_M_matrix @ arr

    def _project_N_raw(self, arr: np.ndarray) -> np.ndarray:
        return self.proj_N_matrix @ arr

    @staticmethod
    def _add_raw(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b

    @staticmethod
    def _sub_raw(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a - b

    def _power_norm_on_M(self, n: int) -> float:
        return self._induced(np.linalg.matrix_power(self.matrix @ self.proj_M_matrix, n))

    def _power_norm_on_N_inverse(self, n: int) -> float:
        return self._induced(
            np.linalg.matrix_power(self.matrix_inv @ self.proj_N_matrix, n)
        )

    def stable_spectral_radii(self) -> tuple[float, float]:
        mods = np.abs(self.eigenvalues)
        rho_m = float(np.max(mods[mods < 1.0])) if np.any(mods < 1.0) else 0.0
        rho_n = float(np.max(1.0 / mods[mods > 1.0])) if np.any(mods > 1.0) else 0.0
        return rho_m, rho_n

    def describe(self) -> dict:
        return {"kind": "matrix", "rows": self.matrix.tolist()}


GHOperator = ShiftOperator | MatrixOperator


def _matrix_norm_order(kind: NormKind):
    if kind.is_sup:
        return np.inf
    if kind.p in (1.0, 2.0):
        return int(kind.p)
    raise ValueError(
        f"induced matrix norms are available for p in {{1, 2}} and sup, not p={kind.p}"
    )


def make_shift(
    weights: WeightSpec,
    norm_kind: NormKind = SUP_NORM,
    t: float | None = None,
) -> ShiftOperator:
    """Build a weighted backward shift, rejecting weights that fail the criterion."""
    report = check_shift_criterion(weights)
    if not report.holds:
        sides = []
        if report.left_margin >= 1.0:
            sides.append(
                f"left weight-product limit {report.left_margin} is not < 1"
            )
        if report.right_margin <= 1.0:
            sides.append(
                f"right weight-product limit {report.right_margin} is not > 1"
            )
        raise CertificationError("splitting criterion fails: " + "; ".join(sides))
    op = ShiftOperator(weights, norm_kind)
    estimate_constants(op, t)
    return op


def make_matrix_operator(
    matrix,
    norm_kind: NormKind = SUP_NORM,
    t: float | None = None,
    unit_circle_tol: float = UNIT_CIRCLE_TOL,
) -> MatrixOperator:
    """Build a matrix operator with its spectral splitting.

    Eigenvalues inside the unit disc span M, outside span N.  Any eigenvalue
    with modulus within ``unit_circle_tol`` of 1 is rejected, as is a
    singular matrix.  Mixed spectra are split through a sorted real Schur
    form; the projection is then recovered from a Sylvester solve, which
    also covers defective eigenvalue blocks.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    eigs = np.linalg.eigvals(a)
    mods = np.abs(eigs)
    if np.any(mods < unit_circle_tol):
        raise ValueError("matrix is not invertible (eigenvalue at 0)")
    if np.any(np.abs(mods - 1.0) < unit_circle_tol):
        bad = eigs[np.argmin(np.abs(mods - 1.0))]
        raise CertificationError(
            f"not hyperbolic (finite dimension): eigenvalue {bad} has modulus "
            f"within {unit_circle_tol} of the unit circle"
        )
    a_inv = np.linalg.inv(a)

    if np.all(mods < 1.0):
        proj_M = np.eye(n)
    elif np.all(mods > 1.0):
        proj_M = np.zeros((n, n))
    else:
        u, q, sdim = scipy.linalg.schur(
            a, output="real", sort=lambda re, im: re * re + im * im < 1.0
        )
        if sdim == 0 or sdim == n:  # pragma: no cover - guarded by the mods check
            raise CertificationError("Schur sorting failed to separate the spectrum")
        u11, u12, u22 = u[:sdim, :sdim], u[:sdim, sdim:], u[sdim:, sdim:]
        x = scipy.linalg.solve_sylvester(u11, -u22, u12)
        block = np.zeros((n, n))
        block[:sdim, :sdim] = np.eye(sdim)
        block[:sdim, sdim:] = x
        proj_M = q @ block @ q.T

    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(proj_M @ proj_M - proj_M).max()) > SPLITTING_TOL:
        raise CertificationError(
            "spectral projection failed to validate (matrix may be too close "
            "to a defective splitting); P^2 != P beyond tolerance"
        )
    proj_N = np.eye(n) - proj_M
    if float(np.abs(proj_N @ a @ proj_M).max()) > SPLITTING_TOL * scale:
        raise CertificationError("splitting is not forward invariant beyond tolerance")
    if float(np.abs(proj_M @ a_inv @ proj_N).max()) > SPLITTING_TOL * scale:
        raise CertificationError("splitting is not backward invariant beyond tolerance")

    op = MatrixOperator(a, a_inv, proj_M, eigs, norm_kind)
    estimate_constants(op, t)
    return op


def estimate_constants(
    op: GHOperator,
    t: float | None = None,
    n_cap: int = 10_000,
) -> tuple[float, float, float]:
    """Install certified decay constants (c, t, d) on the operator.

    With A_M = T P_M and A_N = T^{-1} P_N, the certification window is the
    first n_max at which both |A_M^n| <= t^n and |A_N^n| <= t^n; then
    c = max_{n <= n_max} max(|A_M^n|, |A_N^n|) / t^n works for every power
    by submultiplicativity, and d = max(|P_M|, |P_N|).
    """
    rho_m, rho_n = op.stable_spectral_radii()
    rho = max(rho_m, rho_n)
    if t is None:
        t = (rho + 1.0) / 2.0
    if not (0.0 < t < 1.0):
        raise ValueError(f"t must lie in (0, 1), got {t}")
    if rho > t:
        raise CertificationError(
            f"t={t} does not dominate the stable spectral radii ({rho_m}, {rho_n})"
        )
    c = 1.0
    n_max = 0
    for n in range(1, n_cap + 1):
        tn = t**n
        ratio_m = op._power_norm_on_M(n) / tn
        ratio_n = op._power_norm_on_N_inverse(n) / tn
        c = max(c, ratio_m, ratio_n)
        if ratio_m <= 1.0 and ratio_n <= 1.0:
            n_max = n
            break
    else:
        raise CertificationError(
            f"constants not certifiable at this t: no power window within {n_cap} steps"
        )
    d = max(op.norm_P_M, op.norm_P_N)
    op.constants = _Constants(c=c, t=t, d=d, n_max=n_max)
    return c, t, d


def _require_constants(op: GHOperator) -> _Constants:
    if op.constants is None:
        raise ValueError("operator has no certified constants; run estimate_constants")
    return op.constants


def admissible_eps(op: GHOperator, gamma: float) -> float:
    """Largest certified perturbation size for a target identity distance gamma.

    Equals gamma * (1 - t) / (c * d * (1 + t)); increasing in gamma and
    decreasing in each of t, c, d.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    k = _require_constants(op)
    return gamma * (1.0 - k.t) / (k.c * k.d * (1.0 + k.t))


def constants_report(op: GHOperator) -> dict:
    k = _require_constants(op)
    return {"c": k.c, "t": k.t, "d": k.d, "n_max": k.n_max}


class AdaptedNorm:
    """Equivalent norm making the splitting restrictions genuine contractions.

    |x|_* = max over 0 <= n <= window of |T^n P_M x| / t^n and
    |T^{-n} P_N x| / t^n.  The suprema over all n are attained inside the
    certified window (any larger power is dominated through the window by
    submultiplicativity), so evaluation is exact.  Under this norm
    |T y|_* <= t |y|_* on M and |T^{-1} z|_* <= t |z|_* on N.

    The equivalence constants with the ambient norm are reported as
    ``lower`` and ``upper``: lower * |x| <= |x|_* <= upper * |x|.
    """

    def __init__(self, op: GHOperator, t: float, n_window: int, c_window: float):
        self.op = op
        self.t = t
        self.n_window = n_window
        # |T^n P_M x|/t^n <= c d |x| on the window; the n = 0 terms give the
        # lower bound max(|P_M x|, |P_N x|) >= |x| / 2.
        self.lower = 0.5
        self.upper = c_window * max(op.norm_P_M, op.norm_P_N)

    def __call__(self, x: StateVector) -> float:
        from .vectors import norm as ambient_norm

        best = 0.0
        u = self.op.project_M(x)
        scale = 1.0
        for _ in range(self.n_window + 1):
            best = max(best, ambient_norm(u, self.op.norm_kind) / scale)
            u = self.op.apply(u)
            scale *= self.t
        v = self.op.project_N(x)
        scale = 1.0
        for _ in range(self.n_window + 1):
            best = max(best, ambient_norm(v, self.op.norm_kind) / scale)
            v = self.op.apply_inverse(v)
            scale *= self.t
        return best


def adapted_norm(op: GHOperator, t: float | None = None) -> AdaptedNorm:
    """Norm functional adapted to the splitting at contraction rate t."""
    k = _require_constants(op)
    if t is None or t == k.t:
        return AdaptedNorm(op, k.t, k.n_max, k.c)
    rho = max(op.stable_spectral_radii())
    if not (rho <= t < 1.0):
        raise CertificationError(f"t={t} must separate the spectral radius {rho} from 1")
    c = 1.0
    for n in range(1, 10_000 + 1):
        tn = t**n
        rm = op._power_norm_on_M(n) / tn
        rn = op._power_norm_on_N_inverse(n) / tn
        c = max(c, rm, rn)
        if rm <= 1.0 and rn <= 1.0:
            return AdaptedNorm(op, t, n, c)
    raise CertificationError(f"constants not certifiable at this t={t}")


def operator_from_descriptor(obj: dict, norm_kind: NormKind | None = None) -> GHOperator:
    """Build an operator from its JSON descriptor.

    ``{"kind": "shift", "left_tail": v, "right_tail": v, "core": {...}}`` or
    ``{"kind": "matrix", "rows": [[...], ...]}``; optional ``"norm"`` and
    ``"t"`` entries select the ambient norm and the decay rate.
    """
    if norm_kind is None:
        norm_kind = (
            NormKind.from_descriptor(obj["norm"]) if "norm" in obj else SUP_NORM
        )
    t = obj.get("t")
    kind = obj.get("kind")
    if kind == "shift":
        core = {int(k): float(v) for k, v in obj.get("core", {}).items()}
        spec = WeightSpec(
            left_tail=float(obj["left_tail"]),
            right_tail=float(obj["right_tail"]),
            core=core,
        )
        return make_shift(spec, norm_kind, t)
    if kind == "matrix":
        return make_matrix_operator(obj["rows"], norm_kind, t)
    raise ValueError(f"unknown operator kind {kind!r}")
