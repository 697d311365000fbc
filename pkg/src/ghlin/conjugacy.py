"""Certified construction of conjugacies between T and its perturbation T + beta.

Everything rests on one linear solve: for an invertible orbit map R, the
bounded solution phi of

    phi(R x) - T(phi(x)) = source(x)

is given by two orbit series,

    phi(x) =   sum_{k>=0} T^k   P_M source(R^{-k-1} x)
             - sum_{k>=1} T^{-k} P_N source(R^{k-1} x),

which converge geometrically thanks to the splitting decay constants
(c, t, d).  Truncating both series at K + 1 terms leaves a certified tail of
c * d * |source|_inf * t^(K+1) * (1 + t) / (1 - t).

The forward conjugacy H = I + h with H o T = (T + beta) o H solves the
self-referential equation h = solution-of(beta o (I + h)) with R = T, handled
by depth-bounded contraction unrolling.  The backward conjugacy
H' = I + h' with H' o (T + beta) = T o H' is the direct series with
R = T + beta and source = -beta.  Both displacements land in the subspace
M + T^{-1}(N) term by term.

Every map carries a certified worst-case evaluation error; verification
routines compare observed identity residuals against bounds derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .operators import CertificationError, GHOperator, admissible_eps, _require_constants
from .perturbations import (
    ContractionError,
    Perturbation,
    perturbed_apply,
    solve_perturbed_inverse,
)
from .vectors import StateVector, norm, zero_like

__all__ = [
    "SeriesPolicy",
    "ConjugacyMap",
    "VerificationReport",
    "InversePairReport",
    "truncation_terms",
    "truncation_tail_bound",
    "intertwining_solution",
    "solve_conjugacy",
    "solve_inverse_conjugacy",
    "eval_H",
    "eval_H_prime",
    "verify_conjugacy",
    "verify_inverse_pair",
    "displacement_space_residual",
]

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class SeriesPolicy:
    """Per-evaluation truncation target and hard cap on series terms."""

    tol: float
    k_cap: int = 10_000

    def __post_init__(self) -> None:
        if not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise ValueError(f"tol must be positive and finite, got {self.tol}")
        if self.k_cap < 1:
            raise ValueError(f"k_cap must be >= 1, got {self.k_cap}")


def truncation_tail_bound(op: GHOperator, source_sup: float, terms: int) -> float:
    """Certified bound on everything dropped after K + 1 terms of each series."""
    k = _require_constants(op)
    return (
        k.c * k.d * source_sup * k.t ** (terms + 1) * (1.0 + k.t) / (1.0 - k.t)
    )


def truncation_terms(op: GHOperator, source_sup: float, policy: SeriesPolicy) -> int:
    """Smallest K whose combined tail bound meets the policy tolerance."""
    if source_sup == 0.0:
        return 0
    k = _require_constants(op)
    lead = k.c * k.d * source_sup * (1.0 + k.t) / (1.0 - k.t)
    if lead <= policy.tol:
        terms = 0
    else:
        terms = max(0, math.ceil(math.log(policy.tol / lead) / math.log(k.t)) - 1)
    while truncation_tail_bound(op, source_sup, terms) > policy.tol:
        terms += 1
    if terms > policy.k_cap:
        raise CertificationError(
            f"series needs {terms} terms to reach tol={policy.tol}, above the "
            f"cap {policy.k_cap}"
        )
    return terms


def _sum_forward_powers(op: GHOperator, terms: Sequence) -> object:
    # sum_k T^k terms[k] on raw backend values, innermost first
    acc = terms[-1]
    apply_raw, add = op._apply_raw, op._add_raw
    for v in reversed(terms[:-1]):
        acc = add(v, apply_raw(acc))
    return acc


def _sum_inverse_powers(op: GHOperator, terms: Sequence) -> object:
    # sum_k T^{-(k+1)} terms[k] on raw backend values, innermost first
    acc = terms[-1]
    invert_raw, add = op._apply_inverse_raw, op._add_raw
    for w in reversed(terms[:-1]):
        acc = add(w, invert_raw(acc))
    return invert_raw(acc)


def intertwining_solution(
    op: GHOperator,
    r_apply: Callable[[StateVector], StateVector],
    r_invert: Callable[[StateVector], StateVector],
    source: Callable[[StateVector], StateVector],
    source_sup: float,
    x: StateVector,
    policy: SeriesPolicy,
    terms: int | None = None,
) -> StateVector:
    """Value at x of the bounded solution of phi(R y) - T(phi(y)) = source(y).

    ``source_sup`` must certify the sup norm of the source; it drives the
    truncation depth unless ``terms`` overrides it.  The result norm is at
    most c*d*(1+t)/(1-t) * source_sup plus the policy tolerance.
    """
    if terms is None:
        terms = truncation_terms(op, source_sup, policy)
    pts_back = []
    pt = x
    for _ in range(terms + 1):
        pt = r_invert(pt)
        pts_back.append(pt)
    m_terms = [op._project_M_raw(op._unwrap(source(p))) for p in pts_back]
    pts_fwd = [x]
    for _ in range(terms):
        pts_fwd.append(r_apply(pts_fwd[-1]))
    n_terms = [op._project_N_raw(op._unwrap(source(p))) for p in pts_fwd]
    return op._wrap(
        op._sub_raw(_sum_forward_powers(op, m_terms), _sum_inverse_powers(op, n_terms))
    )


class _OrbitCache:
    """Lazily extended two-sided orbit {R^m x} of a single base point."""

    __slots__ = ("_fwd", "_bwd", "_apply", "_invert")

    def __init__(self, apply_fn, invert_fn, base: StateVector):
        self._fwd = [base]
        self._bwd: list = []
        self._apply = apply_fn
        self._invert = invert_fn

    def point(self, m: int) -> StateVector:
        if m >= 0:
            fwd = self._fwd
            while len(fwd) <= m:
                fwd.append(self._apply(fwd[-1]))
            return fwd[m]
        bwd = self._bwd
        j = -m - 1
        while len(bwd) <= j:
            bwd.append(self._invert(bwd[-1] if bwd else self._fwd[0]))
        return bwd[j]


class ConjugacyMap:
    """Lazy evaluator for a conjugacy H = I + displacement with error control.

    Forward direction: H o T = S o H; backward: H o S = T o H, where
    S = T + beta.  ``certified_error`` bounds the distance between returned
    displacement values and the exact ones (for the backward map, on
    evaluation points within ``eval_radius`` in the ambient norm).

    Evaluation is pure; the memo caches displacement values keyed by
    quantized coordinates, and concurrent writers would insert identical
    values.
    """

    def __init__(
        self,
        op: GHOperator,
        beta: Perturbation,
        direction: str,
        policy: SeriesPolicy,
        terms: int,
        depth: int = 0,
        contraction: float = 0.0,
        picard_tol: float | None = None,
        certified_error: float = 0.0,
        inverse_tols: list[float] | None = None,
    ):
        self.op = op
        self.beta = beta
        self.direction = direction
        self.policy = policy
        self.terms = terms
        self.depth = depth
        self.contraction = contraction
        self.picard_tol = picard_tol
        self.certified_error = certified_error
        self._inverse_tols = inverse_tols or []
        self.memo: dict = {}

    def displacement(self, x: StateVector) -> StateVector:
        """The offset H(x) - x, computed to the map's certified error."""
        key = x.memo_key()
        got = self.memo.get(key)
        if got is None:
            got = (
                self._forward_value(x)
                if self.direction == FORWARD
                else self._backward_value(x)
            )
            self.memo.setdefault(key, got)
        return got

    def __call__(self, x: StateVector) -> StateVector:
        return x + self.displacement(x)

    # -- forward: depth-bounded unrolling of the self-referential solve ---

    def _forward_value(self, x: StateVector) -> StateVector:
        if self.depth == 0 or self.beta.is_zero:
            return zero_like(x)
        op, beta, terms = self.op, self.beta, self.terms
        wrap, unwrap, add = op._wrap, op._unwrap, op._add_raw
        orbit = _OrbitCache(op._apply_raw, op._apply_inverse_raw, unwrap(x))
        level: dict[tuple[int, int], object] = {}
        # projected source terms P_M beta(u), P_N beta(u) at u = orbit + lower
        # displacement, shared by every series window touching that point
        sources: dict[tuple[int, int], tuple] = {}

        def source(depth_below: int, j: int) -> tuple:
            key = (depth_below, j)
            got = sources.get(key)
            if got is None:
                u = orbit.point(j)
                if depth_below > 0:
                    u = add(u, displacement_at(depth_below, j))
                bu = unwrap(beta(wrap(u)))
                got = (op._project_M_raw(bu), op._project_N_raw(bu))
                sources[key] = got
            return got

        def displacement_at(depth: int, m: int):
            key = (depth, m)
            got = level.get(key)
            if got is not None:
                return got
            below = depth - 1
            m_terms = [source(below, m - k - 1)[0] for k in range(terms + 1)]
            n_terms = [source(below, m + k)[1] for k in range(terms + 1)]
            val = op._sub_raw(
                _sum_forward_powers(op, m_terms), _sum_inverse_powers(op, n_terms)
            )
            level[key] = val
            return val

        return wrap(displacement_at(self.depth, 0))

    # -- backward: direct series along the perturbed orbit ----------------

    def _backward_value(self, x: StateVector) -> StateVector:
        if self.beta.is_zero:
            return zero_like(x)
        op, beta, terms = self.op, self.beta, self.terms
        pts_back = []
        pt = x
        for j in range(terms + 1):
            pt = solve_perturbed_inverse(op, beta, pt, self._inverse_tols[j])
            pts_back.append(pt)
        m_terms = [op._project_M_raw(op._unwrap(beta(p))) for p in pts_back]
        pts_fwd = [x]
        for _ in range(terms):
            pts_fwd.append(perturbed_apply(op, beta, pts_fwd[-1]))
        n_terms = [op._project_N_raw(op._unwrap(beta(p))) for p in pts_fwd]
        return op._wrap(
            op._sub_raw(_sum_inverse_powers(op, n_terms), _sum_forward_powers(op, m_terms))
        )

    def report(self) -> dict:
        return {
            "direction": self.direction,
            "terms": self.terms,
            "depth": self.depth,
            "contraction": self.contraction,
            "certified_error": self.certified_error,
        }


def solve_conjugacy(
    op: GHOperator,
    beta: Perturbation,
    gamma: float,
    policy: SeriesPolicy,
    picard_tol: float,
) -> ConjugacyMap:
    """Forward conjugacy H = I + h with H o T = (T + beta) o H and |h| <= gamma.

    Requires Lip(beta) within the admissible bound for gamma and
    Lip(beta) * |T^{-1}| < 1.  The displacement solves a contraction with
    factor q = c*d*(1+t)/(1-t) * Lip(beta) <= gamma; unrolling depth n gives
    an error q^n * B / (1 - q) with B the certified first-step norm, and
    each series evaluation adds its truncation tolerance once per level.
    """
    if picard_tol <= 0.0:
        raise ValueError(f"picard_tol must be positive, got {picard_tol}")
    eps = admissible_eps(op, gamma)
    if beta.lip_bound > eps:
        raise ValueError(
            f"Lip(beta) = {beta.lip_bound} exceeds the admissible bound "
            f"gamma*(1-t)/(c*d*(1+t)) = {eps} at gamma = {gamma}"
        )
    if beta.sup_bound > eps:
        raise ValueError(
            f"sup of beta = {beta.sup_bound} exceeds the admissible bound "
            f"gamma*(1-t)/(c*d*(1+t)) = {eps} at gamma = {gamma}; the identity "
            f"distance of the conjugacy could not be kept below gamma"
        )
    if beta.lip_bound * op.norm_Tinv >= 1.0:
        raise ContractionError(
            f"Lip(beta) * |T^{{-1}}| = {beta.lip_bound * op.norm_Tinv} >= 1; "
            "perturbed orbits cannot be certified"
        )
    k = _require_constants(op)
    gain = k.c * k.d * (1.0 + k.t) / (1.0 - k.t)
    q = gain * beta.lip_bound
    first_step = gain * beta.sup_bound
    if beta.sup_bound == 0.0:
        depth = 0
    elif q == 0.0:
        depth = 1
    else:
        target = picard_tol * (1.0 - q) / first_step
        depth = 1 if target >= 1.0 else max(1, math.ceil(math.log(target) / math.log(q)))
    picard_err = (q**depth) * first_step / (1.0 - q)
    terms = truncation_terms(op, beta.sup_bound, policy)
    series_err = policy.tol * (1.0 - q**depth) / (1.0 - q)
    return ConjugacyMap(
        op=op,
        beta=beta,
        direction=FORWARD,
        policy=policy,
        terms=terms,
        depth=depth,
        contraction=q,
        picard_tol=picard_tol,
        certified_error=picard_err + series_err,
    )


def solve_inverse_conjugacy(
    op: GHOperator,
    beta: Perturbation,
    policy: SeriesPolicy,
    inverse_tol_rel: float = 1e-12,
    eval_radius: float = 4.0,
) -> ConjugacyMap:
    """Backward conjugacy H = I + h with H o (T + beta) = T o H.

    This is the direct, non-self-referential series along the perturbed
    orbit: forward points are exact applications of T + beta, backward
    points come from the certified perturbed-inverse solver.  The certified
    error is the truncation tolerance plus the accumulated inverse-solve
    residuals propagated through the series, quoted for evaluation points
    within ``eval_radius`` (the default covers images of the unit ball
    under T + beta and under the forward conjugacy whenever |T| + 1 stays
    below it).
    """
    if beta.lip_bound * op.norm_Tinv >= 1.0:
        raise ContractionError(
            f"Lip(beta) * |T^{{-1}}| = {beta.lip_bound * op.norm_Tinv} >= 1; "
            "the perturbed inverse is not a certified contraction"
        )
    k = _require_constants(op)
    terms = truncation_terms(op, beta.sup_bound, policy)
    lip_inv = op.norm_Tinv / (1.0 - op.norm_Tinv * beta.lip_bound)
    radius = eval_radius
    inverse_tols = []
    point_errors = []  # error of the j-th backward orbit point
    err = 0.0
    for _ in range(terms + 1):
        tol_j = inverse_tol_rel * max(1.0, radius)
        inverse_tols.append(tol_j)
        err = lip_inv * (err + tol_j)
        point_errors.append(err)
        radius = op.norm_Tinv * (radius + beta.sup_bound) + err
    # A point error e enters a series term through beta, whose certified
    # moduli give |beta(u) - beta(v)| <= min(Lip * e, 2 * eps_eff * e^theta,
    # 2 * sup) for every theta in (0, 1] with eps_eff = max(sup, Lip); the
    # small exponents keep the bound summable when t * Lip(S^{-1}) >= 1.
    eps_eff = max(beta.sup_bound, beta.lip_bound)
    thetas = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]

    def beta_gap(e: float) -> float:
        options = [beta.lip_bound * e, 2.0 * beta.sup_bound]
        options += [2.0 * eps_eff * e**theta for theta in thetas]
        return min(options)

    orbit_err = sum(
        k.c * k.d * (k.t**j) * beta_gap(point_errors[j]) for j in range(terms + 1)
    )
    return ConjugacyMap(
        op=op,
        beta=beta,
        direction=BACKWARD,
        policy=policy,
        terms=terms,
        certified_error=policy.tol + orbit_err,
        inverse_tols=inverse_tols,
    )


def eval_H(cmap: ConjugacyMap, x: StateVector) -> StateVector:
    """Apply the forward conjugacy: x + displacement."""
    if cmap.direction != FORWARD:
        raise ValueError("eval_H needs a forward conjugacy map")
    return cmap(x)


def eval_H_prime(cmap: ConjugacyMap, x: StateVector) -> StateVector:
    """Apply the backward conjugacy: x + displacement."""
    if cmap.direction != BACKWARD:
        raise ValueError("eval_H_prime needs a backward conjugacy map")
    return cmap(x)


@dataclass
class VerificationReport:
    """Observed identity residuals against the map's own certified bound."""

    kind: str
    n_samples: int
    max_residual: float
    certified_bound: float
    per_point: list[float] = field(repr=False, default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.certified_bound

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_samples": self.n_samples,
            "max_residual": self.max_residual,
            "certified_bound": self.certified_bound,
            "passed": self.passed,
        }


def verify_conjugacy(cmap: ConjugacyMap, samples: Sequence[StateVector]) -> VerificationReport:
    """Residuals of the conjugacy identity over the samples.

    Forward maps check H(T x) - (T + beta)(H(x)); backward maps check
    H((T + beta) x) - T(H(x)).  The certified bound follows from the map's
    evaluation error pushed through the outer Lipschitz factors.
    """
    op, beta = cmap.op, cmap.beta
    err = cmap.certified_error
    residuals = []
    if cmap.direction == FORWARD:
        bound = err * (1.0 + op.norm_T + beta.lip_bound)
        for x in samples:
            lhs = cmap(op.apply(x))
            hx = cmap(x)
            rhs = op.apply(hx) + beta(hx)
            residuals.append(norm(lhs - rhs, op.norm_kind))
    else:
        bound = err * (1.0 + op.norm_T)
        for x in samples:
            lhs = cmap(perturbed_apply(op, beta, x))
            rhs = op.apply(cmap(x))
            residuals.append(norm(lhs - rhs, op.norm_kind))
    return VerificationReport(
        kind=cmap.direction,
        n_samples=len(residuals),
        max_residual=max(residuals, default=0.0),
        certified_bound=bound,
        per_point=residuals,
    )


@dataclass
class InversePairReport:
    """Residuals of H_back o H_fwd = I and H_fwd o H_back = I over samples."""

    n_samples: int
    max_residual_left: float
    max_residual_right: float
    certified_bound: float
    per_point: list[tuple[float, float]] = field(repr=False, default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.max_residual_left, self.max_residual_right)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.certified_bound

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "max_residual_left": self.max_residual_left,
            "max_residual_right": self.max_residual_right,
            "certified_bound": self.certified_bound,
            "passed": self.passed,
        }


def verify_inverse_pair(
    fwd: ConjugacyMap,
    bwd: ConjugacyMap,
    samples: Sequence[StateVector],
    holder: "object | None" = None,
) -> InversePairReport:
    """Check that the two conjugacies invert each other on the samples.

    The certified bound needs a continuity modulus at the maps' error
    scale; a Holder certificate (theta, C) for the backward displacement
    supplies one.  The H_back o H_fwd residual is bounded directly by
    L = E_f + E_b + C * E_f^theta.  For H_fwd o H_back, applying the
    backward map to the residual vector gives the self-consistent
    inequality r <= C r^theta + (L + 2 E_b), whose positive fixed point is
    the certified bound.  With a zero perturbation the bound is exactly 0;
    without a certificate the bound is reported as infinity (observed
    residuals only).
    """
    if fwd.direction != FORWARD or bwd.direction != BACKWARD:
        raise ValueError("verify_inverse_pair needs a (forward, backward) pair")
    if fwd.op is not bwd.op or fwd.beta is not bwd.beta:
        raise ValueError("the two maps must share the same operator and perturbation")
    e_f, e_b = fwd.certified_error, bwd.certified_error
    if fwd.beta.is_zero:
        bound = 0.0
    elif holder is not None:
        left_bound = e_f + e_b + holder.C * e_f**holder.theta
        offset = left_bound + 2.0 * e_b
        r = offset
        for _ in range(256):
            r_next = holder.C * r**holder.theta + offset
            if r_next == r:
                break
            r = r_next
        right_bound = 1.000001 * r
        if holder.C * right_bound**holder.theta + offset > right_bound:
            right_bound = math.inf  # pragma: no cover - fixed point not bracketed
        bound = max(left_bound, right_bound)
    else:
        bound = math.inf
    pairs = []
    for x in samples:
        left = norm(bwd(fwd(x)) - x, fwd.op.norm_kind)
        right = norm(fwd(bwd(x)) - x, fwd.op.norm_kind)
        pairs.append((left, right))
    return InversePairReport(
        n_samples=len(pairs),
        max_residual_left=max((p[0] for p in pairs), default=0.0),
        max_residual_right=max((p[1] for p in pairs), default=0.0),
        certified_bound=bound,
        per_point=pairs,
    )


def displacement_space_residual(op: GHOperator, v: StateVector) -> float:
    """Distance of v from the displacement codomain M + T^{-1}(N).

    Equals |P_M(T(P_N v))|, which vanishes exactly when the N-component of v
    lies in T^{-1}(N).
    """
    return norm(op.project_M(op.apply(op.project_N(v))), op.norm_kind)
