"""Local linearization of a nonlinear map near a generalized hyperbolic fixed point.

Workflow: translate the fixed point to the origin, split the map into its
derivative T plus a nonlinearity vanishing at 0, cut the nonlinearity off to
a globally small Lipschitz perturbation, and run the conjugacy engine.  The
result conjugates the map to its derivative on the inner cutoff ball, where
the cut perturbation agrees with the true nonlinearity.

Holder regularity: the backward displacement along the perturbed orbit is
theta-Holder whenever

    max(|T|_M| * |T^{-1}|^theta, |T^{-1}|_N| * |T|^theta) < 1,

and its Holder constant has a closed geometric form in the restriction
norms, the perturbation size and theta.  Certificates carry (theta, C) and
the domain diameter on which they are quoted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .conjugacy import (
    ConjugacyMap,
    SeriesPolicy,
    solve_conjugacy,
    solve_inverse_conjugacy,
)
from .operators import GHOperator, admissible_eps
from .perturbations import CutoffProfile, Perturbation, cutoff, zero_perturbation
from .vectors import StateVector, norm, zero_like

__all__ = [
    "HolderCertificate",
    "LinearizationProblem",
    "LinearizationResult",
    "HolderProbeReport",
    "theta_bound",
    "holder_constant",
    "make_holder_certificate",
    "empirical_holder",
    "linearize",
]


@dataclass(frozen=True)
class HolderCertificate:
    """Certified Holder data: exponent, constant, and quoted domain diameter."""

    theta: float
    C: float
    domain_diameter: float

    def __post_init__(self) -> None:
        if not (0.0 < self.theta <= 1.0):
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.C < 0.0 or not math.isfinite(self.C):
            raise ValueError(f"C must be finite and >= 0, got {self.C}")
        if not (0.0 < self.domain_diameter < 1.0):
            raise ValueError(
                f"domain diameter must lie in (0, 1), got {self.domain_diameter}"
            )


def theta_bound(op: GHOperator) -> float:
    """Largest certifiable Holder exponent scale for this operator, capped at 1.

    Equals min(-ln|T^{-1}|_N| / ln|T|, -ln|T|_M| / ln|T^{-1}|), each term
    present only when the corresponding splitting component is nontrivial.
    Requires the installed restriction norms to be proper contractions; if
    they are not, renorm with the adapted norm first.
    """
    terms = []
    if not op.m_is_trivial:
        if op.norm_T_on_M >= 1.0:
            raise ValueError(
                f"|T restricted to M| = {op.norm_T_on_M} is not < 1; "
                "install an adapted norm before asking for a Holder exponent"
            )
        if op.norm_Tinv <= 1.0:
            raise ValueError("|T^{-1}| must exceed 1 when M is nontrivial")
        terms.append(-math.log(op.norm_T_on_M) / math.log(op.norm_Tinv))
    if not op.n_is_trivial:
        if op.norm_Tinv_on_N >= 1.0:
            raise ValueError(
                f"|T^{{-1}} restricted to N| = {op.norm_Tinv_on_N} is not < 1; "
                "install an adapted norm before asking for a Holder exponent"
            )
        if op.norm_T <= 1.0:
            raise ValueError("|T| must exceed 1 when N is nontrivial")
        terms.append(-math.log(op.norm_Tinv_on_N) / math.log(op.norm_T))
    if not terms:
        raise ValueError("operator has a trivial splitting on both sides")
    return min(1.0, min(terms))


def holder_constant(
    op: GHOperator,
    beta: Perturbation | None,
    theta: float,
    eps: float,
) -> float:
    """Closed-form Holder constant for the backward displacement.

    C sums two geometric series: the stable side with ratio
    |T|_M| * (|T^{-1}| + eps*s)^theta where s = |T^{-1}|^2 / (1 - |T^{-1}| eps)
    covers the perturbed backward orbit growth, and the unstable side with
    ratio |T^{-1}|_N| * (|T| + eps)^theta covers the forward one.  Both
    ratios must stay below 1; a trivial splitting component contributes
    nothing because its projection norm vanishes.
    """
    if not (0.0 < theta <= 1.0):
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if eps == 0.0:
        return 0.0
    if beta is not None and max(beta.sup_bound, beta.lip_bound) > eps:
        raise ValueError(
            f"eps = {eps} does not dominate the perturbation bounds "
            f"({beta.sup_bound}, {beta.lip_bound})"
        )
    if eps * op.norm_Tinv >= 1.0:
        raise ValueError(
            f"eps must stay below 1/|T^{{-1}}| = {1.0 / op.norm_Tinv}, got {eps}"
        )
    s = op.norm_Tinv**2 / (1.0 - op.norm_Tinv * eps)
    total = 0.0
    if not op.m_is_trivial:
        inflated = (op.norm_Tinv + eps * s) ** theta
        ratio = op.norm_T_on_M * inflated
        if ratio >= 1.0:
            raise ValueError(
                f"eps too large for this theta: stable-side ratio "
                f"|T|_M|*(|T^-1|+eps*s)^theta = {ratio} >= 1"
            )
        total += 2.0 * eps * op.norm_P_M * inflated / (1.0 - ratio)
    if not op.n_is_trivial:
        ratio = op.norm_Tinv_on_N * (op.norm_T + eps) ** theta
        if ratio >= 1.0:
            raise ValueError(
                f"eps too large for this theta: unstable-side ratio "
                f"|T^-1|_N|*(|T|+eps)^theta = {ratio} >= 1"
            )
        total += 2.0 * eps * op.norm_P_N * op.norm_Tinv_on_N / (1.0 - ratio)
    return total


def make_holder_certificate(
    op: GHOperator,
    beta: Perturbation | None,
    theta: float,
    eps: float,
    domain_diameter: float,
) -> HolderCertificate:
    """Bundle a validated (theta, C, diameter) certificate."""
    cap = theta_bound(op)
    if theta >= cap:
        raise ValueError(f"theta = {theta} must stay below the exponent bound {cap}")
    c = holder_constant(op, beta, theta, eps)
    return HolderCertificate(theta=theta, C=c, domain_diameter=domain_diameter)


@dataclass
class HolderProbeReport:
    """Observed Holder ratios of a displacement against the certified constant."""

    theta: float
    constant: float
    inflation: float
    n_pairs: int
    max_ratio: float
    per_pair: list[float]

    @property
    def bound(self) -> float:
        return self.constant + self.inflation

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.bound

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "constant": self.constant,
            "inflation": self.inflation,
            "n_pairs": self.n_pairs,
            "max_ratio": self.max_ratio,
            "bound": self.bound,
            "passed": self.passed,
        }


def empirical_holder(
    cmap: ConjugacyMap,
    cert: HolderCertificate,
    pairs: Sequence[tuple[StateVector, StateVector]],
) -> HolderProbeReport:
    """Max displacement Holder ratio over point pairs within the quoted diameter.

    The reported bound is C plus an inflation term 2*E / min_distance^theta
    covering the maps' certified evaluation error E on both endpoints.
    """
    kind = cmap.op.norm_kind
    ratios = []
    min_dist = math.inf
    for x, y in pairs:
        dist = norm(x - y, kind)
        if dist == 0.0:
            continue
        if dist > cert.domain_diameter * (1.0 + 1e-12):
            raise ValueError(
                f"pair distance {dist} exceeds the certificate diameter "
                f"{cert.domain_diameter}"
            )
        min_dist = min(min_dist, dist)
        gap = norm(cmap.displacement(x) - cmap.displacement(y), kind)
        ratios.append(gap / dist**cert.theta)
    inflation = (
        0.0
        if not ratios
        else 2.0 * cmap.certified_error / min_dist**cert.theta
    )
    return HolderProbeReport(
        theta=cert.theta,
        constant=cert.C,
        inflation=inflation,
        n_pairs=len(ratios),
        max_ratio=max(ratios, default=0.0),
        per_pair=ratios,
    )


@dataclass
class LinearizationProblem:
    """A nonlinear map with a generalized hyperbolic fixed point.

    ``func`` is the map F, ``fixed_point`` is p with F(p) = p, and
    ``derivative`` is the operator DF_p (validated generalized hyperbolic at
    construction of the operator).  ``nonlinearity_lip`` must return, for a
    radius rho, a certified Lipschitz constant of F(x + p) - p - DF_p x on
    the ball of radius rho; ``lip_certification`` records whether that bound
    is analytic or sampled.
    """

    func: Callable[[StateVector], StateVector]
    fixed_point: StateVector
    derivative: GHOperator
    gamma: float
    cutoff_r: float
    nonlinearity_lip: Callable[[float], float]
    theta: float | None = None
    lip_certification: str = "analytic"

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.cutoff_r <= 0.0:
            raise ValueError(f"cutoff_r must be positive, got {self.cutoff_r}")
        drift = norm(
            self.func(self.fixed_point) - self.fixed_point,
            self.derivative.norm_kind,
        )
        if drift > 1e-10:
            raise ValueError(f"fixed point residual |F(p) - p| = {drift} exceeds 1e-10")


@dataclass
class LinearizationResult:
    """Output of the linearization workflow.

    ``backward`` conjugates the translated map into the derivative
    (H o G = T o H near 0) and is the production direction; ``forward`` is
    its inverse conjugacy.  The conjugacy with the original map holds on the
    ball of radius ``u_radius`` around the fixed point:
    linearized(F(y)) = T(linearized(y)) there.
    """

    problem: LinearizationProblem
    forward: ConjugacyMap
    backward: ConjugacyMap
    beta: Perturbation
    u_radius: float
    eps: float
    cert: HolderCertificate

    @property
    def fixed_point(self) -> StateVector:
        return self.problem.fixed_point

    def linearized(self, y: StateVector) -> StateVector:
        """Coordinates in which the map acts linearly: K(y - p)."""
        return self.backward(y - self.fixed_point)

    def conjugacy_residual(self, y: StateVector) -> float:
        """|H(F(y)) - DF_p(H(y))| at a point y (meaningful inside u_radius)."""
        op = self.problem.derivative
        lhs = self.linearized(self.problem.func(y))
        rhs = op.apply(self.linearized(y))
        return norm(lhs - rhs, op.norm_kind)

    @property
    def certified_residual_bound(self) -> float:
        op = self.problem.derivative
        return self.backward.certified_error * (1.0 + op.norm_T)

    def report(self) -> dict:
        return {
            "u_radius": self.u_radius,
            "eps": self.eps,
            "gamma": self.problem.gamma,
            "theta": self.cert.theta,
            "C": self.cert.C,
            "certified_residual_bound": self.certified_residual_bound,
        }


def linearize(
    problem: LinearizationProblem,
    policy: SeriesPolicy,
    picard_tol: float,
    r_min: float = 1e-12,
    eps_margin: float = 0.1,
) -> LinearizationResult:
    """Conjugate a map to its derivative near a generalized hyperbolic fixed point.

    Chooses eps as the smaller of the admissible bound for gamma and
    (1 - eps_margin) / |T^{-1}|, then halves the cutoff radius until the cut
    nonlinearity fits under eps (both its Lipschitz constant, with the
    factor-3 cutoff inflation, and its sup bound).  The conjugacy with the
    original map is certified on the inner ball only, where the cutoff is
    the identity.
    """
    op = problem.derivative
    p = problem.fixed_point
    fixed_at_origin = norm(p, op.norm_kind) == 0.0

    def translated_map(u: StateVector) -> StateVector:
        if fixed_at_origin:
            return problem.func(u)
        return problem.func(u + p) - p

    def nonlinearity(u: StateVector) -> StateVector:
        return translated_map(u) - op.apply(u)

    eps = min(
        admissible_eps(op, problem.gamma),
        (1.0 - eps_margin) / op.norm_Tinv,
    )
    r = problem.cutoff_r
    while True:
        lip_ball = problem.nonlinearity_lip(2.0 * r)
        if lip_ball < 0.0:
            raise ValueError("nonlinearity_lip must return nonnegative bounds")
        if 3.0 * lip_ball <= eps and 2.0 * r * lip_ball <= eps:
            break
        r *= 0.5
        if r < r_min:
            raise ValueError(
                f"nonlinearity too steep: cutoff radius fell below {r_min} "
                f"before its Lipschitz bound fit under eps = {eps}"
            )
    if lip_ball == 0.0:
        beta = zero_perturbation()
    else:
        beta = cutoff(
            nonlinearity,
            lip_ball,
            CutoffProfile(r),
            norm_kind=op.norm_kind,
            zero=zero_like(p),
            certification=problem.lip_certification,
        )
    forward = solve_conjugacy(op, beta, problem.gamma, policy, picard_tol)
    backward = solve_inverse_conjugacy(op, beta, policy)
    theta = problem.theta if problem.theta is not None else theta_bound(op) / 2.0
    eps_eff = max(beta.sup_bound, beta.lip_bound)
    diameter = min(2.0 * r, 0.999)
    cert = make_holder_certificate(op, beta, theta, eps_eff, diameter)
    return LinearizationResult(
        problem=problem,
        forward=forward,
        backward=backward,
        beta=beta,
        u_radius=r,
        eps=eps,
        cert=cert,
    )
