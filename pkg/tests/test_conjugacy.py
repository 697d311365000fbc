"""Series solves, conjugacy maps, verification and error certification."""

import pytest

from ghlin import (
    DenseVector,
    SeriesPolicy,
    SparseVector,
    WeightSpec,
    admissible_eps,
    constant_perturbation,
    displacement_space_residual,
    eval_H,
    eval_H_prime,
    intertwining_solution,
    make_matrix_operator,
    make_shift,
    norm,
    sine_perturbation,
    solve_conjugacy,
    solve_inverse_conjugacy,
    truncation_tail_bound,
    truncation_terms,
    verify_conjugacy,
    verify_inverse_pair,
    zero_perturbation,
)
from ghlin.linearize import make_holder_certificate
from conftest import random_sparse

POLICY = SeriesPolicy(tol=1e-10)


def diag_half_three():
    return make_matrix_operator([[0.5, 0.0], [0.0, 3.0]], t=0.6)


def contraction_1d():
    return make_matrix_operator([[0.5]], t=0.6)


def dilation_1d():
    return make_matrix_operator([[2.0]], t=0.6)


# -- series policy and truncation -------------------------------------------


def test_policy_validation():
    with pytest.raises(ValueError):
        SeriesPolicy(tol=0.0)
    with pytest.raises(ValueError):
        SeriesPolicy(tol=1e-6, k_cap=0)


def test_truncation_meets_tolerance():
    op = diag_half_three()
    for sup in (1.0, 0.3, 1e-3):
        for tol in (1e-4, 1e-8, 1e-12):
            terms = truncation_terms(op, sup, SeriesPolicy(tol=tol))
            assert truncation_tail_bound(op, sup, terms) <= tol
            if terms > 0:
                assert truncation_tail_bound(op, sup, terms - 1) > tol


def test_truncation_zero_source_needs_no_terms():
    assert truncation_terms(diag_half_three(), 0.0, POLICY) == 0


def test_truncation_cap_enforced():
    op = diag_half_three()
    with pytest.raises(Exception, match="cap"):
        truncation_terms(op, 1.0, SeriesPolicy(tol=1e-300, k_cap=10))


# -- the intertwining series -------------------------------------------------


def test_series_zero_source_is_zero(rng):
    op = diag_half_three()
    zero = lambda u: DenseVector([0.0, 0.0])
    for _ in range(10):
        x = DenseVector(rng.uniform(-1, 1, 2))
        out = intertwining_solution(op, op.apply, op.apply_inverse, zero, 0.0, x, POLICY)
        assert norm(out) == 0.0


def test_series_constant_source_closed_form(rng):
    # phi(Rx) - T phi(x) = (1,1) has the constant solution (2, -1/2),
    # independent of the orbit map R
    op = diag_half_three()
    const = lambda u: DenseVector([1.0, 1.0])

    def r_apply(u):  # an arbitrary invertible affine orbit map
        return DenseVector([u.array[0] + 0.3, 2.0 * u.array[1] - 0.1])

    def r_invert(u):
        return DenseVector([u.array[0] - 0.3, (u.array[1] + 0.1) / 2.0])

    for _ in range(10):
        x = DenseVector(rng.uniform(-1, 1, 2))
        out = intertwining_solution(op, r_apply, r_invert, const, 1.0, x, POLICY)
        assert norm(out - DenseVector([2.0, -0.5])) <= POLICY.tol


def test_series_contraction_1d_closed_form():
    op = contraction_1d()
    const = lambda u: DenseVector([1.0])
    out = intertwining_solution(op, op.apply, op.apply_inverse, const, 1.0, DenseVector([0.7]), POLICY)
    assert out.array[0] == pytest.approx(2.0, abs=POLICY.tol)


def _twisted_difference(op, phi, x):
    # phi(T x) - T(phi(x))
    return phi(op.apply(x)) - op.apply(phi(x))


def test_series_round_trip_recovers_source(rng):
    op = diag_half_three()
    beta = sine_perturbation(0.3, 1.0, window=[0, 1])
    policy = SeriesPolicy(tol=1e-8)

    def phi(u):
        return intertwining_solution(
            op, op.apply, op.apply_inverse, beta, beta.sup_bound, u, policy
        )

    for _ in range(25):
        x = DenseVector(rng.uniform(-1, 1, 2))
        recovered = _twisted_difference(op, phi, x)
        assert norm(recovered - beta(x)) <= 2.0 * policy.tol


def test_series_truncation_certificate(rng):
    op = diag_half_three()
    beta = sine_perturbation(0.3, 1.0, window=[0, 1])
    policy = SeriesPolicy(tol=1e-6)
    terms = truncation_terms(op, beta.sup_bound, policy)
    predicted = truncation_tail_bound(op, beta.sup_bound, terms)
    for _ in range(25):
        x = DenseVector(rng.uniform(-1, 1, 2))
        coarse = intertwining_solution(
            op, op.apply, op.apply_inverse, beta, beta.sup_bound, x, policy, terms=terms
        )
        fine = intertwining_solution(
            op, op.apply, op.apply_inverse, beta, beta.sup_bound, x, policy, terms=2 * terms
        )
        assert norm(fine - coarse) <= predicted


# -- forward and backward conjugacies ------------------------------------------


def test_zero_perturbation_gives_identity(rng):
    op = diag_half_three()
    fwd = solve_conjugacy(op, zero_perturbation(), 0.5, POLICY, picard_tol=1e-10)
    bwd = solve_inverse_conjugacy(op, zero_perturbation(), POLICY)
    for _ in range(10):
        x = DenseVector(rng.uniform(-1, 1, 2))
        assert eval_H(fwd, x) == x
        assert eval_H_prime(bwd, x) == x
    assert fwd.certified_error == 0.0


def test_contraction_closed_form_displacement(rng):
    op = contraction_1d()
    beta = constant_perturbation(DenseVector([0.1]))
    fwd = solve_conjugacy(op, beta, 0.9, POLICY, picard_tol=1e-12)
    for _ in range(20):
        x = DenseVector([rng.uniform(-3, 3)])
        assert abs(fwd.displacement(x).array[0] - 0.2) <= 1e-10
    assert eval_H(fwd, DenseVector([1.0])).array[0] == pytest.approx(1.2, abs=1e-10)


def test_dilation_closed_form_displacement(rng):
    op = dilation_1d()
    beta = constant_perturbation(DenseVector([0.1]))
    fwd = solve_conjugacy(op, beta, 0.9, POLICY, picard_tol=1e-12)
    for _ in range(20):
        x = DenseVector([rng.uniform(-3, 3)])
        assert abs(fwd.displacement(x).array[0] + 0.1) <= 1e-10


def test_backward_closed_form_inverts_forward(rng):
    op = contraction_1d()
    beta = constant_perturbation(DenseVector([0.1]))
    fwd = solve_conjugacy(op, beta, 0.9, POLICY, picard_tol=1e-12)
    bwd = solve_inverse_conjugacy(op, beta, POLICY)
    for _ in range(20):
        x = DenseVector([rng.uniform(-2, 2)])
        assert abs(bwd.displacement(x).array[0] + 0.2) <= 1e-10
        assert norm(eval_H_prime(bwd, eval_H(fwd, x)) - x) <= 1e-10
        assert norm(eval_H(fwd, eval_H_prime(bwd, x)) - x) <= 1e-10


def test_forward_preconditions():
    op = diag_half_three()
    eps = admissible_eps(op, 0.2)
    beta = sine_perturbation(2.0 * eps, 1.0, window=[0])
    with pytest.raises(ValueError, match=r"gamma\*\(1-t\)/\(c\*d\*\(1\+t\)\)"):
        solve_conjugacy(op, beta, 0.2, POLICY, picard_tol=1e-8)


def test_verify_conjugacy_zero_beta_exact(rng):
    op = diag_half_three()
    beta = zero_perturbation()
    fwd = solve_conjugacy(op, beta, 0.5, POLICY, picard_tol=1e-10)
    bwd = solve_inverse_conjugacy(op, beta, POLICY)
    points = [DenseVector(rng.uniform(-1, 1, 2)) for _ in range(50)]
    assert verify_conjugacy(fwd, points).max_residual == 0.0
    assert verify_conjugacy(bwd, points).max_residual == 0.0
    inverse = verify_inverse_pair(fwd, bwd, points)
    assert inverse.max_residual == 0.0 and inverse.certified_bound == 0.0


def test_verify_conjugacy_matrix_instance(rng):
    op = diag_half_three()
    beta = sine_perturbation(0.02, 1.0, window=[0, 1])
    policy = SeriesPolicy(tol=1e-6)
    fwd = solve_conjugacy(op, beta, 0.2, policy, picard_tol=1e-5)
    bwd = solve_inverse_conjugacy(op, beta, policy)
    points = [DenseVector(rng.uniform(-1, 1, 2)) for _ in range(25)]
    fwd_report = verify_conjugacy(fwd, points)
    bwd_report = verify_conjugacy(bwd, points)
    assert fwd_report.passed and fwd_report.max_residual <= fwd_report.certified_bound
    assert bwd_report.passed
    eps_eff = max(beta.sup_bound, beta.lip_bound)
    cert = make_holder_certificate(op, beta, 0.25, eps_eff, 0.999)
    inverse = verify_inverse_pair(fwd, bwd, points, holder=cert)
    assert inverse.passed


def test_verify_inverse_requires_shared_instance(rng):
    op = diag_half_three()
    beta = sine_perturbation(0.02, 1.0, window=[0])
    other = sine_perturbation(0.02, 1.0, window=[0])
    policy = SeriesPolicy(tol=1e-6)
    fwd = solve_conjugacy(op, beta, 0.2, policy, picard_tol=1e-5)
    bwd = solve_inverse_conjugacy(op, other, policy)
    with pytest.raises(ValueError, match="same operator and perturbation"):
        verify_inverse_pair(fwd, bwd, [DenseVector([0.0, 0.0])])


# -- displacement codomain ------------------------------------------------------


def test_membership_residual_vanishes_on_M():
    op = make_shift(WeightSpec(0.5, 2.0), t=0.55)
    v = SparseVector({-2: 1.0, 0: -3.0})
    assert displacement_space_residual(op, v) == 0.0


def test_membership_residual_single_coordinate():
    # (T P_N v)_0 = w_1 v_1, and the projection onto M keeps exactly that
    op = make_shift(WeightSpec(0.5, 2.0, core={1: 3.0}), t=0.8)
    assert displacement_space_residual(op, SparseVector({1: 1.0})) == 3.0


def test_engine_values_stay_in_displacement_space(rng):
    op = make_shift(WeightSpec(0.5, 2.0), t=0.55)
    beta = sine_perturbation(0.05, 1.0, window=range(-1, 2))
    policy = SeriesPolicy(tol=1e-6)
    fwd = solve_conjugacy(op, beta, 0.2, policy, picard_tol=1e-3)
    bwd = solve_inverse_conjugacy(op, beta, policy)
    for _ in range(10):
        x = random_sparse(rng)
        for value in (fwd.displacement(x), bwd.displacement(x)):
            assert displacement_space_residual(op, value) <= policy.tol * op.norm_T
            # for this splitting, membership is exactly the vanishing of
            # the coordinate at index 1
            assert value[1] == 0.0


# -- error bookkeeping -----------------------------------------------------------


def test_series_value_norm_within_gain_bound(rng):
    # the solution norm never exceeds c*d*(1+t)/(1-t) times the source sup,
    # up to the truncation tolerance
    op = diag_half_three()
    beta = sine_perturbation(0.3, 1.0, window=[0, 1])
    policy = SeriesPolicy(tol=1e-8)
    k = op.constants
    gain = k.c * k.d * (1.0 + k.t) / (1.0 - k.t)
    for _ in range(50):
        x = DenseVector(rng.uniform(-2, 2, 2))
        value = intertwining_solution(
            op, op.apply, op.apply_inverse, beta, beta.sup_bound, x, policy
        )
        assert norm(value) <= gain * beta.sup_bound + policy.tol


def test_admissible_lipschitz_gives_contraction_factor_gamma():
    op = make_shift(WeightSpec(0.5, 2.0), t=0.55)
    gamma = 0.2
    eps = admissible_eps(op, gamma)
    beta = sine_perturbation(eps, 1.0, window=[0])
    fwd = solve_conjugacy(op, beta, gamma, SeriesPolicy(tol=1e-6), picard_tol=1e-3)
    assert fwd.contraction == pytest.approx(gamma, rel=1e-12)
    assert fwd.contraction < 1.0


def test_picard_increments_contract_pointwise(rng):
    from ghlin.conjugacy import ConjugacyMap

    op = diag_half_three()
    beta = sine_perturbation(0.02, 1.0, window=[0, 1])
    policy = SeriesPolicy(tol=1e-8)
    fwd = solve_conjugacy(op, beta, 0.2, policy, picard_tol=1e-6)
    q = fwd.contraction
    points = [DenseVector(rng.uniform(-1, 1, 2)) for _ in range(20)]

    def level_map(depth):
        return ConjugacyMap(
            op=op, beta=beta, direction="forward", policy=policy,
            terms=fwd.terms, depth=depth, contraction=q,
        )

    maps = [level_map(d) for d in range(fwd.depth + 1)]
    slack = 4.0 * policy.tol / (1.0 - q)
    prev_sup = None
    for d in range(1, fwd.depth + 1):
        sup_inc = max(
            norm(maps[d].displacement(x) - maps[d - 1].displacement(x)) for x in points
        )
        if prev_sup is not None:
            assert sup_inc <= q * prev_sup + slack
        prev_sup = sup_inc


def test_forward_certified_error_within_coarse_bound():
    op = make_shift(WeightSpec(0.5, 2.0), t=0.55)
    beta = sine_perturbation(0.05, 1.0, window=[0])
    policy = SeriesPolicy(tol=1e-6)
    fwd = solve_conjugacy(op, beta, 0.2, policy, picard_tol=1e-4)
    assert fwd.certified_error <= 1e-4 + fwd.depth * policy.tol


def test_displacement_norm_bounded_by_gamma(rng):
    op = make_shift(WeightSpec(0.5, 2.0), t=0.55)
    gamma = 0.2
    eps = admissible_eps(op, gamma)
    beta = sine_perturbation(eps, 1.0, window=range(-1, 2))
    policy = SeriesPolicy(tol=1e-5)
    fwd = solve_conjugacy(op, beta, gamma, policy, picard_tol=5e-4)
    for _ in range(25):
        x = random_sparse(rng)
        assert norm(fwd.displacement(x)) <= gamma + fwd.certified_error


def test_memo_reuses_values(rng):
    op = contraction_1d()
    beta = constant_perturbation(DenseVector([0.1]))
    fwd = solve_conjugacy(op, beta, 0.9, POLICY, picard_tol=1e-12)
    x = DenseVector([0.25])
    first = fwd.displacement(x)
    assert fwd.displacement(DenseVector([0.25])) is first


def test_direction_guards():
    op = contraction_1d()
    beta = constant_perturbation(DenseVector([0.1]))
    fwd = solve_conjugacy(op, beta, 0.9, POLICY, picard_tol=1e-10)
    bwd = solve_inverse_conjugacy(op, beta, POLICY)
    with pytest.raises(ValueError):
        eval_H(bwd, DenseVector([0.0]))
    with pytest.raises(ValueError):
        eval_H_prime(fwd, DenseVector([0.0]))
