"""State vector arithmetic, norms and serialization."""

import pytest

from ghlin import (
    DenseVector,
    NormKind,
    SparseVector,
    axpy,
    norm,
    vector_from_json,
    vector_to_json,
    zero_like,
)
from conftest import random_sparse


def test_norm_triangle_345():
    v = SparseVector({0: 3.0, 2: 4.0})
    assert norm(v, NormKind.lp(2)) == pytest.approx(5.0, abs=1e-14)


def test_norm_sup_picks_largest_coordinate():
    v = SparseVector({0: 3.0, 2: 4.0})
    assert norm(v, NormKind.sup()) == 4.0


def test_norm_empty_support_is_zero():
    assert norm(SparseVector({}), NormKind.lp(1)) == 0.0
    assert norm(DenseVector([0.0, 0.0])) == 0.0


def test_axpy_cancellation_prunes_entry():
    out = axpy(1.0, SparseVector({0: 1.0}), SparseVector({0: -1.0}))
    assert out.to_dict() == {}


def test_axpy_zero_scale_keeps_y():
    out = axpy(0.0, SparseVector({0: 123.0}), SparseVector({5: 2.0}))
    assert out.to_dict() == {5: 2.0}


def test_axpy_disjoint_supports():
    out = axpy(2.0, SparseVector({1: 1.0}), SparseVector({2: 3.0}))
    assert out.to_dict() == {1: 2.0, 2: 3.0}


def test_axpy_backend_mismatch_raises():
    with pytest.raises(ValueError, match="backend mismatch"):
        axpy(1.0, SparseVector({0: 1.0}), DenseVector([1.0]))


def test_dense_dimension_mismatch_raises():
    with pytest.raises(ValueError, match="dimension mismatch"):
        axpy(1.0, DenseVector([1.0]), DenseVector([1.0, 2.0]))


def test_axpy_never_stores_zeros(rng):
    for _ in range(200):
        x = random_sparse(rng)
        y = random_sparse(rng)
        a = rng.uniform(-3, 3)
        out = axpy(a, x, y)
        assert all(v != 0.0 for _, v in out.items())


def test_sup_norm_below_lp_norms(rng):
    for _ in range(100):
        coords = {
            int(i): float(v)
            for i, v in zip(rng.integers(-10, 10, 6), rng.integers(-5, 6, 6))
            if v != 0
        }
        v = SparseVector(coords)
        for p in (1.0, 1.5, 2.0, 4.0):
            assert norm(v, NormKind.sup()) <= norm(v, NormKind.lp(p)) + 1e-12


def test_norm_triangle_inequality(rng):
    for kind in (NormKind.sup(), NormKind.lp(1), NormKind.lp(2)):
        for _ in range(100):
            x, y = random_sparse(rng), random_sparse(rng)
            a = rng.uniform(-3, 3)
            lhs = norm(axpy(a, x, y), kind)
            assert lhs <= abs(a) * norm(x, kind) + norm(y, kind) + 1e-12


def test_norm_kind_validation():
    with pytest.raises(ValueError):
        NormKind.lp(0.5)
    with pytest.raises(ValueError):
        NormKind.lp(float("inf"))


def test_operator_arithmetic_matches_axpy(rng):
    x, y = random_sparse(rng), random_sparse(rng)
    assert (x + y).to_dict() == axpy(1.0, x, y).to_dict()
    assert (y - x).to_dict() == axpy(-1.0, x, y).to_dict()
    assert (2.5 * x).to_dict() == axpy(2.5, x, zero_like(x)).to_dict()


def test_dense_vectors_are_read_only():
    v = DenseVector([1.0, 2.0])
    with pytest.raises(ValueError):
        v.array[0] = 3.0


def test_sparse_json_round_trip():
    v = SparseVector({-3: 1.5, 7: -2.0})
    encoded = vector_to_json(v)
    assert encoded == {"-3": 1.5, "7": -2.0}
    assert vector_from_json(encoded) == v


def test_dense_json_round_trip():
    v = DenseVector([0.5, -1.0])
    encoded = vector_to_json(v)
    assert encoded == [0.5, -1.0]
    assert vector_from_json(encoded) == v
