import numpy as np
import pytest

from crossdiff.errors import (
    BadDimension,
    NonPositiveCoefficient,
    NonSymmetric,
    NotPositiveSemidefinite,
)
from crossdiff.model import (
    apply_permutation,
    build_system_spec,
    canonical_relabel,
    entropy_kind,
    invert_permutation,
)


def test_rank1_spec_roundtrip():
    spec = build_system_spec({"k": [1.0, 2.0], "a": [0.5, 1.5], "d": 1})
    assert spec.is_rank1
    assert spec.n == 2
    np.testing.assert_allclose(spec.k, [1.0, 2.0])


def test_general_spec_records_rank():
    B = np.array([[1.0, 1.0], [1.0, 1.0]])
    spec = build_system_spec({"B": B, "d": 1})
    assert spec.kind == "general"
    assert spec.rank == 1
    full = build_system_spec({"B": np.eye(3), "d": 2})
    assert full.rank == 3


def test_nonpositive_mobility_rejected():
    with pytest.raises(NonPositiveCoefficient):
        build_system_spec({"k": [1.0, -2.0], "a": [1.0, 1.0], "d": 1})
    with pytest.raises(NonPositiveCoefficient):
        build_system_spec({"k": [1.0, 2.0], "a": [0.0, 1.0], "d": 1})


def test_asymmetric_matrix_rejected():
    B = np.array([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(NonSymmetric):
        build_system_spec({"B": B, "d": 1})


def test_indefinite_matrix_rejected():
    B = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    with pytest.raises(NotPositiveSemidefinite):
        build_system_spec({"B": B, "d": 1})


def test_bad_dimension_rejected():
    with pytest.raises(BadDimension):
        build_system_spec({"k": [1.0], "a": [1.0], "d": 3})
    with pytest.raises(BadDimension):
        build_system_spec({"d": 1})


def test_canonical_relabel_sorts_k():
    spec = build_system_spec({"k": [3.0, 1.0, 2.0], "a": [0.1, 0.2, 0.3], "d": 1})
    sorted_spec, perm = canonical_relabel(spec)
    np.testing.assert_allclose(sorted_spec.k, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(sorted_spec.a, [0.2, 0.3, 0.1])
    values = np.array([10.0, 20.0, 30.0])
    permuted = apply_permutation(values, perm)
    np.testing.assert_allclose(permuted, [20.0, 30.0, 10.0])
    np.testing.assert_allclose(permuted[invert_permutation(perm)], values)


def test_relabel_is_stable_on_sorted_input():
    spec = build_system_spec({"k": [1.0, 1.0, 2.0], "a": [1.0, 2.0, 3.0], "d": 1})
    _, perm = canonical_relabel(spec)
    np.testing.assert_array_equal(perm, [0, 1, 2])


def test_entropy_kind_weights():
    spec = build_system_spec({"k": [1.0, 2.0], "a": [2.0, 2.0], "d": 1})
    kind = entropy_kind("shannon_f1", spec)
    np.testing.assert_allclose(kind.pi, [2.0, 1.0])
    with pytest.raises(ValueError):
        entropy_kind("nope", spec)
    specB = build_system_spec({"B": np.eye(2), "d": 1})
    with pytest.raises(ValueError):
        entropy_kind("shannon_f1", specB)
