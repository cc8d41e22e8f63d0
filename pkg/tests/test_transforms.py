import numpy as np
import pytest

from crossdiff.errors import (
    DegenerateSpectrumGap,
    MinimizerDiverged,
    NonPositiveDensity,
    RootBracketFailure,
    SimplexViolation,
)
from crossdiff.model import build_system_spec
from crossdiff.spectral import eigenstructure
from crossdiff.transforms import (
    aggregate_equal_k,
    dpsi_general,
    jacobian_rank1,
    phi_alt,
    phi_general,
    phi_rank1,
    psi_alt,
    psi_general,
    psi_rank1,
    push_forward_general,
    push_forward_rank1,
)


def rank1_spec(k, a=None, d=1):
    k = list(k)
    return build_system_spec({"k": k, "a": a or [1.0] * len(k), "d": d})


def random_psd(rng, n, rank):
    V = rng.standard_normal((n, rank))
    return V @ V.T


class TestRank1:
    def test_hand_example(self):
        spec = rank1_spec([1.0, 2.0])
        u = np.array([0.5, 1.5])
        w = phi_rank1(u, spec)
        assert w[0] == pytest.approx(np.log(0.5) - 0.5 * np.log(1.5))
        assert w[1] == pytest.approx(2.0)
        np.testing.assert_allclose(psi_rank1(w, spec), u, rtol=1e-12)

    def test_round_trip_batched(self):
        rng = np.random.default_rng(0)
        for n in (2, 3, 5):
            spec = rank1_spec(sorted(rng.uniform(0.5, 3.0, n) + np.arange(n)))
            u = rng.uniform(0.1, 3.0, size=(n, 500))
            w = phi_rank1(u, spec)
            back = psi_rank1(w, spec)
            assert np.max(np.abs(back - u)) / np.max(u) < 1e-10

    def test_warm_start(self):
        spec = rank1_spec([1.0, 2.0, 4.0])
        rng = np.random.default_rng(1)
        u = rng.uniform(0.2, 2.0, size=(3, 50))
        w = phi_rank1(u, spec)
        back = psi_rank1(w, spec, u_n_guess=u[-1] * 1.01)
        np.testing.assert_allclose(back, u, rtol=1e-10)

    def test_jacobian_det_closed_form(self):
        rng = np.random.default_rng(2)
        for n in (2, 3, 5):
            spec = rank1_spec(list(np.arange(1.0, n + 1.0)))
            for _ in range(50):
                u = rng.uniform(0.1, 3.0, n)
                D, det = jacobian_rank1(u, spec)
                assert det == pytest.approx(np.linalg.det(D), rel=1e-12)
                assert det > 0

    def test_push_forward_matches_jacobian(self):
        spec = rank1_spec([1.0, 3.0])
        rng = np.random.default_rng(3)
        u = rng.uniform(0.2, 2.0, 2)
        udot = rng.standard_normal(2)
        D, _ = jacobian_rank1(u, spec)
        np.testing.assert_allclose(push_forward_rank1(u, udot, spec), D @ udot, rtol=1e-12)

    def test_requires_strict_gap(self):
        spec = rank1_spec([2.0, 2.0])
        with pytest.raises(DegenerateSpectrumGap):
            phi_rank1(np.array([1.0, 1.0]), spec)

    def test_rejects_nonpositive(self):
        spec = rank1_spec([1.0, 2.0])
        with pytest.raises(NonPositiveDensity):
            phi_rank1(np.array([1.0, 0.0]), spec)
        with pytest.raises(RootBracketFailure):
            psi_rank1(np.array([0.0, -1.0]), spec)


class TestGeneral:
    def test_round_trip_all_ranks(self):
        rng = np.random.default_rng(4)
        for n in range(2, 7):
            for rank in range(1, n + 1):
                E = eigenstructure(random_psd(rng, n, rank))
                u = rng.uniform(0.1, 3.0, size=(n, 100))
                w = phi_general(u, E)
                back = psi_general(w, E)
                assert np.max(np.abs(back - u)) / np.max(u) < 1e-10

    def test_inverse_diverges_outside_cone(self):
        E = eigenstructure(np.array([[1.0, 1.0], [1.0, 1.0]]))
        # w_II must be positive in the direction P 1; a large negative value
        # lies outside P applied to the positive cone
        w = np.array([0.0, -5.0])
        with pytest.raises(MinimizerDiverged):
            psi_general(w, E)

    def test_sensitivities_match_finite_differences(self):
        rng = np.random.default_rng(5)
        h = 1e-5
        for n, rank in ((2, 1), (3, 2), (4, 2)):
            E = eigenstructure(random_psd(rng, n, rank))
            m = n - rank
            for _ in range(20):
                u = rng.uniform(0.3, 2.0, n)
                w = phi_general(u, E)
                sens = dpsi_general(w, E)
                # dXF is the SPD range block P D(u) P^T
                np.testing.assert_allclose(sens.dXF, E.P @ np.diag(u) @ E.P.T, rtol=1e-10)
                np.testing.assert_allclose(sens.dXF_inv, np.linalg.inv(sens.dXF), rtol=1e-8)
                for mm in range(n):
                    e = np.zeros(n)
                    e[mm] = h
                    du = (psi_general(w + e, E) - psi_general(w - e, E)) / (2 * h)
                    if mm < m:
                        pred = u * (E.Q.T[:, mm] + E.P.T @ sens.dX_dwI[:, mm])
                    else:
                        pred = u * (E.P.T @ sens.dX_dwII[:, mm - m])
                    np.testing.assert_allclose(du, pred, rtol=1e-5, atol=1e-8)

    def test_push_forward_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        E = eigenstructure(random_psd(rng, 3, 1))
        u = rng.uniform(0.3, 2.0, 3)
        udot = rng.standard_normal(3)
        h = 1e-6
        fd = (phi_general(u + h * udot, E) - phi_general(u - h * udot, E)) / (2 * h)
        np.testing.assert_allclose(push_forward_general(u, udot, E), fd, rtol=1e-6, atol=1e-9)


class TestSimplexAlternative:
    def test_hand_example(self):
        spec = rank1_spec([1.0, 2.0], a=[1.0, 2.0])
        u = np.array([0.5, 1.5])
        w = phi_alt(u, spec)
        L = 0.5 + np.sqrt(1.5)
        assert w[0] == pytest.approx(0.5 / L)
        assert w[1] == pytest.approx(0.5 + 3.0)
        np.testing.assert_allclose(psi_alt(w, spec), u, rtol=1e-10)

    def test_round_trip(self):
        rng = np.random.default_rng(8)
        for n in (2, 3, 4):
            k = list(np.arange(1.0, n + 1.0))
            spec = rank1_spec(k, a=k)
            u = rng.uniform(0.1, 3.0, size=(n, 300))
            w = phi_alt(u, spec)
            back = psi_alt(w, spec)
            assert np.max(np.abs(back - u)) / np.max(u) < 1e-10

    def test_hyperbolic_part_lives_on_simplex(self):
        spec = rank1_spec([1.0, 2.0, 3.0], a=[1.0, 2.0, 3.0])
        rng = np.random.default_rng(9)
        u = rng.uniform(0.1, 2.0, size=(3, 100))
        w = phi_alt(u, spec)
        assert np.all(w[:-1] > 0)
        assert np.all(w[:-1].sum(axis=0) < 1)

    def test_rejects_simplex_violation(self):
        spec = rank1_spec([1.0, 2.0], a=[1.0, 2.0])
        with pytest.raises(SimplexViolation):
            psi_alt(np.array([1.5, 1.0]), spec)


class TestAggregation:
    def test_identity_when_gap_strict(self):
        spec = rank1_spec([1.0, 2.0])
        reduced, field, plan = aggregate_equal_k(spec, np.ones((2, 4)))
        assert plan.identity
        assert reduced.n == 2

    def test_merges_equal_tail(self):
        spec = rank1_spec([1.0, 2.0, 2.0])
        u = np.array([[1.0], [2.0], [3.0]])
        reduced, field, plan = aggregate_equal_k(spec, u)
        assert not plan.identity
        assert plan.merged_from == (1, 2)
        assert reduced.n == 2
        np.testing.assert_allclose(reduced.k, [1.0, 2.0])
        np.testing.assert_allclose(field, [[1.0], [5.0]])

    def test_all_equal_collapses_to_scalar(self):
        spec = rank1_spec([2.0, 2.0, 2.0])
        u = np.ones((3, 5))
        reduced, field, plan = aggregate_equal_k(spec, u)
        assert reduced.n == 1
        np.testing.assert_allclose(field, 3.0 * np.ones((1, 5)))

    def test_requires_sorted(self):
        spec = rank1_spec([2.0, 1.0])
        with pytest.raises(DegenerateSpectrumGap):
            aggregate_equal_k(spec, None)
