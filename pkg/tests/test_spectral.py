import numpy as np

from crossdiff.spectral import eigenstructure, verify_block_identities


def random_psd(rng, n, rank):
    """Symmetric PSD matrix with prescribed rank."""
    V = rng.standard_normal((n, rank))
    return V @ V.T


def test_block_identities_random_matrices():
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in range(2, 7):
        for rank in range(1, n + 1):
            B = random_psd(rng, n, rank)
            E = eigenstructure(B)
            assert E.rank == rank
            report = verify_block_identities(E, B)
            worst = max(worst, max(report.values()))
    assert worst < 1e-10


def test_kernel_eigenvalues_snapped_to_zero():
    rng = np.random.default_rng(11)
    B = random_psd(rng, 5, 2)
    E = eigenstructure(B)
    assert np.all(E.lam[:3] == 0.0)
    assert np.all(E.lam_range > 0)


def test_deterministic_output():
    rng = np.random.default_rng(13)
    B = random_psd(rng, 4, 2)
    E1 = eigenstructure(B)
    E2 = eigenstructure(B.copy())
    np.testing.assert_array_equal(E1.basis, E2.basis)
    np.testing.assert_array_equal(E1.lam, E2.lam)


def test_ones_matrix_hand_example():
    B = np.array([[1.0, 1.0], [1.0, 1.0]])
    E = eigenstructure(B)
    assert E.rank == 1
    np.testing.assert_allclose(E.lam, [0.0, 2.0])
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(np.abs(E.Q), [[s, s]])
    np.testing.assert_allclose(E.P, [[s, s]])
    # Q is orthogonal to the range direction
    assert abs(E.Q @ E.P.T)[0, 0] < 1e-14


def test_full_rank_has_empty_kernel_block():
    E = eigenstructure(np.eye(3))
    assert E.Q.shape == (0, 3)
    assert E.P.shape == (3, 3)
    report = verify_block_identities(E, np.eye(3))
    assert max(report.values()) < 1e-14
