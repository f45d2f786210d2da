import numpy as np
import pytest
import scipy.linalg

from conftest import POINTS, random_params
from nhknots.errors import DegenerateSpectrumError, NearEPError, SolverError
from nhknots.lattice import ModelParams, build_bloch, build_real_hamiltonian
from nhknots.spectral import (
    analytic_eigenvalues,
    biorthogonal_eigensystem,
    bloch_eigenvalues,
    eig_dense,
    match_multisets,
    track_bands,
)


def test_eig_dense_diagonal():
    evals, vecs = eig_dense(np.diag([1 + 2j, -3]))
    assert match_multisets(evals, [1 + 2j, -3]) < 1e-14
    np.testing.assert_allclose(np.abs(vecs), np.eye(2))


def test_eig_dense_hermitian_real(rng):
    a = rng.normal(size=(30, 30)) + 1j * rng.normal(size=(30, 30))
    evals, _ = eig_dense(a + a.conj().T)
    assert np.abs(evals.imag).max() < 1e-10


def test_eig_dense_rejects_bad_input():
    with pytest.raises(ValueError):
        eig_dense(np.zeros((2, 3)))
    with pytest.raises(SolverError) as info:
        eig_dense(np.array([[np.nan, 0], [0, 1]]))
    assert "2x2" in str(info.value)


def test_analytic_matches_numeric_k0():
    p = ModelParams(lam=0.1)
    assert match_multisets(analytic_eigenvalues(p, 0.0), eig_dense(build_bloch(p, 0.0))[0]) < 1e-10


def test_u_v_values():
    # u = sum t^2 = 7; the inner root squared is u^2/4 - v with v(0) = 1, v(pi) = 9
    p = ModelParams(lam=0.0, mu=0.0)
    for k, v in [(0.0, 1.0), (np.pi, 9.0)]:
        e = analytic_eigenvalues(p, k)
        np.testing.assert_allclose(sorted(e[:2].real ** 2), sorted([3.5 - np.sqrt(12.25 - v), 3.5 + np.sqrt(12.25 - v)]), atol=1e-12)


def test_hermitian_limit_energies_real(rng):
    for _ in range(10):
        p = random_params(rng, hermitian=True).with_(mu=0.0)
        e = analytic_eigenvalues(p, rng.uniform(0, 2 * np.pi, 50))
        assert np.abs(e.imag).max() < 1e-12


def test_analytic_numeric_random_draws(rng):
    worst = 0.0
    for _ in range(200):
        p = random_params(rng, q_max=3)
        k = rng.uniform(0, 2 * np.pi)
        worst = max(worst, match_multisets(analytic_eigenvalues(p, k), eig_dense(build_bloch(p, k))[0]))
    assert worst < 1e-10


def test_spectrum_symmetry_t1_eq_t3(rng):
    for _ in range(10):
        p = random_params(rng, t1_eq_t3=True)
        k = rng.uniform(0, 2 * np.pi)
        e = np.concatenate([bloch_eigenvalues(p, k), bloch_eigenvalues(p, -k)])
        assert match_multisets(e, -e) < 1e-10
        assert match_multisets(e, np.conj(e)) < 1e-10


def test_match_multisets_large():
    a = np.arange(20) * (1 + 1j)
    assert match_multisets(a, a[::-1]) == 0.0
    with pytest.raises(ValueError):
        match_multisets(a, a[:3])


def test_track_hermitian_identity():
    s = track_bands(ModelParams(lam=0.0, mu=0.0), 128)
    assert s.endpoint_permutation == (0, 1, 2, 3)


@pytest.mark.parametrize("name", list(POINTS))
def test_tracked_bands_close(name):
    s = track_bands(ModelParams(lam=POINTS[name]), 256)
    assert match_multisets(s.bands[0], s.bands[-1]) < 1e-8
    assert s.k_grid[0] == 0 and s.k_grid[-1] == pytest.approx(2 * np.pi)
    assert np.all(np.diff(s.k_grid) > 0)
    # each row is the spectrum at its k
    for m in (0, len(s.k_grid) // 3, -1):
        assert match_multisets(s.bands[m], bloch_eigenvalues(s.params, s.k_grid[m])) < 1e-12


def test_point_c_bands_exchange():
    # stated expectation; the tracker finds the strings of this phase closing
    # on themselves (a doubly crossed pair), see the decisions ledger
    s = track_bands(ModelParams(lam=POINTS["c"]), 512)
    assert s.endpoint_permutation != (0, 1, 2, 3)


@pytest.mark.parametrize("name", list(POINTS))
def test_endpoint_permutation_resolution_stable(name):
    p = ModelParams(lam=POINTS[name])
    assert track_bands(p, 512).endpoint_permutation == track_bands(p, 1024).endpoint_permutation


def test_endpoint_permutations_frozen():
    perms = {name: track_bands(ModelParams(lam=lam), 512).endpoint_permutation for name, lam in POINTS.items()}
    assert perms["a"] == perms["c"] == perms["e"] == (0, 1, 2, 3)
    assert perms["b"] != (0, 1, 2, 3)
    assert perms["d"] != (0, 1, 2, 3)


def test_track_rejects_coarse_grid():
    with pytest.raises(ValueError):
        track_bands(ModelParams(), 32)


def test_track_degenerate_raises():
    # t = 0 everywhere with lam = mu = 0 gives four identical bands
    p = ModelParams(t1=0, t2=0, t3=0, t4=0, lam=0, mu=0)
    with pytest.raises(DegenerateSpectrumError):
        track_bands(p, 64)


def test_biorthogonal_hermitian(rng):
    a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    basis = biorthogonal_eigensystem(a + a.conj().T)
    assert basis.biorthogonality_residual() < 1e-12
    # left and right agree up to a phase per column
    ratio = np.abs(np.sum(basis.left_vectors.conj() * basis.right_vectors, axis=0))
    np.testing.assert_allclose(ratio, 1, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(basis.left_vectors, axis=0), 1, atol=1e-10)


def test_biorthogonal_exceptional_point():
    with pytest.raises(NearEPError):
        biorthogonal_eigensystem(np.array([[0, 1], [0, 0]], dtype=complex))


def test_biorthogonal_point_b():
    h = build_real_hamiltonian(ModelParams(lam=POINTS["b"]), 16)
    basis = biorthogonal_eigensystem(h)
    assert basis.biorthogonality_residual() < 1e-8
    assert basis.completeness_residual() < 1e-7
    # left vectors are right eigenvectors of H^dagger
    lv = basis.left_vectors
    np.testing.assert_allclose(h.conj().T @ lv, lv * basis.eigenvalues.conj(), atol=1e-9)


def test_biorthogonal_degenerate_cluster():
    # two-fold degenerate non-normal matrix: overlap inverse handles the cluster
    h = scipy.linalg.block_diag([[1, 2], [0, -1]], [[1, 0.5], [0, -1]]).astype(complex)
    basis = biorthogonal_eigensystem(h)
    assert basis.biorthogonality_residual() < 1e-12
