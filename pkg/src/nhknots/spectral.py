"""Bloch spectra, band tracking and biorthogonal eigensystems."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DegenerateSpectrumError, NearEPError, SolverError
from .lattice import ModelParams, bloch_potential, build_bloch

PERMUTATIONS_4 = np.array(list(itertools.permutations(range(4))))


def matrix_fingerprint(h: np.ndarray) -> str:
    h = np.ascontiguousarray(h)
    digest = hashlib.sha1(h.tobytes()).hexdigest()[:12]
    return f"{h.shape[0]}x{h.shape[1]}:{digest}"


def _check_square(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise SolverError("matrix has non-finite entries", matrix_fingerprint(h))
    return h


def _residual_check(h, evals, vecs, tol=1e-9):
    scale = max(1.0, float(np.abs(h).sum(axis=0).max()))
    res = np.linalg.norm(h @ vecs - vecs * evals, axis=0) / np.linalg.norm(vecs, axis=0)
    worst = float(res.max()) if res.size else 0.0
    if worst > tol * scale:
        raise SolverError(f"eigenpair residual {worst:.3e} exceeds tolerance", matrix_fingerprint(h))


def eig_dense(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and right eigenvectors (columns) of a general complex matrix."""
    h = _check_square(h)
    try:
        evals, vecs = scipy.linalg.eig(h, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"eigensolver did not converge: {exc}", matrix_fingerprint(h)) from exc
    _residual_check(h, evals, vecs)
    return evals, vecs


def analytic_eigenvalues(params: ModelParams, k) -> np.ndarray:
    """Closed-form energies +-sqrt(u/2 +- sqrt(u^2/4 - v) + V(k)^2).

    Principal-branch square roots; returns shape ``(*k.shape, 4)`` ordered as
    (+,+), (+,-), (-,+), (-,-) in (outer, inner) sign.
    """
    k = np.asarray(k, dtype=float)
    t1, t2, t3, t4 = params.t1, params.t2, params.t3, params.t4
    u = t1**2 + t2**2 + t3**2 + t4**2
    v = t1**2 * t3**2 + t2**2 * t4**2 - 2 * t1 * t2 * t3 * t4 * np.cos(k)
    vk2 = np.asarray(bloch_potential(params, k)) ** 2
    inner = np.sqrt((u * u / 4 - v).astype(complex))
    plus = np.sqrt(u / 2 + inner + vk2)
    minus = np.sqrt(u / 2 - inner + vk2)
    return np.stack([plus, minus, -plus, -minus], axis=-1)


def bloch_eigenvalues(params: ModelParams, k) -> np.ndarray:
    """Numerical eigenvalues of H(k), vectorized over ``k``."""
    return np.linalg.eigvals(build_bloch(params, k))


def match_multisets(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance between two equal-size complex multisets after optimal matching."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError("multisets differ in size")
    if a.size <= 8:
        best = np.inf
        for p in itertools.permutations(range(a.size)):
            best = min(best, float(np.abs(a - b[list(p)]).max()))
        return best
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass
class EnergyStrings:
    """Continuity-tracked bands E_i(k) on an ordered grid spanning [0, 2pi].

    ``endpoint_permutation[i] = j`` means band i arrives at k = 2pi on the
    value that band j started from at k = 0.
    """

    params: ModelParams
    k_grid: np.ndarray
    bands: np.ndarray  # shape (len(k_grid), 4)
    endpoint_permutation: tuple[int, ...]

    @property
    def n_bands(self) -> int:
        return self.bands.shape[1]

    def max_step(self) -> float:
        return float(np.abs(np.diff(self.bands, axis=0)).max())


def _order_k0(evals: np.ndarray) -> np.ndarray:
    # labels at k = 0: ascending real part, ties by imaginary part
    return evals[np.lexsort((evals.imag, np.round(evals.real, 12)))]


def _match_step(prev: np.ndarray, new: np.ndarray):
    costs = np.abs(new[PERMUTATIONS_4] - prev).sum(axis=1)
    order = np.argsort(costs, kind="stable")
    best, second = costs[order[0]], costs[order[1]]
    return new[PERMUTATIONS_4[order[0]]], float(second - best)


def _needs_refinement(prev, matched, margin, ambiguity_tol):
    if margin < ambiguity_tol:
        return True
    # continuity guard: no band may move further than half the closest spacing
    sep = np.abs(prev[:, None] - prev[None, :])
    sep = sep[~np.eye(len(prev), dtype=bool)].min()
    return np.abs(matched - prev).max() > 0.5 * sep


def _track_interval(params, k0, k1, prev, new, depth, max_depth, ambiguity_tol, out_k, out_e):
    matched, margin = _match_step(prev, new)
    if not _needs_refinement(prev, matched, margin, ambiguity_tol):
        out_k.append(k1)
        out_e.append(matched)
        return matched
    if depth >= max_depth:
        if margin < ambiguity_tol:
            raise DegenerateSpectrumError(
                f"band assignment ambiguous near k={k1:.10g} after {max_depth} bisections", k=k1
            )
        out_k.append(k1)
        out_e.append(matched)
        return matched
    km = 0.5 * (k0 + k1)
    mid = bloch_eigenvalues(params, km)
    mid_matched = _track_interval(params, k0, km, prev, mid, depth + 1, max_depth, ambiguity_tol, out_k, out_e)
    return _track_interval(params, km, k1, mid_matched, new, depth + 1, max_depth, ambiguity_tol, out_k, out_e)


def track_bands(
    params: ModelParams,
    n_k: int = 512,
    max_refine: int = 12,
    ambiguity_tol: float = 1e-12,
) -> EnergyStrings:
    """Follow the four Bloch bands continuously from k = 0 to k = 2pi.

    Consecutive eigenvalue sets are matched by the permutation of minimal
    total distance (exhaustive over all 24). Ambiguous or discontinuous steps
    are bisected up to ``max_refine`` times.
    """
    if n_k < 64:
        raise ValueError(f"n_k must be >= 64, got {n_k}")
    ks = 2 * np.pi * np.arange(n_k + 1) / n_k
    raw = bloch_eigenvalues(params, ks)

    start = _order_k0(raw[0])
    out_k, out_e = [0.0], [start]
    prev = start
    for m in range(1, n_k + 1):
        prev = _track_interval(
            params, ks[m - 1], ks[m], prev, raw[m], 0, max_refine, ambiguity_tol, out_k, out_e
        )

    bands = np.array(out_e)
    end = bands[-1]
    costs = np.abs(start[PERMUTATIONS_4] - end).sum(axis=1)
    perm = tuple(int(x) for x in PERMUTATIONS_4[int(np.argmin(costs))])
    if np.abs(start[list(perm)] - end).max() > 1e-8:
        raise DegenerateSpectrumError("tracked bands do not close at k = 2pi", k=2 * np.pi)
    return EnergyStrings(params, np.array(out_k), bands, perm)


@dataclass
class BiorthogonalBasis:
    """Paired eigenvectors with ``left_vectors^H @ right_vectors = I``."""

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    overlap_condition: float

    def biorthogonality_residual(self) -> float:
        n = len(self.eigenvalues)
        return float(np.abs(self.left_vectors.conj().T @ self.right_vectors - np.eye(n)).max())

    def completeness_residual(self) -> float:
        n = len(self.eigenvalues)
        return float(np.abs(self.right_vectors @ self.left_vectors.conj().T - np.eye(n)).max())


def biorthogonal_eigensystem(h: np.ndarray, max_condition: float = 1e8) -> BiorthogonalBasis:
    """Right and left eigenvectors rescaled to mutual identity overlap.

    Left vectors come from the same LAPACK call as the right ones, so each
    pair shares its eigenvalue by construction. Degenerate clusters are
    biorthonormalized by inverting the overlap matrix, and a badly
    conditioned overlap (defective or nearly defective spectrum) raises
    :class:`NearEPError`.
    """
    h = _check_square(h)
    fp = matrix_fingerprint(h)
    try:
        evals, left, right = scipy.linalg.eig(h, left=True, right=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"eigensolver did not converge: {exc}", fp) from exc
    _residual_check(h, evals, right)

    left = left / np.linalg.norm(left, axis=0)
    right = right / np.linalg.norm(right, axis=0)
    overlap = left.conj().T @ right
    try:
        inv_overlap = np.linalg.inv(overlap)
    except np.linalg.LinAlgError as exc:
        raise NearEPError(f"singular left/right overlap [{fp}]") from exc
    # with unit columns ||overlap^-1|| bounds the eigenvalue condition numbers;
    # the max(1, .) keeps a uniformly tiny overlap from looking well conditioned
    cond = float(max(1.0, np.linalg.norm(overlap, 1)) * np.linalg.norm(inv_overlap, 1))
    if not np.isfinite(cond) or cond > max_condition:
        raise NearEPError(f"left/right overlap condition number {cond:.3e} > {max_condition:.0e} [{fp}]")
    left = left @ inv_overlap.conj().T
    return BiorthogonalBasis(evals, right, left, cond)
