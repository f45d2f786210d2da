"""Biorthogonal free-fermion ground states: entanglement, CFT fits, fidelity.

The many-body right (left) ground state is the Slater determinant of the
right (left) single-particle eigenvectors whose energies have the lowest
real parts, half of all orbitals in total.
"""

from __future__ import annotations

import datetime
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFillingError, ImaginaryResidueError, NearEPError, NHKnotsError
from .lattice import LatticeSpec, ModelParams, build_real_hamiltonian
from .parallel import ordered_map, resolve_workers
from .spectral import biorthogonal_eigensystem
from .topology import PhaseDiagramGrid

FERMI_GAP_TOL = 1e-10
BIORTHO_TOL = 1e-8
CHI_CLIP = 2e4
POOR_FIT_RMS = 0.05
# an exact second-order EP only reaches a condition of ~1/sqrt(machine eps) in
# floating point, so ground states use a tighter bound than the solver default;
# regular points, even 0.0025 from a boundary, stay below ~20
EP_CONDITION = 1e6


@dataclass
class BiorthogonalGroundState:
    """Occupied orbitals of the half-filled biorthogonal Fermi sea.

    ``fermi_gap`` is the real-part gap across the Fermi level and may vanish
    when a pair of states with equal real part straddles it. Such ties are
    resolved by ascending imaginary part; ``fermi_separation`` is the complex
    distance between the last occupied and first empty state in that order.
    """

    energies: np.ndarray
    occupied: np.ndarray
    right_occ: np.ndarray
    left_occ: np.ndarray
    fermi_gap: float
    fermi_separation: float
    n_tied: int = 0

    @property
    def sites(self) -> int:
        return self.right_occ.shape[0]

    def biorthogonality_residual(self) -> float:
        n = len(self.occupied)
        return float(np.abs(self.left_occ.conj().T @ self.right_occ - np.eye(n)).max())


def fill_order(energies: np.ndarray, n_occ: int, tie_tol: float | None = None):
    """Indices of the ``n_occ`` states of lowest real energy.

    Real parts within ``tie_tol`` of the Fermi level count as tied and are
    ordered by imaginary part, then by index. Returns (occupied, empty, n_tied).
    """
    e = np.asarray(energies)
    n = len(e)
    if tie_tol is None:
        tie_tol = 1e-9 * max(1.0, float(np.abs(e).max()))
    by_re = np.lexsort((np.arange(n), e.real))
    if n_occ in (0, n):
        return by_re[:n_occ], by_re[n_occ:], 0
    lo, hi = e.real[by_re[n_occ - 1]], e.real[by_re[n_occ]]
    in_shell = (e.real >= lo - tie_tol) & (e.real <= hi + tie_tol)
    if hi - lo > tie_tol:
        return by_re[:n_occ], by_re[n_occ:], 0
    below = np.nonzero(e.real < lo - tie_tol)[0]
    below = below[np.argsort(e.real[below], kind="stable")]
    shell = np.nonzero(in_shell)[0]
    shell = shell[np.lexsort((shell, e.imag[shell]))]
    above = np.nonzero(e.real > hi + tie_tol)[0]
    above = above[np.argsort(e.real[above], kind="stable")]
    need = n_occ - len(below)
    occ = np.concatenate([below, shell[:need]])
    empty = np.concatenate([shell[need:], above])
    return occ, empty, len(shell)


def ground_state(h: np.ndarray, filling: float = 0.5) -> BiorthogonalGroundState:
    """Half-filled (by default) biorthogonal Fermi sea of a single-particle matrix."""
    n = h.shape[0]
    n_occ = filling * n
    if abs(n_occ - round(n_occ)) > 1e-12:
        raise ValueError(f"filling {filling} does not give an integer particle number on {n} sites")
    n_occ = int(round(n_occ))
    basis = biorthogonal_eigensystem(h, max_condition=EP_CONDITION)
    e = basis.eigenvalues
    occ, empty, n_tied = fill_order(e, n_occ)
    gap = float(e.real[empty].min() - e.real[occ].max()) if len(occ) and len(empty) else np.inf
    sep = float(abs(e[empty[0]] - e[occ[-1]])) if len(occ) and len(empty) else np.inf
    if sep < FERMI_GAP_TOL:
        raise DegenerateFillingError(
            f"degenerate states at the Fermi level: E = {e[occ[-1]]:.6g} and {e[empty[0]]:.6g}"
        )
    gs = BiorthogonalGroundState(
        energies=e,
        occupied=occ,
        right_occ=basis.right_vectors[:, occ],
        left_occ=basis.left_vectors[:, occ],
        fermi_gap=gap,
        fermi_separation=sep,
        n_tied=n_tied,
    )
    res = gs.biorthogonality_residual()
    if res > BIORTHO_TOL:
        raise NearEPError(f"occupied-orbital biorthogonality residual {res:.2e}")
    return gs


def model_ground_state(params: ModelParams, sites: int) -> BiorthogonalGroundState:
    return ground_state(build_real_hamiltonian(params, LatticeSpec.from_sites(sites)))


@dataclass
class CorrelationMatrix:
    subsystem: range
    entries: np.ndarray


def correlation_matrix(gs: BiorthogonalGroundState, subsystem=None) -> CorrelationMatrix:
    """C_ij = <G_L| c_i^dagger c_j |G_R> for i, j in ``subsystem`` (default: all sites)."""
    if subsystem is None:
        subsystem = range(gs.sites)
    elif isinstance(subsystem, int):
        subsystem = range(subsystem)
    idx = np.asarray(subsystem, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= gs.sites):
        raise IndexError("subsystem outside the lattice")
    left = gs.left_occ[idx]
    right = gs.right_occ[idx]
    return CorrelationMatrix(subsystem, left.conj() @ right.T)


def entropy_from_eigenvalues(eta: np.ndarray, cutoff: float = 1e-12) -> complex:
    """-sum[eta log eta + (1 - eta) log(1 - eta)] with principal-branch logs."""
    eta = np.asarray(eta, dtype=complex)
    s = 0j
    a = eta[np.abs(eta) > cutoff]
    s -= np.sum(a * np.log(a))
    b = 1 - eta
    b = b[np.abs(b) > cutoff]
    s -= np.sum(b * np.log(b))
    return complex(s)


def entanglement_entropy_complex(c: CorrelationMatrix | np.ndarray) -> complex:
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c)
    if entries.size == 0:
        return 0j
    return entropy_from_eigenvalues(np.linalg.eigvals(entries))


def entanglement_entropy(c: CorrelationMatrix | np.ndarray, imag_tol: float | None = None) -> float:
    """Real part of the biorthogonal entanglement entropy (natural log).

    At generic non-Hermitian points the imaginary part is small but not
    zero; pass ``imag_tol`` to turn a larger residue into an error.
    """
    s = entanglement_entropy_complex(c)
    if imag_tol is not None and abs(s.imag) > imag_tol:
        raise ImaginaryResidueError(f"|Im S| = {abs(s.imag):.3e} exceeds {imag_tol:.0e}")
    return s.real


@dataclass
class EntropyCurve:
    abscissa: np.ndarray
    entropy: np.ndarray
    mode: str  # "vary_cut" or "vary_size"
    imag: np.ndarray | None = None
    sites: int | None = None

    def __post_init__(self):
        if self.mode not in ("vary_cut", "vary_size"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not np.all(np.isfinite(self.entropy)):
            raise ValueError("entropy curve has non-finite entries")


def entropy_vs_cut(params: ModelParams, sites: int, cuts) -> EntropyCurve:
    """S(L_A) for subsystems of the first L_A sites, from a single ground state."""
    cuts = np.asarray(list(cuts), dtype=int)
    if cuts.size == 0 or cuts.min() < 1 or cuts.max() > sites - 1:
        raise ValueError(f"cuts must lie in [1, {sites - 1}]")
    gs = model_ground_state(params, sites)
    vals = [entanglement_entropy_complex(correlation_matrix(gs, range(int(a)))) for a in cuts]
    vals = np.array(vals)
    return EntropyCurve(cuts, vals.real, "vary_cut", vals.imag, sites)


def entropy_vs_size(params: ModelParams, sizes) -> EntropyCurve:
    """Half-chain entropy S(L/2) as a function of the total size L."""
    sizes = np.asarray(list(sizes), dtype=int)
    vals = []
    for size in sizes:
        gs = model_ground_state(params, int(size))
        vals.append(entanglement_entropy_complex(correlation_matrix(gs, range(int(size) // 2))))
    vals = np.array(vals)
    return EntropyCurve(sizes, vals.real, "vary_size", vals.imag)


@dataclass
class FitResult:
    c: float
    intercept: float
    rms_residual: float
    window: tuple[float, float]
    c_stderr: float
    n_points: int
    poor_fit: bool = False


def _linear_fit(x, y, window) -> FitResult:
    """Least squares y = (c/3) x + b with the standard error of c."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([x / 3, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = len(x) - 2
    if dof > 0:
        sigma2 = float(resid @ resid) / dof
        cov = sigma2 * np.linalg.inv(design.T @ design)
        stderr = float(np.sqrt(cov[0, 0]))
    else:
        stderr = 0.0
    poor = rms > POOR_FIT_RMS
    if poor:
        warnings.warn(f"poor entropy fit: rms residual {rms:.3g}", stacklevel=3)
    return FitResult(float(coef[0]), float(coef[1]), rms, window, stderr, len(x), poor)


def chord_log(sites: int, cut) -> np.ndarray:
    """log[(L/pi) sin(pi L_A / L)]."""
    cut = np.asarray(cut, dtype=float)
    return np.log(sites / np.pi * np.sin(np.pi * cut / sites))


def fit_cardy_calabrese(curve: EntropyCurve, sites: int | None = None, min_points: int = 8) -> FitResult:
    """Fit S = (c/3) log[(L/pi) sin(pi L_A / L)] + const over the window [L/16, 15L/16]."""
    if curve.mode != "vary_cut":
        raise ValueError("Cardy-Calabrese fit needs a vary_cut curve")
    sites = sites or curve.sites
    if sites is None:
        raise ValueError("total size L is required")
    lo, hi = sites / 16, 15 * sites / 16
    cut = np.asarray(curve.abscissa, dtype=float)
    keep = (cut >= lo) & (cut <= hi)
    if keep.sum() < min_points:
        raise ValueError(f"need >= {min_points} cuts inside [{lo:g}, {hi:g}], got {int(keep.sum())}")
    return _linear_fit(chord_log(sites, cut[keep]), curve.entropy[keep], (lo, hi))


def fit_log_scaling(sizes, entropies, min_points: int = 4, min_span: float = 4.0) -> FitResult:
    """Fit S = (c/3) log L + const."""
    sizes = np.asarray(sizes, dtype=float)
    if len(sizes) < min_points:
        raise ValueError(f"need >= {min_points} sizes, got {len(sizes)}")
    if sizes.max() / sizes.min() < min_span - 1e-12:
        raise ValueError(f"sizes must span a factor >= {min_span}")
    return _linear_fit(np.log(sizes), entropies, (float(sizes.min()), float(sizes.max())))


# -- fidelity -----------------------------------------------------------------


def slater_overlap(left_occ: np.ndarray, right_occ: np.ndarray) -> complex:
    """<G_L|G_R> of two Slater determinants, det(L^H R)."""
    sign, logdet = np.linalg.slogdet(left_occ.conj().T @ right_occ)
    return complex(sign * np.exp(logdet))


@dataclass(frozen=True)
class FidelityResult:
    lam: float
    eps: float
    F: complex
    chi: complex


def fidelity_from_states(gs0: BiorthogonalGroundState, gs1: BiorthogonalGroundState, eps: float, lam: float = float("nan")) -> FidelityResult:
    f = slater_overlap(gs0.left_occ, gs1.right_occ) * slater_overlap(gs1.left_occ, gs0.right_occ)
    return FidelityResult(lam, eps, f, (1 - f) / eps**2)


def fidelity(params: ModelParams, sites: int, eps: float = 0.01) -> FidelityResult:
    """Biorthogonal ground-state fidelity between lambda and lambda + eps."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    gs0 = model_ground_state(params, sites)
    gs1 = gs0 if eps == 0 else model_ground_state(params.with_(lam=params.lam + eps), sites)
    if eps == 0:
        return FidelityResult(params.lam, 0.0, slater_overlap(gs0.left_occ, gs0.right_occ) ** 2, 0j)
    return fidelity_from_states(gs0, gs1, eps, params.lam)


class _StateCache:
    """Small LRU of ground states keyed by the rounded lambda."""

    def __init__(self, params: ModelParams, sites: int, size: int = 4):
        self.params, self.sites, self.size = params, sites, size
        self._store: OrderedDict = OrderedDict()

    def get(self, lam: float):
        key = round(lam, 12)
        if key in self._store:
            self._store.move_to_end(key)
            return self._store[key]
        try:
            val = model_ground_state(self.params.with_(lam=key), self.sites)
        except NHKnotsError as exc:
            val = exc
        self._store[key] = val
        if len(self._store) > self.size:
            self._store.popitem(last=False)
        return val


def fidelity_line(base: ModelParams, lambdas, sites: int, eps: float = 0.01) -> np.ndarray:
    """|chi| along increasing lambda at fixed couplings; NaN marks boundary-point errors.

    Ground states are reused when lambda + eps lands on a later grid point.
    """
    cache = _StateCache(base, sites)
    out = np.empty(len(lambdas))
    for i, lam in enumerate(lambdas):
        gs0, gs1 = cache.get(float(lam)), cache.get(float(lam) + eps)
        if isinstance(gs0, Exception) or isinstance(gs1, Exception):
            out[i] = np.nan
        else:
            out[i] = abs(fidelity_from_states(gs0, gs1, eps).chi)
    return out


def clip_chi(abs_chi, clip: float = CHI_CLIP) -> np.ndarray:
    """log(1 + min(|chi|, clip)); NaN (boundary point) maps to the clip value."""
    a = np.asarray(abs_chi, dtype=float)
    a = np.where(np.isnan(a), clip, np.minimum(a, clip))
    return np.log1p(a)


def _fidelity_row(task):
    base, t2, lambdas, sites, eps = task
    return fidelity_line(base.with_(t2=float(t2)), lambdas, sites, eps)


def fidelity_scan(
    base: ModelParams,
    lambda_range=(0.0, 1.5),
    t2_range=(0.0, 3.0),
    resolution=48,
    sites: int = 600,
    eps: float = 0.01,
    clip: float = CHI_CLIP,
    workers=None,
) -> PhaseDiagramGrid:
    """Grid of log(1 + |chi|) with |chi| clipped at ``clip``; boundary errors store the clip."""
    n_lam, n_t2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    lambdas = np.linspace(float(lambda_range[0]), float(lambda_range[1]), int(n_lam))
    t2s = np.linspace(float(t2_range[0]), float(t2_range[1]), int(n_t2))
    rows = ordered_map(_fidelity_row, [(base, t2, lambdas, sites, eps) for t2 in t2s], workers)
    abs_chi = np.array(rows)
    flags = np.isnan(abs_chi)
    meta = {
        "kind": "fidelity",
        "resolution": [int(n_lam), int(n_t2)],
        "lambda_range": [float(lambda_range[0]), float(lambda_range[1])],
        "t2_range": [float(t2_range[0]), float(t2_range[1])],
        "sites": int(sites),
        "eps": float(eps),
        "clip": float(clip),
        "workers": resolve_workers(workers),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    grid = PhaseDiagramGrid(lambdas, t2s, clip_chi(abs_chi, clip), flags, base, "log1p_abs_chi", metadata=meta)
    grid.check_shape()
    return grid


def local_maxima(values) -> np.ndarray:
    """Indices of interior points not smaller than either neighbour (plateaus count once)."""
    v = np.asarray(values, dtype=float)
    idx = []
    i = 1
    while i < len(v) - 1:
        j = i
        while j + 1 < len(v) and v[j + 1] == v[i]:
            j += 1
        if v[i] > v[i - 1] and (j + 1 >= len(v) or v[j + 1] < v[i]):
            idx.append((i + j) // 2)
        i = j + 1
    return np.array(idx, dtype=int)
