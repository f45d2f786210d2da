"""Four-band non-Hermitian lattice: real-space and Bloch Hamiltonians.

Sites are ordered cell-major with sublattice order (A, B, C, D), so site
``4*n + a`` is sublattice ``a`` of unit cell ``n``. The Bloch matrix uses the
same (A, B, C, D) order; in the Kronecker products the first factor acts on
the (AB)/(CD) pair index and the second on the position inside the pair.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import DimensionError

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# s_alpha for (A, B, C, D)
SUBLATTICE_SIGNS = (1, -1, 1, -1)


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the four-band chain.

    ``lam`` is the non-reciprocal and ``mu`` the reciprocal same-sublattice
    strength; ``q`` is the range of the same-sublattice hop.
    """

    t1: float = 1.0
    t2: float = 2.0
    t3: float = 1.0
    t4: float = 1.0
    lam: float = 0.0
    mu: float = 0.5
    q: int = 1

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "q":
                if isinstance(value, bool) or int(value) != value or value < 1:
                    raise ValueError(f"q must be a positive integer, got {value!r}")
                object.__setattr__(self, "q", int(value))
            elif not math.isfinite(float(value)):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
            else:
                object.__setattr__(self, f.name, float(value))

    @property
    def j_right(self) -> complex:
        return 1j * (self.lam + self.mu)

    @property
    def j_left(self) -> complex:
        return 1j * (self.lam - self.mu)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        """Canonical serialization; the non-reciprocal strength is keyed ``lambda``."""
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {key: d[key] for key in ("t1", "t2", "t3", "t4", "lambda", "mu", "q")}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass(frozen=True)
class LatticeSpec:
    cells: int
    boundary: str = "PBC"

    def __post_init__(self):
        if isinstance(self.cells, bool) or int(self.cells) != self.cells or self.cells < 1:
            raise DimensionError(f"cells must be a positive integer, got {self.cells!r}")
        if self.boundary != "PBC":
            raise DimensionError(f"only periodic boundaries are supported, got {self.boundary!r}")

    @property
    def sites(self) -> int:
        return 4 * self.cells

    @classmethod
    def from_sites(cls, sites: int) -> "LatticeSpec":
        if sites % 4:
            raise DimensionError(f"site count must be a multiple of 4, got {sites}")
        return cls(sites // 4)


def build_real_hamiltonian(params: ModelParams, spec: LatticeSpec | int) -> np.ndarray:
    """Single-particle matrix of the chain under periodic boundaries.

    Entry ``[i, j]`` is the amplitude of ``c_i^dagger c_j``. Hops wrap modulo
    the number of cells; repeated bonds (tiny rings) add up.
    """
    if not isinstance(spec, LatticeSpec):
        spec = LatticeSpec(spec)
    cells, q = spec.cells, params.q
    if cells <= q:
        raise DimensionError(f"need cells > q, got cells={cells}, q={q}")

    n = np.arange(cells)
    fwd_q = (n + q) % cells
    fwd_1 = (n + 1) % cells
    h = np.zeros((4 * cells, 4 * cells), dtype=complex)

    for a, s in enumerate(SUBLATTICE_SIGNS):
        src, dst = 4 * n + a, 4 * fwd_q + a
        np.add.at(h, (src, dst), s * params.j_left)
        np.add.at(h, (dst, src), s * params.j_right)

    intra = ((0, 1, params.t1), (1, 2, params.t2), (2, 3, params.t3))
    for a, b, t in intra:
        np.add.at(h, (4 * n + a, 4 * n + b), t)
        np.add.at(h, (4 * n + b, 4 * n + a), t)
    np.add.at(h, (4 * n + 3, 4 * fwd_1), params.t4)
    np.add.at(h, (4 * fwd_1, 4 * n + 3), params.t4)
    return h


def bloch_potential(params: ModelParams, k):
    """V(k) = 2 mu sin(qk) + 2i lambda cos(qk); vectorizes over ``k``."""
    qk = params.q * np.asarray(k, dtype=float)
    v = 2.0 * params.mu * np.sin(qk) + 2j * params.lam * np.cos(qk)
    return v if np.ndim(v) else complex(v)


_I_SX = np.kron(SIGMA_0, SIGMA_X)
_SZ_SX = np.kron(SIGMA_Z, SIGMA_X)
_SX_SX = np.kron(SIGMA_X, SIGMA_X)
_SY_SY = np.kron(SIGMA_Y, SIGMA_Y)
_I_SZ = np.kron(SIGMA_0, SIGMA_Z)
_SY_SX_PLUS_SX_SY = np.kron(SIGMA_Y, SIGMA_X) + np.kron(SIGMA_X, SIGMA_Y)


def build_bloch(params: ModelParams, k) -> np.ndarray:
    """Bloch Hamiltonian H(k), shape ``(4, 4)`` or ``(*k.shape, 4, 4)``."""
    k = np.asarray(k, dtype=float)
    kk = k[..., None, None]
    t1, t2, t3, t4 = params.t1, params.t2, params.t3, params.t4
    v = np.asarray(bloch_potential(params, k))[..., None, None]
    h = (
        0.5 * (t1 + t3) * _I_SX
        + 0.5 * (t1 - t3) * _SZ_SX
        + 0.5 * (t2 + t4 * np.cos(kk)) * _SX_SX
        + 0.5 * (t2 - t4 * np.cos(kk)) * _SY_SY
        + v * _I_SZ
        + 0.5 * t4 * np.sin(kk) * _SY_SX_PLUS_SX_SY
    )
    return h


PHS_C = np.kron(SIGMA_0, SIGMA_Z)
SYM_T = np.kron(SIGMA_X, SIGMA_X)
# unitary part of the antiunitary Gamma = i (sigma_x (x) sigma_y) K
GAMMA_U = 1j * np.kron(SIGMA_X, SIGMA_Y)


@dataclass(frozen=True)
class SymmetryReport:
    """Max-abs-entry residuals of the three symmetry relations over sampled k."""

    phs: float
    t_sym: float
    gamma: float
    t_gamma_applicable: bool

    def passes(self, tol: float = 1e-12) -> bool:
        ok = self.phs < tol
        if self.t_gamma_applicable:
            ok = ok and self.t_sym < tol and self.gamma < tol
        return ok


def symmetry_residuals(params: ModelParams, k_samples: int = 64) -> SymmetryReport:
    if k_samples < 2:
        raise ValueError("k_samples must be >= 2")
    ks = np.linspace(0.0, 2 * np.pi, k_samples, endpoint=False)
    h = build_bloch(params, ks)
    h_minus = build_bloch(params, -ks)
    h_dag = np.conj(np.swapaxes(h, -1, -2))

    phs = PHS_C @ np.conj(h) @ PHS_C + h_minus
    t_res = SYM_T @ h_dag @ SYM_T - h_minus
    # antiunitary conjugation: Gamma X Gamma^-1 = U X* U^-1
    gamma_res = GAMMA_U @ np.conj(h_dag) @ np.linalg.inv(GAMMA_U) + h
    return SymmetryReport(
        phs=float(np.abs(phs).max()),
        t_sym=float(np.abs(t_res).max()),
        gamma=float(np.abs(gamma_res).max()),
        t_gamma_applicable=bool(params.t1 == params.t3),
    )
