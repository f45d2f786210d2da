"""Spectral winding number, analytic phase boundaries and phase-diagram sweeps."""

from __future__ import annotations

import datetime
import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GaplessError, NHKnotsError, ResolutionError
from .lattice import ModelParams, build_bloch
from .parallel import ordered_map, resolve_workers

GAP_TOL = 1e-8
MAX_N_K = 2**18
INTEGRALITY_TOL = 1e-3


@dataclass(frozen=True)
class WindingResult:
    w_raw: float
    w: int
    min_abs_f: float
    n_k_used: int


def shifted_determinant(params: ModelParams, k) -> np.ndarray:
    """f(k) = det(H(k) - Tr[H(k)]/4)."""
    h = build_bloch(params, k)
    shift = np.trace(h, axis1=-2, axis2=-1) / 4
    return np.linalg.det(h - shift[..., None, None] * np.eye(4))


def winding_number(params: ModelParams, n_k: int = 1024, gap_tol: float = GAP_TOL, max_n_k: int = MAX_N_K) -> WindingResult:
    """Winding of f(k) around the origin as k runs once through the zone.

    Principal-branch phase increments between neighbouring samples are summed;
    the grid doubles until every increment is below pi/2.
    """
    if n_k < 256:
        raise ValueError(f"n_k must be >= 256, got {n_k}")
    n = n_k
    while True:
        ks = 2 * np.pi * np.arange(n + 1) / n
        f = shifted_determinant(params, ks)
        min_abs = float(np.abs(f).min())
        if min_abs < gap_tol:
            raise GaplessError(f"|det| reaches {min_abs:.3e} < {gap_tol:.0e}: gapless point", min_abs)
        inc = np.angle(f[1:] / f[:-1])
        if np.abs(inc).max() < np.pi / 2:
            break
        n *= 2
        if n > max_n_k:
            raise ResolutionError(f"phase increments still >= pi/2 at n_k = {max_n_k}")
    w_raw = float(inc.sum() / (2 * np.pi))
    return WindingResult(w_raw, int(round(w_raw)), min_abs, n)


def winding_number_integral(params: ModelParams, n_k: int = 2048, dk: float = 1e-6) -> float:
    """Direct quadrature of (1/2pi i) * d/dk ln f, using d ln det A = Tr(A^-1 dA).

    Independent cross-check of :func:`winding_number`; the integrand is
    periodic so the trapezoid rule converges fast.
    """
    ks = 2 * np.pi * np.arange(n_k) / n_k

    def shifted(k):
        h = build_bloch(params, k)
        return h - (np.trace(h, axis1=-2, axis2=-1) / 4)[..., None, None] * np.eye(4)

    a = shifted(ks)
    da = (shifted(ks + dk) - shifted(ks - dk)) / (2 * dk)
    integrand = np.trace(np.linalg.solve(a, da), axis1=-2, axis2=-1)
    return float((integrand.mean() * 2 * np.pi / (2j * np.pi)).real)


# -- analytic boundaries -------------------------------------------------------


def _u_v(params: ModelParams, k):
    t1, t2, t3, t4 = params.t1, params.t2, params.t3, params.t4
    u = t1**2 + t2**2 + t3**2 + t4**2
    v = t1**2 * t3**2 + t2**2 * t4**2 - 2 * t1 * t2 * t3 * t4 * np.cos(k)
    return u, v


@dataclass(frozen=True)
class BoundaryRoots:
    lambdas: tuple[float, ...]
    dropped: int  # branch/p combinations without a real non-negative root


def phase_boundary_lambdas(params: ModelParams, dedup_tol: float = 1e-12) -> BoundaryRoots:
    """Non-negative lambda solving 16 lambda^2 = 2u +- sqrt(4u^2 - 16 v(p pi / q)).

    ``params.lam`` is ignored. Roots are deduplicated and sorted ascending.
    """
    found = []
    dropped = 0
    for p in range(params.q + 1):
        u, v = _u_v(params, p * np.pi / params.q)
        disc = 4 * u * u - 16 * v
        if disc < 0:
            dropped += 2
            continue
        for sign in (1, -1):
            rhs = 2 * u + sign * np.sqrt(disc)
            if rhs < 0:
                if rhs > -dedup_tol:
                    rhs = 0.0
                else:
                    dropped += 1
                    continue
            found.append(float(np.sqrt(rhs / 16)))
    found.sort()
    roots: list[float] = []
    for x in found:
        if not roots or x - roots[-1] > dedup_tol:
            roots.append(x)
    return BoundaryRoots(tuple(roots), dropped)


def boundary_residual(params: ModelParams, lam: float, p: int, sign: int) -> float:
    u, v = _u_v(params, p * np.pi / params.q)
    return float(abs(16 * lam**2 - (2 * u + sign * np.sqrt(4 * u * u - 16 * v))))


@dataclass
class BoundaryCurves:
    """Sampled (t2, lambda) pairs per (sign, p) branch."""

    curves: dict[tuple[int, int], np.ndarray]

    def items(self):
        return self.curves.items()


def boundary_curves(base: ModelParams, t2_values) -> BoundaryCurves:
    t2_values = np.asarray(t2_values, dtype=float)
    curves = {}
    for p in range(base.q + 1):
        for sign in (1, -1):
            pts = []
            for t2 in t2_values:
                u, v = _u_v(base.with_(t2=float(t2)), p * np.pi / base.q)
                disc = 4 * u * u - 16 * v
                if disc < 0:
                    continue
                rhs = 2 * u + sign * np.sqrt(disc)
                if rhs < 0:
                    continue
                pts.append((t2, np.sqrt(rhs / 16)))
            curves[(sign, p)] = np.array(pts).reshape(-1, 2)
    return BoundaryCurves(curves)


# -- phase diagram -------------------------------------------------------------


@dataclass
class PhaseDiagramGrid:
    """Per-point values on a (t2, lambda) grid; arrays are indexed ``[i_t2, j_lambda]``.

    ``value_name`` is ``"w"`` for winding sweeps and ``"log1p_abs_chi"`` for
    fidelity scans. Flagged points sit on or next to a boundary.
    """

    lambda_axis: np.ndarray
    t2_axis: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    params_base: ModelParams
    value_name: str = "w"
    w_raw: np.ndarray | None = None
    knot_tags: list[list[str | None]] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.t2_axis), len(self.lambda_axis))

    def check_shape(self):
        if self.values.shape != self.shape or self.flags.shape != self.shape:
            raise ValueError("grid arrays do not match axes")

    def regions(self) -> dict:
        """Maximal 4-connected regions of equal value among non-flagged cells."""
        out = {}
        for val in np.unique(self.values[~self.flags]):
            labels, count = ndimage.label((self.values == val) & ~self.flags)
            out[val] = count
        return out

    def n_regions(self) -> int:
        return int(sum(self.regions().values()))


def _sweep_row(task):
    base, t2, lambdas, n_k, with_knots = task
    row = []
    for lam in lambdas:
        p = base.with_(lam=float(lam), t2=float(t2))
        try:
            res = winding_number(p, n_k)
            entry = [res.w, res.w_raw, False]
        except (GaplessError, ResolutionError):
            entry = [0, float("nan"), True]
        tag = None
        if with_knots:
            tag = knot_tag(p, max(512, n_k // 2))
        entry.append(tag)
        row.append(entry)
    return row


@functools.lru_cache(maxsize=None)
def _knot_imports():
    from . import braid, spectral

    return braid, spectral


def knot_tag(params: ModelParams, n_k: int = 512) -> str | None:
    """Knot class label of the tracked strings, or None when extraction fails."""
    braid, spectral = _knot_imports()
    try:
        strings = spectral.track_bands(params, n_k)
        word = braid.extract_braid(strings)
        return braid.classify_knot(braid.linking_invariants(word)).label
    except NHKnotsError:
        return None


def _axis(rng, n):
    lo, hi = rng
    return np.linspace(float(lo), float(hi), int(n))


def sweep_phase_diagram(
    base: ModelParams,
    lambda_range=(0.0, 1.5),
    t2_range=(0.0, 3.0),
    resolution=64,
    n_k: int = 1024,
    with_knots: bool = False,
    workers=None,
) -> PhaseDiagramGrid:
    """Winding number (and optionally knot class) at every grid point.

    Gapless points are flagged instead of failing the sweep. Work is split by
    t2 row and gathered by index, so the output does not depend on the
    number of workers.
    """
    n_lam, n_t2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    if min(n_lam, n_t2) < 16:
        raise ValueError("resolution must be >= 16 per axis")
    lambdas = _axis(lambda_range, n_lam)
    t2s = _axis(t2_range, n_t2)
    tasks = [(base, t2, lambdas, n_k, with_knots) for t2 in t2s]
    rows = ordered_map(_sweep_row, tasks, workers)

    values = np.array([[e[0] for e in row] for row in rows], dtype=float)
    w_raw = np.array([[e[1] for e in row] for row in rows], dtype=float)
    flags = np.array([[e[2] for e in row] for row in rows], dtype=bool)
    tags = [[e[3] for e in row] for row in rows] if with_knots else None
    meta = {
        "kind": "winding",
        "resolution": [int(n_lam), int(n_t2)],
        "lambda_range": [float(lambda_range[0]), float(lambda_range[1])],
        "t2_range": [float(t2_range[0]), float(t2_range[1])],
        "n_k": int(n_k),
        "gap_tol": GAP_TOL,
        "integrality_tol": INTEGRALITY_TOL,
        "with_knots": bool(with_knots),
        "workers": resolve_workers(workers),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    grid = PhaseDiagramGrid(lambdas, t2s, values, flags, base, "w", w_raw, tags, meta)
    grid.check_shape()
    return grid


def winding_line(base: ModelParams, lambdas, n_k: int = 1024) -> list[WindingResult | None]:
    """Winding along a lambda line at fixed ``base.t2``; None marks gapless points."""
    out = []
    for lam in lambdas:
        try:
            out.append(winding_number(base.with_(lam=float(lam)), n_k))
        except (GaplessError, ResolutionError):
            out.append(None)
    return out


def plateaus(values) -> list[tuple[int, int, object]]:
    """Runs of equal consecutive values as (start, stop_exclusive, value)."""
    runs = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] != values[start]:
            runs.append((start, i, values[start]))
            start = i
    return runs
