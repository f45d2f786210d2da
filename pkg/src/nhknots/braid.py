"""Braids of eigenenergy strings and invariants of their closures.

Crossings are read off the projection of the strings onto a rotated real
axis ``Re(exp(-i theta) E)``. The over/under information is the rotated
imaginary part. A crossing is positive when the strand with the larger
rotated imaginary part moves from the lower to the higher real rank.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProjectionError, GridTooCoarseError
from .spectral import PERMUTATIONS_4, EnergyStrings, bloch_eigenvalues

TANGENCY_TOL = 1e-9
THETA_STEP = 0.01
MAX_PERTURBATIONS = 5


@dataclass(frozen=True)
class Crossing:
    position: int  # 1-based generator index i of sigma_i
    sign: int
    k: float = float("nan")


@dataclass(frozen=True)
class BraidWord:
    """Ordered generators on ``strand_count`` strands.

    ``start_order[p]`` is the band label sitting at projected rank ``p`` at
    k = 0; it is only needed to relate the word back to tracked bands.
    """

    generators: tuple[Crossing, ...] = ()
    strand_count: int = 4
    start_order: tuple[int, ...] | None = None
    theta: float = 0.0

    def __post_init__(self):
        for g in self.generators:
            if not 1 <= g.position < self.strand_count or g.sign not in (1, -1):
                raise ValueError(f"invalid generator {g} for {self.strand_count} strands")

    @classmethod
    def from_ints(cls, word, strand_count: int = 4) -> "BraidWord":
        """Word from signed integers, e.g. ``[1, -2]`` for sigma_1 sigma_2^-1."""
        gens = tuple(Crossing(abs(int(x)), 1 if x > 0 else -1, float(i)) for i, x in enumerate(word))
        return cls(gens, strand_count)

    def as_ints(self) -> list[int]:
        return [g.sign * g.position for g in self.generators]

    def __len__(self) -> int:
        return len(self.generators)

    def tokens(self) -> str:
        return " ".join(f"s{g.position}" if g.sign > 0 else f"s{g.position}^-1" for g in self.generators)

    @classmethod
    def from_tokens(cls, text: str, strand_count: int = 4) -> "BraidWord":
        word = []
        for tok in text.split():
            m = re.fullmatch(r"s(\d+)(\^-1)?", tok)
            if m is None:
                raise ValueError(f"bad braid token {tok!r}")
            word.append(-int(m.group(1)) if m.group(2) else int(m.group(1)))
        return cls.from_ints(word, strand_count)

    def permutation(self) -> tuple[int, ...]:
        """``perm[p]`` is the final rank of the strand starting at rank ``p``."""
        at = list(range(self.strand_count))  # at[rank] = starting rank of strand there
        for g in self.generators:
            i = g.position - 1
            at[i], at[i + 1] = at[i + 1], at[i]
        perm = [0] * self.strand_count
        for rank, strand in enumerate(at):
            perm[strand] = rank
        return tuple(perm)

    def band_permutation(self) -> tuple[int, ...]:
        """Induced permutation on band labels, comparable to ``endpoint_permutation``."""
        order = self.start_order or tuple(range(self.strand_count))
        perm = self.permutation()
        out = [0] * self.strand_count
        for p, label in enumerate(order):
            out[label] = order[perm[p]]
        return tuple(out)

    def free_reduce(self) -> "BraidWord":
        stack: list[Crossing] = []
        for g in self.generators:
            if stack and stack[-1].position == g.position and stack[-1].sign == -g.sign:
                stack.pop()
            else:
                stack.append(g)
        return BraidWord(tuple(stack), self.strand_count, self.start_order, self.theta)


def closure_components(word: BraidWord) -> list[tuple[int, ...]]:
    """Cycles of the induced permutation, as tuples of starting ranks."""
    perm = word.permutation()
    seen: set[int] = set()
    cycles = []
    for s in range(word.strand_count):
        if s in seen:
            continue
        cycle = []
        x = s
        while x not in seen:
            seen.add(x)
            cycle.append(x)
            x = perm[x]
        cycles.append(tuple(cycle))
    return cycles


@dataclass(frozen=True)
class LinkingMatrix:
    components: tuple[tuple[int, ...], ...]
    lk: np.ndarray = field(compare=False)
    writhe: tuple[int, ...]
    total_sign: int

    @property
    def n_components(self) -> int:
        return len(self.components)

    def invariant_summary(self) -> tuple:
        """(component count, sorted (length, writhe) per component, sorted |lk| pairs, total writhe)."""
        n = self.n_components
        per_comp = tuple(sorted((len(c), w) for c, w in zip(self.components, self.writhe)))
        pairs = tuple(sorted(abs(int(self.lk[a, b])) for a in range(n) for b in range(a + 1, n)))
        return (n, per_comp, pairs, int(sum(self.writhe)))

    def to_dict(self) -> dict:
        return {
            "components": [list(c) for c in self.components],
            "linking_matrix": self.lk.astype(int).tolist(),
            "writhe": list(self.writhe),
            "total_sign": self.total_sign,
        }


def linking_invariants(word: BraidWord) -> LinkingMatrix:
    comps = closure_components(word)
    comp_of = {s: a for a, c in enumerate(comps) for s in c}
    n = len(comps)
    twice_lk = np.zeros((n, n), dtype=int)
    writhe = [0] * n
    at = list(range(word.strand_count))
    total = 0
    for g in word.generators:
        i = g.position - 1
        a, b = comp_of[at[i]], comp_of[at[i + 1]]
        if a == b:
            writhe[a] += g.sign
        else:
            twice_lk[a, b] += g.sign
            twice_lk[b, a] += g.sign
        total += g.sign
        at[i], at[i + 1] = at[i + 1], at[i]
    if np.any(twice_lk % 2):
        raise ValueError("odd crossing count between closed components")
    return LinkingMatrix(tuple(comps), twice_lk // 2, tuple(writhe), total)


@dataclass(frozen=True)
class KnotClass:
    tag: str  # Unlink, Unknots, HopfLinkPlus, Catenane, Other
    n: int | None
    summary: tuple = field(compare=False, default=())

    @property
    def label(self) -> str:
        return self.tag if self.n is None else f"{self.tag}({self.n})"

    def __str__(self) -> str:
        return self.label


def _component_is_plain(length: int, writhe: int) -> bool:
    # a closed m-strand cycle with |writhe| = m - 1 destabilizes to a round circle
    return abs(writhe) == length - 1


def classify_summary(summary: tuple) -> KnotClass:
    n, per_comp, pairs, _total = summary
    if not all(_component_is_plain(length, w) for length, w in per_comp):
        return KnotClass("Other", None, summary)
    linked = [x for x in pairs if x]
    if not linked:
        if all(length == 1 for length, _ in per_comp):
            return KnotClass("Unlink", n, summary)
        return KnotClass("Unknots", n, summary)
    if any(x != 1 for x in linked):
        return KnotClass("Other", None, summary)
    if len(linked) == 1:
        return KnotClass("HopfLinkPlus", n, summary)
    return KnotClass("Catenane", n, summary)


def classify_knot(inv: LinkingMatrix) -> KnotClass:
    """Assign a knot category from component structure, linking and writhe.

    Linked components must form a single connected cluster for a catenane;
    anything not covered by the categories is ``Other``.
    """
    summary = inv.invariant_summary()
    cls = classify_summary(summary)
    if cls.tag == "Catenane":
        n = inv.n_components
        adj = np.abs(inv.lk) > 0
        linked_nodes = [a for a in range(n) if adj[a].any()]
        seen = {linked_nodes[0]}
        todo = [linked_nodes[0]]
        while todo:
            a = todo.pop()
            for b in np.nonzero(adj[a])[0]:
                if int(b) not in seen:
                    seen.add(int(b))
                    todo.append(int(b))
        if len(seen) != len(linked_nodes):
            return KnotClass("Other", None, summary)
        return KnotClass("Catenane", len(linked_nodes), summary)
    return cls


# -- extraction from tracked bands -------------------------------------------


class _Tangency(Exception):
    pass


def _match_to(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    costs = np.abs(new[PERMUTATIONS_4] - prev).sum(axis=1)
    return new[PERMUTATIONS_4[int(np.argmin(costs))]]


def _adjacent_swaps(before: np.ndarray, after: np.ndarray):
    """Decompose the rank change into disjoint adjacent transpositions, else None."""
    pos_after = {int(s): r for r, s in enumerate(after)}
    target = [pos_after[int(s)] for s in before]
    swaps = []
    r = 0
    n = len(target)
    while r < n:
        if target[r] == r:
            r += 1
        elif r + 1 < n and target[r] == r + 1 and target[r + 1] == r:
            swaps.append(r)
            r += 2
        else:
            return None
    return swaps


def _extract(strings: EnergyStrings, theta: float, k_tol: float) -> BraidWord:
    rot = np.exp(-1j * theta)
    params = strings.params
    bands = strings.bands * rot
    proj = bands.real
    ranks = np.argsort(proj, axis=1, kind="stable")
    sorted_proj = np.take_along_axis(proj, ranks, axis=1)
    if np.diff(sorted_proj, axis=1).min() < TANGENCY_TOL:
        raise _Tangency

    crossings: list[Crossing] = []

    def leaf(k0, k1, a, b):
        ra = np.argsort((a * rot).real, kind="stable")
        rb = np.argsort((b * rot).real, kind="stable")
        swaps = _adjacent_swaps(ra, rb)
        if swaps is None:
            raise GridTooCoarseError(f"non-adjacent projected swap near k={0.5 * (k0 + k1):.10g}")
        mid = 0.5 * (a + b) * rot
        for i in swaps:
            x, y = ra[i], ra[i + 1]  # x climbs from rank i to i + 1
            if abs(mid[x].imag - mid[y].imag) < TANGENCY_TOL:
                raise _Tangency
            sign = 1 if mid[x].imag > mid[y].imag else -1
            crossings.append(Crossing(i + 1, sign, 0.5 * (k0 + k1)))

    def refine(k0, k1, a, b):
        if np.array_equal(np.argsort((a * rot).real, kind="stable"), np.argsort((b * rot).real, kind="stable")):
            return
        if k1 - k0 < k_tol:
            leaf(k0, k1, a, b)
            return
        km = 0.5 * (k0 + k1)
        m = _match_to(a, bloch_eigenvalues(params, km))
        if np.abs(np.diff(np.sort((m * rot).real))).min() < TANGENCY_TOL:
            raise _Tangency
        refine(k0, km, a, m)
        refine(km, k1, m, b)

    ks, raw = strings.k_grid, strings.bands
    changed = np.nonzero(np.any(ranks[1:] != ranks[:-1], axis=1))[0]
    for m in changed:
        refine(ks[m], ks[m + 1], raw[m], raw[m + 1])

    start_order = tuple(int(x) for x in ranks[0])
    return BraidWord(tuple(crossings), strings.n_bands, start_order, theta)


def extract_braid(strings: EnergyStrings, theta: float = 0.0, k_tol: float = 2 * np.pi * 1e-6) -> BraidWord:
    """Braid word of the tracked strings seen along the rotated real axis.

    Tangential or degenerate projections shift ``theta`` by 0.01 and restart,
    at most five times.
    """
    for attempt in range(MAX_PERTURBATIONS + 1):
        try:
            word = _extract(strings, theta + THETA_STEP * attempt, k_tol)
        except _Tangency:
            continue
        if word.band_permutation() != tuple(strings.endpoint_permutation):
            raise GridTooCoarseError("braid permutation disagrees with tracked endpoint permutation")
        return word
    raise DegenerateProjectionError(
        f"projection degenerate for theta in [{theta}, {theta + THETA_STEP * MAX_PERTURBATIONS}]"
    )


def braid_summary_json(word: BraidWord, inv: LinkingMatrix, cls: KnotClass) -> str:
    payload = {
        "braid": word.tokens(),
        "theta": word.theta,
        "strand_count": word.strand_count,
        "start_order": list(word.start_order) if word.start_order else None,
        "n_components": inv.n_components,
        **inv.to_dict(),
        "knot_class": cls.label,
        "invariant_summary": _jsonable(cls.summary),
    }
    return json.dumps(payload, indent=2)


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x
