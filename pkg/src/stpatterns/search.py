"""Exhaustive searches for extremal finest-partition evidence (EVIFPP)."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensemble import EnsembleTable
from .errors import CapacityError, ContractViolation
from .integration import Evidence, _log, evifpp
from .life import GridSymmetry, canonical_windows
from .pattern import TrajectoryWindow

MAX_CANDIDATES = 50_000_000
TIE_TOL = 1e-9


def _log_marginals(tab: EnsembleTable, base: float) -> np.ndarray:
    """``out[i, site, v]`` = log p(node (start+i, site) has value v); -inf where impossible."""
    ones = tab.marginals.ones
    lt = _log(tab.total, base)
    out = np.full((tab.length, tab.cells, 2), -np.inf)
    for i in range(tab.length):
        for k in range(tab.cells):
            for v, c in ((0, tab.total - int(ones[i, k])), (1, int(ones[i, k]))):
                if c:
                    out[i, k, v] = _log(c, base) - lt
    return out


def window_evifpp(tab: EnsembleTable, base: float = 2) -> np.ndarray:
    """EVIFPP of every distinct window taken as a global pattern, in table order."""
    lm = _log_marginals(tab, base)
    lt = _log(tab.total, base)
    bits = ((tab.windows[:, :, None] >> np.arange(tab.cells, dtype=np.uint64)) & np.uint64(1)).astype(np.intp)
    node_logs = lm[np.arange(tab.length)[None, :, None], np.arange(tab.cells)[None, None, :], bits]
    node_logs = node_logs.reshape(len(tab), -1)
    out = np.empty(len(tab))
    for i, (row, c) in enumerate(zip(node_logs, tab.counts)):
        # fsum is correctly rounded, so equal multisets of terms give equal results
        out[i] = (_log(int(c), base) - lt) - math.fsum(row.tolist())
    return out


@dataclass(frozen=True)
class RankedPattern:
    window: TrajectoryWindow  # canonical representative of the orbit
    evifpp: float
    orbit_windows: int
    multiplicity: int


def rank_global_patterns(tab: EnsembleTable, group: Sequence[GridSymmetry], base: float = 2) -> list[RankedPattern]:
    """One entry per symmetry orbit of distinct windows, highest EVIFPP first."""
    scores = window_evifpp(tab, base)
    canon = canonical_windows(tab.windows, group, tab.width, tab.height)
    orbits: dict[tuple[int, ...], list[int]] = {}
    for i, row in enumerate(canon):
        orbits.setdefault(tuple(int(v) for v in row), []).append(i)

    ranked = []
    for key, members in orbits.items():
        values = {float(scores[i]) for i in members}
        if len(values) != 1:
            raise AssertionError(f"EVIFPP not constant on orbit of {key}: {sorted(values)}")
        mults = {int(tab.counts[i]) for i in members}
        assert len(mults) == 1
        window = TrajectoryWindow(tab.start, key, tab.width, tab.height)
        ranked.append(RankedPattern(window, values.pop(), len(members), mults.pop()))
    ranked.sort(key=lambda r: (-r.evifpp, r.window.slices))
    return ranked


@dataclass(frozen=True, eq=False)
class AgreementMask:
    """Per distinct window, the nodes where it agrees with a reference window."""

    masks: np.ndarray  # (D, L) uint64
    counts: np.ndarray

    def count(self, node_masks: Sequence[int]) -> int:
        """Number of initial states whose window agrees with the reference on ``node_masks``."""
        s = np.asarray(node_masks, dtype=np.uint64)
        return int(self.counts[np.all((self.masks & s) == s, axis=1)].sum())


def agreement_masks(tab: EnsembleTable, reference: TrajectoryWindow) -> AgreementMask:
    full = np.uint64(tab.total - 1)
    ref = np.asarray(reference.slices, dtype=np.uint64)
    return AgreementMask(~(tab.windows ^ ref) & full, tab.counts)


@dataclass(frozen=True)
class SubsetPatternSpec:
    """Patterns fixing ``cells_per_slice`` cells of every slice of ``reference`` to its values."""

    reference: TrajectoryWindow
    cells_per_slice: int

    def check(self, tab: EnsembleTable) -> None:
        if not 0 <= self.cells_per_slice <= tab.cells:
            raise ContractViolation(f"cells_per_slice must be in 0..{tab.cells}, got {self.cells_per_slice}")
        if tab.multiplicity(self.reference) < 1:
            raise ContractViolation("reference window does not occur in the ensemble")


@dataclass(frozen=True, eq=False)
class SubsetScores:
    """EVIFPP for every choice of per-slice node subsets.

    ``scores[i0, i1, ...]`` belongs to the pattern whose slice ``t`` fixes the
    sites in ``subsets[i_t]``; subsets are listed in ``itertools.combinations``
    order, so C-order on the score array is lexicographic order on node sets.
    """

    spec: SubsetPatternSpec
    subsets: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)

    def node_masks(self, index) -> tuple[int, ...]:
        return tuple(int(self.subsets[i]) for i in index)

    def extremal(self, objective: str) -> tuple[float, np.ndarray]:
        """Extremal score and the boolean mask of all co-extremal candidates."""
        if objective not in ("min", "max"):
            raise ContractViolation(f"objective must be 'min' or 'max', got {objective!r}")
        best = float(self.scores.min() if objective == "min" else self.scores.max())
        return best, np.abs(self.scores - best) <= TIE_TOL


@dataclass(frozen=True)
class SubsetSearchResult:
    objective: str
    node_masks: tuple[int, ...]
    evifpp: float
    n_optima: int
    n_candidates: int


def _subset_masks(cells: int, n: int) -> np.ndarray:
    return np.array([sum(1 << k for k in combo) for combo in itertools.combinations(range(cells), n)], dtype=np.uint64)


def subset_scores(tab: EnsembleTable, spec: SubsetPatternSpec, base: float = 2, workers: int = 1) -> SubsetScores:
    """Score all ``C(cells, n) ** L`` candidates of ``spec`` exactly.

    A window agrees with the reference on a node set iff it disagrees only
    outside that set, so windows that disagree on more than ``cells - n``
    sites of some slice are dropped up front.  Joint counts are then a
    sum over windows of products of per-slice agreement indicators, which
    is evaluated as a chain of dense contractions.
    """
    spec.check(tab)
    n, length = spec.cells_per_slice, tab.length
    subsets = _subset_masks(tab.cells, n)
    k = len(subsets)
    if k**length > MAX_CANDIDATES:
        raise CapacityError(f"{k}**{length} candidates exceeds the limit of {MAX_CANDIDATES}")

    ref = np.asarray(spec.reference.slices, dtype=np.uint64)
    diff = tab.windows ^ ref
    keep = np.all(np.bitwise_count(diff) <= tab.cells - n, axis=1)
    diff, weights = diff[keep], tab.counts[keep].astype(np.float64)
    agree = [((diff[None, :, t] & subsets[:, None]) == 0).astype(np.float64) for t in range(length)]

    def block(rows):
        acc = agree[0][rows] * weights
        if length == 1:
            return acc.sum(axis=1)
        for a in agree[1:-1]:
            acc = (acc[:, None, :] * a[None, :, :]).reshape(-1, acc.shape[-1])
        return acc @ agree[-1].T

    chunks = np.array_split(np.arange(k), max(1, min(k, workers * 4)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, chunks))
    else:
        parts = [block(c) for c in chunks]
    # counts are integers below 2**53, so float accumulation is exact
    counts = np.rint(np.concatenate([p.reshape(-1) for p in parts])).astype(np.int64).reshape((k,) * length)

    lm = _log_marginals(tab, base)
    bits = ((ref[:, None] >> np.arange(tab.cells, dtype=np.uint64)) & np.uint64(1)).astype(np.intp)
    site_logs = lm[np.arange(length)[:, None], np.arange(tab.cells)[None, :], bits]  # (L, cells)
    member = ((subsets[:, None] >> np.arange(tab.cells, dtype=np.uint64)) & np.uint64(1)).astype(np.float64)
    marg = np.zeros((k,) * length)
    for t in range(length):
        shape = [1] * length
        shape[t] = k
        marg = marg + (member @ site_logs[t]).reshape(shape)
    with np.errstate(divide="ignore"):
        scores = np.log2(counts) if base == 2 else np.log(counts) / math.log(base)
    scores = scores - _log(tab.total, base) - marg
    return SubsetScores(spec, subsets, counts, scores)


def search_subsets(
    tab: EnsembleTable, spec: SubsetPatternSpec, objective: str = "max", base: float = 2, workers: int = 1
) -> SubsetSearchResult:
    """Extremal EVIFPP over all per-slice node subsets of size ``n``.

    The representative is the lexicographically first co-extremal candidate;
    its value is recomputed through :func:`evaluate_fixed_nodes`.
    """
    table = subset_scores(tab, spec, base, workers)
    _, hits = table.extremal(objective)
    first = np.unravel_index(int(np.argmax(hits.reshape(-1))), hits.shape)
    masks = table.node_masks(first)
    value = evaluate_fixed_nodes(tab, spec.reference, masks, base).value
    return SubsetSearchResult(objective, masks, value, int(hits.sum()), int(hits.size))


def evaluate_fixed_nodes(
    tab: EnsembleTable, window: TrajectoryWindow, node_masks: Sequence[int], base: float = 2
) -> Evidence:
    """EVIFPP of the pattern reading ``window``'s values at the given per-slice node masks."""
    if tab.multiplicity(window) < 1:
        raise ContractViolation("window does not occur in the ensemble")
    return evifpp(tab, window.pattern(node_masks), base)
