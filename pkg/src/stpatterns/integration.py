"""Evidence for integration of spatiotemporal patterns.

For a pattern ``x_O`` and a partition of its nodes into blocks ``b_j`` the
evidence is the local multi-information

    log p(x_O) - sum_j log p(x_{b_j})

and zero by convention when ``p(x_O) == 0``.  A pattern is integrated when the
evidence is strictly positive for every nontrivial partition.

Probabilities come from a *source*: any object with a
``pattern_probability(pattern)`` method.  Sources that also provide
``pattern_count(pattern)`` and ``total`` (such as
:class:`~stpatterns.ensemble.EnsembleTable`) are evaluated from integer counts,
so the only rounding happens inside the final logarithms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, ContractViolation
from .pattern import Node, SpatioTemporalPattern

MAX_FULL_PARTITION_NODES = 12


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks of nodes, stored in canonical order."""

    blocks: tuple[tuple[Node, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        if any(not b for b in blocks):
            raise ContractViolation("partition has an empty block")
        flat = [n for b in blocks for n in b]
        if len(flat) != len(set(flat)):
            raise ContractViolation("partition blocks overlap")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def trivial(cls, nodes: Iterable[Node]) -> Partition:
        nodes = tuple(nodes)
        return cls((nodes,) if nodes else ())

    @classmethod
    def finest(cls, nodes: Iterable[Node]) -> Partition:
        return cls(tuple((n,) for n in nodes))

    @classmethod
    def from_labels(cls, nodes: Sequence[Node], labels: Sequence[int]) -> Partition:
        groups: dict[int, list[Node]] = {}
        for n, lab in zip(nodes, labels, strict=True):
            groups.setdefault(lab, []).append(n)
        return cls(tuple(tuple(g) for g in groups.values()))

    @property
    def nodes(self) -> frozenset[Node]:
        return frozenset(n for b in self.blocks for n in b)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def is_trivial(self) -> bool:
        return len(self.blocks) <= 1

    def descriptor(self, order: Sequence[Node] | None = None) -> str:
        """Restricted growth string over ``order`` (sorted nodes by default), e.g. ``0.0.1``."""
        order = sorted(self.nodes) if order is None else order
        label = {}
        for i, b in enumerate(sorted(self.blocks, key=lambda b: min(order.index(n) for n in b))):
            for n in b:
                label[n] = i
        return ".".join(str(label[n]) for n in order)

    def check_covers(self, pattern: SpatioTemporalPattern) -> None:
        if self.nodes != frozenset(pattern.nodes):
            raise ContractViolation("partition does not cover exactly the pattern's nodes")


@dataclass(frozen=True)
class Evidence:
    value: float
    base: float = 2.0
    occurred: bool = True

    def __post_init__(self):
        if not self.occurred and self.value != 0:
            raise ContractViolation("evidence of a pattern that never occurs must be 0")

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class IntegrationDecision:
    integrated: bool
    witness: Partition | None
    min_evidence: float
    mode: str
    partitions_checked: int


def _log(x: int | float, base: float) -> float:
    return math.log2(x) if base == 2 else math.log(x) / math.log(base)


def log_probability(source, pattern: SpatioTemporalPattern, base: float = 2) -> float | None:
    """``log p(pattern)``, or ``None`` if the pattern has probability zero."""
    if hasattr(source, "pattern_count"):
        c = source.pattern_count(pattern)
        return None if c == 0 else _log(c, base) - _log(source.total, base)
    p = source.pattern_probability(pattern)
    return None if p == 0 else _log(float(p), base)


def evidence(source, pattern: SpatioTemporalPattern, partition: Partition, base: float = 2) -> Evidence:
    partition.check_covers(pattern)
    joint = log_probability(source, pattern, base)
    if joint is None:
        return Evidence(0.0, base, occurred=False)
    parts = [log_probability(source, pattern.restrict(b), base) for b in partition.blocks]
    # sub-patterns of an occurring pattern occur too
    assert all(p is not None for p in parts)
    return Evidence(joint - math.fsum(parts), base)


def evifpp(source, pattern: SpatioTemporalPattern, base: float = 2) -> Evidence:
    """Evidence with respect to the finest partition (one node per block)."""
    joint = log_probability(source, pattern, base)
    if joint is None:
        return Evidence(0.0, base, occurred=False)
    marginals = getattr(source, "marginals", None)
    if marginals is not None:
        lt = _log(source.total, base)
        parts = [_log(marginals.count(t, s, v), base) - lt for (t, s), v in pattern]
    else:
        parts = [log_probability(source, pattern.restrict([n]), base) for n in pattern.nodes]
    return Evidence(joint - math.fsum(parts), base)


def _restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    a = [0] * n
    # bound[j] = 1 + max(a[:j])
    bound = [1] * n
    while True:
        yield tuple(a)
        j = n - 1
        while j > 0 and a[j] == bound[j]:
            j -= 1
        if j == 0:
            return
        a[j] += 1
        for k in range(j + 1, n):
            a[k] = 0
            bound[k] = max(bound[k - 1], a[k - 1] + 1)


def enumerate_partitions(nodes: Iterable[Node], mode: str = "all") -> Iterator[Partition]:
    """Stream every partition (``mode="all"``) or every two-block partition
    (``mode="bipartitions"``) of ``nodes`` exactly once."""
    nodes = sorted(nodes)
    n = len(nodes)
    if mode == "all":
        if n > MAX_FULL_PARTITION_NODES:
            raise CapacityError(
                f"full partition enumeration is limited to {MAX_FULL_PARTITION_NODES} nodes, got {n}; "
                "use mode='bipartitions' for a necessary-condition screen"
            )
        for labels in _restricted_growth_strings(n):
            yield Partition.from_labels(nodes, labels)
    elif mode == "bipartitions":
        rest = nodes[1:]
        for mask in range(1, 1 << len(rest)):
            other = tuple(x for i, x in enumerate(rest) if mask >> i & 1)
            first = (nodes[0],) + tuple(x for i, x in enumerate(rest) if not mask >> i & 1)
            yield Partition((first, other))
    else:
        raise ContractViolation(f"unknown partition mode {mode!r}")


def is_integrated(source, pattern: SpatioTemporalPattern, mode: str = "all", base: float = 2) -> IntegrationDecision:
    """Check strict positivity of evidence over all nontrivial partitions.

    The trivial partition always scores exactly 0 and is skipped.  A single
    node has no nontrivial partition and counts as integrated with
    ``min_evidence = inf``.  ``mode="bipartitions"`` only screens two-block
    partitions, a necessary condition.
    """
    if log_probability(source, pattern, base) is None:
        raise ContractViolation("integration is only defined for patterns that occur")
    lowest = math.inf
    witness = None
    checked = 0
    for part in enumerate_partitions(pattern.nodes, mode):
        if part.is_trivial:
            continue
        checked += 1
        value = evidence(source, pattern, part, base).value
        if value <= 0 and witness is None:
            witness = part
        lowest = min(lowest, value)
    return IntegrationDecision(witness is None, witness, lowest, mode, checked)


def write_evidence_csv(path, rows: Iterable[tuple[str, SpatioTemporalPattern, Partition, Evidence]]) -> None:
    """Rows of ``(pattern_id, pattern, partition, evidence)``."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["pattern_id", "partition", "evidence", "base", "occurred"])
        for pid, pat, part, ev in rows:
            out.writerow([pid, part.descriptor(list(pat.nodes)), repr(ev.value), repr(ev.base), int(ev.occurred)])
