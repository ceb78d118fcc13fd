"""Spatiotemporal patterns and trajectory windows.

Nodes are ``(time, site)`` pairs.  For grid systems ``site = row * width + col``
and ``time`` counts generations from the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ContractViolation
from .life import BitState, GridSymmetry, permute_bits, render_bits

Node = tuple[int, int]


@dataclass(frozen=True)
class SpatioTemporalPattern:
    """A set of nodes together with one fixed value per node."""

    items: tuple[tuple[Node, int], ...] = ()

    def __post_init__(self):
        nodes = [n for n, _ in self.items]
        if len(set(nodes)) != len(nodes):
            raise ContractViolation("pattern assigns a node more than once")
        if list(self.items) != sorted(self.items):
            object.__setattr__(self, "items", tuple(sorted(self.items)))

    @classmethod
    def from_mapping(cls, values: Mapping[Node, int]) -> SpatioTemporalPattern:
        return cls(tuple(sorted(((int(t), int(s)), int(v)) for (t, s), v in values.items())))

    @classmethod
    def from_masks(cls, start: int, care: Sequence[int], value: Sequence[int]) -> SpatioTemporalPattern:
        """Build from per-slice node masks and value words (bit ``k`` = site ``k``)."""
        items = []
        for i, (c, v) in enumerate(zip(care, value)):
            c, v = int(c), int(v)
            k = 0
            while c >> k:
                if c >> k & 1:
                    items.append(((start + i, k), v >> k & 1))
                k += 1
        return cls(tuple(items))

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(n for n, _ in self.items)

    def as_dict(self) -> dict[Node, int]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def restrict(self, nodes: Iterable[Node]) -> SpatioTemporalPattern:
        values = self.as_dict()
        try:
            return SpatioTemporalPattern(tuple((n, values[n]) for n in nodes))
        except KeyError as exc:
            raise ContractViolation(f"node {exc.args[0]} is not part of the pattern") from None

    def slice_masks(self, start: int, length: int, cells: int) -> tuple[list[int], list[int]]:
        """Per-slice ``(care, value)`` bit masks relative to a window."""
        care = [0] * length
        value = [0] * length
        for (t, site), v in self.items:
            if not (start <= t < start + length) or not (0 <= site < cells):
                raise ContractViolation(f"node {(t, site)} lies outside window t={start}..{start + length - 1}")
            if v not in (0, 1):
                raise ContractViolation(f"binary grid pattern has value {v} at node {(t, site)}")
            care[t - start] |= 1 << site
            value[t - start] |= v << site
        return care, value

    def transform(self, g: GridSymmetry, width: int, height: int) -> SpatioTemporalPattern:
        """Move every node's site by ``g``, keeping times and values."""
        mapping = g.cell_mapping(width, height)
        return SpatioTemporalPattern(tuple(((t, mapping[s]), v) for (t, s), v in self.items))


@dataclass(frozen=True)
class TrajectoryWindow:
    """Consecutive global states of one trajectory, starting at ``start_time``."""

    start_time: int
    slices: tuple[int, ...]
    width: int
    height: int

    def __post_init__(self):
        if not self.slices:
            raise ContractViolation("a window needs at least one slice")
        object.__setattr__(self, "slices", tuple(int(s) for s in self.slices))
        limit = 1 << (self.width * self.height)
        if any(not 0 <= s < limit for s in self.slices):
            raise ContractViolation("slice value out of range for grid")

    @property
    def length(self) -> int:
        return len(self.slices)

    @property
    def times(self) -> range:
        return range(self.start_time, self.start_time + self.length)

    def states(self) -> tuple[BitState, ...]:
        return tuple(BitState(s, self.width, self.height) for s in self.slices)

    def value(self, time: int, site: int) -> int:
        return self.slices[time - self.start_time] >> site & 1

    def pattern(self, node_masks: Sequence[int] | None = None) -> SpatioTemporalPattern:
        """The pattern fixing the given per-slice node masks to this window's values."""
        full = (1 << (self.width * self.height)) - 1
        if node_masks is None:
            node_masks = [full] * self.length
        if len(node_masks) != self.length:
            raise ContractViolation(f"expected {self.length} node masks, got {len(node_masks)}")
        if any(int(m) & ~full for m in node_masks):
            raise ContractViolation("node mask addresses a site outside the grid")
        return SpatioTemporalPattern.from_masks(self.start_time, node_masks, self.slices)

    def transform(self, g: GridSymmetry) -> TrajectoryWindow:
        mapping = g.cell_mapping(self.width, self.height)
        return TrajectoryWindow(
            self.start_time, tuple(int(permute_bits(s, mapping)) for s in self.slices), self.width, self.height
        )

    def render(self) -> str:
        return "\n\n".join(render_bits(s, self.width, self.height) for s in self.slices)

    def hex(self) -> str:
        digits = (self.width * self.height + 3) // 4
        return ":".join(f"{s:0{digits}x}" for s in self.slices)
