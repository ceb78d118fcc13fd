"""Exact distribution over trajectory windows of a Game of Life torus.

Every initial state is equally likely, so the probability of any window is an
integer count divided by ``2**(width*height)``.  :class:`EnsembleTable` keeps
the distinct windows together with those counts and answers pattern
probabilities by bitmask comparison against all distinct windows.

Cache file layout (all integers little-endian)::

    magic    8 bytes   b"STPENS\\x00\\x01"
    header   <HHHIIQH  version, width, height, start, length, n_windows, rule_len
    rule     rule_len bytes of UTF-8
    windows  n_windows * length uint64, row-major
    counts   n_windows uint64
    digest   32 bytes  SHA-256 of everything above
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import CapacityError, ChecksumError, ContractViolation, EnsembleFormatError
from .life import RULE_ID, evolve_bits, step_bits
from .pattern import SpatioTemporalPattern, TrajectoryWindow

MAX_ENUM_CELLS = 25
FORMAT_VERSION = 1
_MAGIC = b"STPENS\x00\x01"
_HEADER = struct.Struct("<HHHIIQH")
_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class NodeMarginals:
    """Live counts per window node; ``ones[i, site]`` counts initial states
    whose trajectory has ``site`` alive at time ``start + i``."""

    start: int
    ones: np.ndarray
    total: int

    def count(self, time: int, site: int, value: int) -> int:
        c = int(self.ones[time - self.start, site])
        return c if value else self.total - c

    def probability(self, time: int, site: int, value: int) -> Fraction:
        return Fraction(self.count(time, site, value), self.total)


@dataclass(frozen=True, eq=False)
class EnsembleTable:
    width: int
    height: int
    start: int
    length: int
    windows: np.ndarray = field(repr=False)  # (D, length) uint64, rows sorted lexicographically
    counts: np.ndarray = field(repr=False)  # (D,) int64, all >= 1
    rule: str = RULE_ID

    @property
    def cells(self) -> int:
        return self.width * self.height

    @property
    def total(self) -> int:
        return 1 << self.cells

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other):
        if not isinstance(other, EnsembleTable):
            return NotImplemented
        return (
            (self.width, self.height, self.start, self.length, self.rule)
            == (other.width, other.height, other.start, other.length, other.rule)
            and np.array_equal(self.windows, other.windows)
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None

    @cached_property
    def _index(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in row): i for i, row in enumerate(self.windows)}

    def window(self, i: int) -> TrajectoryWindow:
        return TrajectoryWindow(self.start, tuple(int(v) for v in self.windows[i]), self.width, self.height)

    def iter_windows(self):
        for i in range(len(self)):
            yield self.window(i), int(self.counts[i])

    def index_of(self, window: TrajectoryWindow | tuple[int, ...]) -> int | None:
        if isinstance(window, TrajectoryWindow):
            if window.start_time != self.start or window.length != self.length:
                return None
            window = window.slices
        return self._index.get(tuple(int(v) for v in window))

    def multiplicity(self, window: TrajectoryWindow | tuple[int, ...]) -> int:
        i = self.index_of(window)
        return 0 if i is None else int(self.counts[i])

    def agreement(self, care, value) -> np.ndarray:
        """Boolean row mask of windows that agree with per-slice (care, value) masks."""
        care = np.asarray(care, dtype=np.uint64)
        value = np.asarray(value, dtype=np.uint64)
        return np.all(((self.windows ^ value) & care) == 0, axis=1)

    def pattern_count(self, pattern: SpatioTemporalPattern) -> int:
        care, value = pattern.slice_masks(self.start, self.length, self.cells)
        return int(self.counts[self.agreement(care, value)].sum())

    def pattern_probability(self, pattern: SpatioTemporalPattern) -> Fraction:
        return Fraction(self.pattern_count(pattern), self.total)

    @cached_property
    def marginals(self) -> NodeMarginals:
        ones = np.zeros((self.length, self.cells), dtype=np.int64)
        for k in range(self.cells):
            alive = ((self.windows >> np.uint64(k)) & np.uint64(1)).astype(bool)
            ones[:, k] = (alive * self.counts[:, None]).sum(axis=0)
        return NodeMarginals(self.start, ones, self.total)


def _enumerate_chunk(lo, hi, width, height, start, length):
    x = evolve_bits(np.arange(lo, hi, dtype=np.uint64), width, height, start)
    slices = [x]
    for _ in range(length - 1):
        slices.append(step_bits(slices[-1], width, height))
    return np.unique(np.stack(slices, axis=1), axis=0, return_counts=True)


def build_ensemble(width: int, height: int, start: int, length: int, *, workers: int = 1) -> EnsembleTable:
    """Evolve every initial state ``start`` generations and tally the next ``length`` states.

    The initial-state range is split into chunks; partial tallies are merged
    with a sort, so the result does not depend on ``workers``.
    """
    if width < 1 or height < 1:
        raise ContractViolation(f"grid dimensions must be positive, got {width}x{height}")
    if width * height > MAX_ENUM_CELLS:
        raise CapacityError(
            f"{width}x{height} grid has 2**{width * height} initial states; exhaustive enumeration "
            f"is limited to {MAX_ENUM_CELLS} cells"
        )
    if start < 0 or length < 1:
        raise ContractViolation(f"need start >= 0 and length >= 1, got start={start}, length={length}")

    total = 1 << (width * height)
    bounds = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]
    args = (width, height, start, length)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: _enumerate_chunk(*b, *args), bounds))
    else:
        parts = [_enumerate_chunk(*b, *args) for b in bounds]

    if len(parts) == 1:
        windows, counts = parts[0]
    else:
        windows, inverse = np.unique(np.concatenate([p[0] for p in parts]), axis=0, return_inverse=True)
        counts = np.zeros(len(windows), dtype=np.int64)
        np.add.at(counts, inverse.ravel(), np.concatenate([p[1] for p in parts]))
    table = EnsembleTable(width, height, start, length, windows.astype(np.uint64), counts.astype(np.int64))
    assert int(table.counts.sum()) == total
    return table


def pattern_probability(tab: EnsembleTable, pat: SpatioTemporalPattern) -> Fraction:
    return tab.pattern_probability(pat)


def node_marginals(tab: EnsembleTable) -> NodeMarginals:
    return tab.marginals


def initial_states(width: int, height: int, window: TrajectoryWindow) -> np.ndarray:
    """All initial states whose trajectory passes through ``window`` (brute-force scan)."""
    x = evolve_bits(np.arange(1 << (width * height), dtype=np.uint64), width, height, window.start_time)
    hit = np.ones(len(x), dtype=bool)
    for s in window.slices:
        hit &= x == np.uint64(s)
        x = step_bits(x, width, height)
    return np.nonzero(hit)[0]


def trajectory_window(initial: int, width: int, height: int, start: int, length: int) -> TrajectoryWindow:
    x = evolve_bits(int(initial), width, height, start)
    slices = [x]
    for _ in range(length - 1):
        slices.append(step_bits(slices[-1], width, height))
    return TrajectoryWindow(start, tuple(slices), width, height)


def _payload(tab: EnsembleTable) -> bytes:
    rule = tab.rule.encode()
    header = _HEADER.pack(FORMAT_VERSION, tab.width, tab.height, tab.start, tab.length, len(tab), len(rule))
    return b"".join(
        [
            _MAGIC,
            header,
            rule,
            np.ascontiguousarray(tab.windows, dtype="<u8").tobytes(),
            np.ascontiguousarray(tab.counts, dtype="<u8").tobytes(),
        ]
    )


def save_ensemble(tab: EnsembleTable, path) -> Path:
    """Write ``tab`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = _payload(tab)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.write(hashlib.sha256(data).digest())
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def load_ensemble(
    path,
    *,
    width: int | None = None,
    height: int | None = None,
    start: int | None = None,
    length: int | None = None,
    rule: str | None = None,
) -> EnsembleTable:
    """Read a cache file, verifying checksum and any expected metadata given."""
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + _HEADER.size + 32:
        raise ChecksumError(f"{path}: file too short ({len(raw)} bytes), probably truncated")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise EnsembleFormatError(f"{path}: not an ensemble cache file")
    data, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(data).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch, file is corrupt or truncated")

    pos = len(_MAGIC)
    version, w, h, t0, n_slices, n_windows, rule_len = _HEADER.unpack_from(data, pos)
    if version != FORMAT_VERSION:
        raise EnsembleFormatError(f"{path}: unknown format version {version}")
    pos += _HEADER.size
    file_rule = data[pos : pos + rule_len].decode()
    pos += rule_len
    n_words = n_windows * n_slices
    if len(data) != pos + 8 * (n_words + n_windows):
        raise EnsembleFormatError(f"{path}: payload size does not match header")
    windows = np.frombuffer(data, dtype="<u8", count=n_words, offset=pos).reshape(n_windows, n_slices)
    counts = np.frombuffer(data, dtype="<u8", count=n_windows, offset=pos + 8 * n_words)

    expected = {"width": (width, w), "height": (height, h), "start": (start, t0), "length": (length, n_slices)}
    for name, (want, got) in expected.items():
        if want is not None and want != got:
            raise EnsembleFormatError(f"{path}: {name} mismatch (file has {got}, expected {want})")
    if rule is not None and rule != file_rule:
        raise EnsembleFormatError(f"{path}: rule mismatch (file has {file_rule!r}, expected {rule!r})")

    tab = EnsembleTable(w, h, t0, n_slices, windows.astype(np.uint64), counts.astype(np.int64), file_rule)
    if int(tab.counts.sum()) != tab.total:
        raise EnsembleFormatError(f"{path}: multiplicities do not sum to 2**{w * h}")
    return tab
