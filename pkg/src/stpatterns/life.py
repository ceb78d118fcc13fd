"""Bit-packed Game of Life (B3/S23) on small toroidal grids.

A grid state is a single unsigned word: bit ``k`` holds cell
``(k // width, k % width)`` and a set bit means the cell is alive.  The
low-level functions (:func:`step_bits`, :func:`permute_bits`) accept either a
Python ``int`` or a numpy ``uint64`` array, so the same code evolves one state
or all ``2**(width*height)`` states at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation

RULE_ID = "B3/S23"
WORD_CELLS = 64


def _check_dims(width: int, height: int) -> None:
    if width < 1 or height < 1:
        raise ContractViolation(f"grid dimensions must be positive, got {width}x{height}")
    if width * height > WORD_CELLS:
        raise ContractViolation(f"{width}x{height} grid does not fit in a {WORD_CELLS}-bit word")


@lru_cache(maxsize=None)
def _masks(width: int, height: int) -> tuple[int, int, int, int]:
    full = (1 << (width * height)) - 1
    first_col = sum(1 << (r * width) for r in range(height))
    last_col = first_col << (width - 1)
    return full, first_col, last_col, full & ~first_col


def _roll_cols(x, width: int, height: int, right: bool):
    full, first_col, last_col, not_first = _masks(width, height)
    if right:
        return ((x << 1) & not_first) | ((x & last_col) >> (width - 1))
    return ((x >> 1) & (full & ~last_col)) | ((x & first_col) << (width - 1))


def _roll_rows(x, width: int, height: int, down: bool):
    full = _masks(width, height)[0]
    span = width * (height - 1)
    if down:
        return ((x << width) | (x >> span)) & full
    return ((x >> width) | (x << span)) & full


def step_bits(x, width: int, height: int):
    """One B3/S23 generation on a ``width x height`` torus.

    Neighbour counts are accumulated with bit-sliced adders: ``ones`` and
    ``twos`` are the low two bits of the count and ``many`` latches any
    count of four or more.
    """
    full = _masks(width, height)[0]
    left = _roll_cols(x, width, height, right=False)
    right = _roll_cols(x, width, height, right=True)
    rows = (x, left, right)
    neighbours = [left, right]
    for word in rows:
        neighbours.append(_roll_rows(word, width, height, down=True))
        neighbours.append(_roll_rows(word, width, height, down=False))

    ones = twos = many = x & 0
    for n in neighbours:
        carry = ones & n
        ones = ones ^ n
        carry2 = twos & carry
        twos = twos ^ carry
        many = many | carry2
    return twos & (ones | x) & ~many & full


def evolve_bits(x, width: int, height: int, steps: int):
    for _ in range(steps):
        x = step_bits(x, width, height)
    return x


def permute_bits(x, mapping: Sequence[int]):
    """Move bit ``k`` of ``x`` to position ``mapping[k]``."""
    out = x & 0
    for src, dst in enumerate(mapping):
        out = out | (((x >> src) & 1) << dst)
    return out


# Point-group elements as integer 2x2 matrices acting on (row, col).
_ROT = ((0, 1), (-1, 0))
_REFLECT = ((1, 0), (0, -1))


def _matmul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _point_matrix(quarter_turns: int, reflect: bool):
    m = _REFLECT if reflect else ((1, 0), (0, 1))
    for _ in range(quarter_turns % 4):
        m = _matmul(_ROT, m)
    return m


_MATRIX_TO_POINT = {_point_matrix(k, f): (k, f) for k in range(4) for f in (False, True)}


@dataclass(frozen=True, order=True)
class GridSymmetry:
    """Torus symmetry ``cell -> A @ cell + (row_shift, col_shift)``.

    ``A`` is a quarter-turn rotation applied after an optional column
    reflection.  Rotations are only defined on square grids.
    """

    row_shift: int = 0
    col_shift: int = 0
    quarter_turns: int = 0
    reflect: bool = False

    @property
    def matrix(self):
        return _point_matrix(self.quarter_turns, self.reflect)

    def check(self, width: int, height: int) -> None:
        if self.quarter_turns % 4 and width != height:
            raise ContractViolation(f"rotation requested on non-square {width}x{height} grid")

    def map_cell(self, row: int, col: int, width: int, height: int) -> tuple[int, int]:
        (a, b), (c, d) = self.matrix
        return (a * row + b * col + self.row_shift) % height, (c * row + d * col + self.col_shift) % width

    def cell_mapping(self, width: int, height: int) -> tuple[int, ...]:
        self.check(width, height)
        out = []
        for k in range(width * height):
            r, c = self.map_cell(k // width, k % width, width, height)
            out.append(r * width + c)
        return tuple(out)

    def compose(self, first: GridSymmetry, width: int, height: int) -> GridSymmetry:
        """The symmetry that applies ``first`` and then ``self``."""
        self.check(width, height)
        first.check(width, height)
        m = _matmul(self.matrix, first.matrix)
        (a, b), (c, d) = self.matrix
        dr = a * first.row_shift + b * first.col_shift + self.row_shift
        dc = c * first.row_shift + d * first.col_shift + self.col_shift
        k, f = _MATRIX_TO_POINT[m]
        return GridSymmetry(dr % height, dc % width, k, f)

    def inverse(self, width: int, height: int) -> GridSymmetry:
        self.check(width, height)
        (a, b), (c, d) = self.matrix
        # signed permutation matrices are orthogonal
        inv = ((a, c), (b, d))
        k, f = _MATRIX_TO_POINT[inv]
        dr = -(inv[0][0] * self.row_shift + inv[0][1] * self.col_shift)
        dc = -(inv[1][0] * self.row_shift + inv[1][1] * self.col_shift)
        return GridSymmetry(dr % height, dc % width, k, f)


IDENTITY = GridSymmetry()


def translation_group(width: int, height: int) -> tuple[GridSymmetry, ...]:
    return tuple(GridSymmetry(dr, dc) for dr in range(height) for dc in range(width))


def full_group(width: int, height: int) -> tuple[GridSymmetry, ...]:
    """Translations combined with the point group of the grid.

    Square grids get all eight rotations/reflections (128 elements on 4x4);
    rectangular grids only the column reflection.
    """
    turns = range(4) if width == height else range(1)
    return tuple(
        GridSymmetry(dr, dc, k, f)
        for f in (False, True)
        for k in turns
        for dr in range(height)
        for dc in range(width)
    )


@dataclass(frozen=True)
class BitState:
    bits: int
    width: int
    height: int

    def __post_init__(self):
        _check_dims(self.width, self.height)
        if not 0 <= self.bits < 1 << (self.width * self.height):
            raise ContractViolation(f"bits {self.bits:#x} out of range for {self.width}x{self.height} grid")

    @classmethod
    def from_cells(cls, cells: Iterable[tuple[int, int]], width: int, height: int) -> BitState:
        bits = 0
        for r, c in cells:
            bits |= 1 << ((r % height) * width + (c % width))
        return cls(bits, width, height)

    @classmethod
    def from_text(cls, text: str) -> BitState:
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        width = len(lines[0])
        cells = [(r, c) for r, ln in enumerate(lines) for c, ch in enumerate(ln) if ch == "#"]
        return cls.from_cells(cells, width, len(lines))

    def cell(self, row: int, col: int) -> int:
        return (self.bits >> (row * self.width + col)) & 1

    def live_cells(self) -> list[tuple[int, int]]:
        return [(k // self.width, k % self.width) for k in range(self.width * self.height) if self.bits >> k & 1]

    def population(self) -> int:
        return self.bits.bit_count()

    def render(self) -> str:
        return render_bits(self.bits, self.width, self.height)


def step(s: BitState) -> BitState:
    return BitState(int(step_bits(s.bits, s.width, s.height)), s.width, s.height)


def apply_symmetry(s: BitState, g: GridSymmetry) -> BitState:
    return BitState(int(permute_bits(s.bits, g.cell_mapping(s.width, s.height))), s.width, s.height)


def render_bits(bits: int, width: int, height: int) -> str:
    return "\n".join(
        "".join("#" if bits >> (r * width + c) & 1 else "." for c in range(width)) for r in range(height)
    )


def canonical_form(window: Sequence[BitState], group: Sequence[GridSymmetry]) -> tuple[BitState, ...]:
    """Lexicographically least image of ``window`` under ``group``.

    Each symmetry acts on every slice at once, so the result is constant on
    orbits of whole windows.
    """
    if not group:
        raise ContractViolation("symmetry group must not be empty")
    window = tuple(window)
    if not window:
        return window
    width, height = window[0].width, window[0].height
    best = None
    for g in group:
        mapping = g.cell_mapping(width, height)
        image = tuple(permute_bits(s.bits, mapping) for s in window)
        if best is None or image < best:
            best = image
    return tuple(BitState(int(b), width, height) for b in best)


def canonical_windows(windows: np.ndarray, group: Sequence[GridSymmetry], width: int, height: int):
    """Vectorised :func:`canonical_form` over a ``(D, L)`` array of windows.

    Returns the canonical windows as a ``(D, L)`` array.
    """
    if not group:
        raise ContractViolation("symmetry group must not be empty")
    windows = np.asarray(windows, dtype=np.uint64)
    best = None
    for g in group:
        image = permute_bits(windows, g.cell_mapping(width, height))
        if best is None:
            best = image.copy()
            continue
        # lexicographic row comparison: find first differing slice
        diff = image != best
        first = np.argmax(diff, axis=1)
        rows = np.arange(len(windows))
        smaller = diff.any(axis=1) & (image[rows, first] < best[rows, first])
        best[smaller] = image[smaller]
    return best
