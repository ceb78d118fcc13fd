"""Text and SVG figures of trajectory windows and fixed-node patterns."""

from __future__ import annotations

import re
from typing import Sequence
from xml.sax.saxutils import escape

from .life import render_bits
from .pattern import TrajectoryWindow

CELL = 14
GAP = 10
LABEL_WIDTH = 150

_FILL = {
    (1, True): "#000000",
    (0, True): "#ffffff",
    (1, False): "#8c8c8c",
    (0, False): "#e6e6e6",
}


def window_text(window: TrajectoryWindow, node_masks: Sequence[int] | None = None) -> str:
    """Slices side by side; unfixed nodes print as ``o`` (alive) / ``,`` (dead)."""
    w, h = window.width, window.height
    blocks = []
    for i, s in enumerate(window.slices):
        grid = render_bits(s, w, h).splitlines()
        if node_masks is not None:
            mask = node_masks[i]
            grid = [
                "".join(
                    ch if mask >> (r * w + c) & 1 else ("o" if ch == "#" else ",") for c, ch in enumerate(line)
                )
                for r, line in enumerate(grid)
            ]
        blocks.append(grid)
    return "\n".join(" ".join(b[r] for b in blocks) for r in range(h))


def windows_svg(rows: Sequence[tuple[str, TrajectoryWindow, Sequence[int] | None]]) -> str:
    """One figure row per ``(label, window, node_masks)``; node_masks may be ``None``.

    Every cell is a ``rect`` carrying ``data-row``, ``data-slice``, ``data-r``,
    ``data-c`` and a class of ``alive``/``dead`` plus ``fixed``/``free``.
    """
    if not rows:
        raise ValueError("nothing to render")
    w, h = rows[0][1].width, rows[0][1].height
    length = max(win.length for _, win, _ in rows)
    grid_w, grid_h = w * CELL, h * CELL
    width = LABEL_WIDTH + length * (grid_w + GAP) + GAP
    height = len(rows) * (grid_h + GAP) + GAP
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for ri, (label, win, masks) in enumerate(rows):
        y0 = GAP + ri * (grid_h + GAP)
        out.append(
            f'<text x="4" y="{y0 + grid_h // 2 + 4}" font-family="monospace" font-size="11">{escape(label)}</text>'
        )
        for si, s in enumerate(win.slices):
            x0 = LABEL_WIDTH + si * (grid_w + GAP)
            for k in range(w * h):
                r, c = divmod(k, w)
                v = s >> k & 1
                fixed = masks is None or bool(masks[si] >> k & 1)
                cls = ("alive" if v else "dead") + (" fixed" if fixed else " free")
                out.append(
                    f'<rect class="{cls}" data-row="{ri}" data-slice="{si}" data-r="{r}" data-c="{c}" '
                    f'x="{x0 + c * CELL}" y="{y0 + r * CELL}" width="{CELL}" height="{CELL}" '
                    f'fill="{_FILL[v, fixed]}" stroke="#444444" stroke-width="0.5"/>'
                )
    out.append("</svg>")
    return "\n".join(out) + "\n"


_RECT = re.compile(r'<rect class="(\w+) (\w+)" data-row="(\d+)" data-slice="(\d+)" data-r="(\d+)" data-c="(\d+)"')


def svg_row_text(svg: str, row: int) -> str:
    """Recover the :func:`window_text` rendering of one figure row from SVG markup."""
    cells = {}
    for m in _RECT.finditer(svg):
        state, fixed, ri, si, r, c = m.groups()
        if int(ri) == row:
            ch = ("#" if state == "alive" else ".") if fixed == "fixed" else ("o" if state == "alive" else ",")
            cells[int(si), int(r), int(c)] = ch
    n_slices = 1 + max(s for s, _, _ in cells)
    h = 1 + max(r for _, r, _ in cells)
    w = 1 + max(c for _, _, c in cells)
    return "\n".join(
        " ".join("".join(cells[s, r, c] for c in range(w)) for s in range(n_slices)) for r in range(h)
    )
