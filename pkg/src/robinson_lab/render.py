"""SVG drawings of tiles, patches and substitution images.

Principal lines are blue, secondary lines red.  Output is deterministic so
drawings can be compared byte for byte.
"""

from __future__ import annotations

from typing import Iterable, Union

from .patches import Patch
from .substitution import DoubledPatch, DoubledCatalog, OverlapRule
from .tiles import OUT, PRINCIPAL, OrientedTile

BLUE = "#1d4ed8"
RED = "#dc2626"
GRID = "#c7c7c7"
FRAME = "#404040"
SHADE = "#e5e5e5"
SCALE = 24

# outward unit normal and along-edge direction (the direction of positive offset)
_NORMAL = {"N": (0, 1), "S": (0, -1), "E": (1, 0), "W": (-1, 0)}
_ALONG = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, x0: float, y0: float, x1: float, y1: float, scale: int = SCALE):
        self.x0, self.y0, self.x1, self.y1 = x0, y0, x1, y1
        self.scale = scale
        self.items: list[str] = []

    def pt(self, x: float, y: float) -> tuple[str, str]:
        return _fmt((x - self.x0) * self.scale), _fmt((self.y1 - y) * self.scale)

    def line(self, a, b, color, width=2.0):
        (ax, ay), (bx, by) = self.pt(*a), self.pt(*b)
        self.items.append(
            f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}" stroke="{color}" '
            f'stroke-width="{_fmt(width)}" stroke-linecap="round"/>'
        )

    def rect(self, x, y, w, h, fill="none", stroke="none", width=1.0):
        px, py = self.pt(x, y + h)
        self.items.append(
            f'<rect x="{px}" y="{py}" width="{_fmt(w * self.scale)}" height="{_fmt(h * self.scale)}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def polygon(self, pts, color):
        coords = " ".join(",".join(self.pt(x, y)) for x, y in pts)
        self.items.append(f'<polygon points="{coords}" fill="{color}"/>')

    def render(self) -> str:
        w = _fmt((self.x1 - self.x0) * self.scale)
        h = _fmt((self.y1 - self.y0) * self.scale)
        body = "\n".join(self.items)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
            f'<rect width="{w}" height="{h}" fill="white"/>\n{body}\n</svg>\n'
        )


def _secondary_lines(t: OrientedTile):
    """Secondary marks as (side, global coordinate of the line across the tile)."""
    out = []
    for side in ("N", "E", "S", "W"):
        for m in t.edge(side).marks:
            if m.color == PRINCIPAL:
                continue
            ax, ay = _ALONG[side]
            # position of the line measured along the global axis parallel to the edge
            out.append((side, 0.25 * m.offset * (ax + ay)))
    return out


def draw_tile(c: _Canvas, t: OrientedTile, cx: float, cy: float) -> None:
    """Draw ``t`` with its centre at (cx, cy) and unit side."""
    c.rect(cx - 0.5, cy - 0.5, 1, 1, stroke=GRID, width=0.6)
    sec = _secondary_lines(t)
    for side, pos in sec:
        nx, ny = _NORMAL[side]
        if nx:  # horizontal secondary line at height pos
            start = (cx + 0.5 * nx, cy + pos)
            stops = [p for s, p in sec if s in "NS"]
            end_x = cx + (min(stops, key=lambda p: abs(p - 0.5 * nx)) if stops else -0.5 * nx)
            c.line(start, (end_x, cy + pos), RED, 1.6)
        else:
            start = (cx + pos, cy + 0.5 * ny)
            stops = [p for s, p in sec if s in "EW"]
            end_y = cy + (min(stops, key=lambda p: abs(p - 0.5 * ny)) if stops else -0.5 * ny)
            c.line(start, (cx + pos, end_y), RED, 1.6)
    for side in ("N", "E", "S", "W"):
        nx, ny = _NORMAL[side]
        for m in t.edge(side).marks:
            if m.color != PRINCIPAL:
                continue
            edge = (cx + 0.5 * nx, cy + 0.5 * ny)
            c.line((cx, cy), edge, BLUE, 2.4)
            if m.arrow == OUT:
                tip = (cx + 0.46 * nx, cy + 0.46 * ny)
                back = (cx + 0.3 * nx, cy + 0.3 * ny)
                px, py = -ny * 0.08, nx * 0.08
                c.polygon([tip, (back[0] + px, back[1] + py), (back[0] - px, back[1] - py)], BLUE)


def tile_svg(t: OrientedTile) -> str:
    c = _Canvas(-0.6, -0.6, 0.6, 0.6, scale=96)
    draw_tile(c, t, 0, 0)
    return c.render()


def patch_svg(p: Patch) -> str:
    ox, oy = p.origin
    pad = 0.1
    c = _Canvas(ox - 0.5 - pad, oy - 0.5 - pad, ox + p.width - 0.5 + pad, oy + p.height - 0.5 + pad)
    for x, y in p.positions():
        draw_tile(c, p.at(x, y), x, y)
    c.rect(ox - 0.5, oy - 0.5, p.width, p.height, stroke=FRAME, width=1.2)
    return c.render()


def _draw_unit_cells(c: _Canvas, cells: dict, clip: tuple[float, float, float, float]) -> None:
    x0, y0, x1, y1 = clip
    for (x, y), t in sorted(cells.items()):
        if x0 <= x <= x1 and y0 <= y <= y1:
            draw_tile(c, t, x, y)


def doubled_patch_svg(dp: DoubledPatch, tiles: DoubledCatalog) -> str:
    cells = {}
    for qx, qy in dp.positions():
        d = tiles[dp.at(qx, qy)]
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                cells[(2 * qx + dx, 2 * qy + dy)] = d.cell(dx, dy)
    qx0, qy0 = dp.origin
    x0, y0 = 2 * qx0 - 1, 2 * qy0 - 1
    x1, y1 = 2 * (qx0 + dp.width - 1) + 1, 2 * (qy0 + dp.height - 1) + 1
    c = _Canvas(x0 - 0.5, y0 - 0.5, x1 + 0.5, y1 + 0.5)
    _draw_unit_cells(c, cells, (x0, y0, x1, y1))
    for qx, qy in dp.positions():
        c.rect(2 * qx - 1, 2 * qy - 1, 2, 2, stroke=FRAME, width=1.2)
    return c.render()


def rule_svg(r: OverlapRule, t: int) -> str:
    """The doubled tile ``t`` beside its overlapping image, with the inflated tile shaded."""
    tiles = r.tiles
    c = _Canvas(-7.5, -3.5, 3.5, 3.5)
    # the source tile, drawn at the left
    src = {(dx - 5.5, dy): tiles[t].cell(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
    for (x, y), u in src.items():
        draw_tile(c, u, x, y)
    c.rect(-6.5, -1, 2, 2, stroke=FRAME, width=1.2)
    # the image: unit cells covered by the nine doubled tiles
    c.rect(-2, -2, 4, 4, fill=SHADE)
    cells = {}
    img = r.table[t]
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            d = tiles[img[dy + 1][dx + 1]]
            for ey in (-1, 0, 1):
                for ex in (-1, 0, 1):
                    cells[(2 * dx + ex, 2 * dy + ey)] = d.cell(ex, ey)
    _draw_unit_cells(c, cells, (-3, -3, 3, 3))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            c.rect(2 * dx - 1, 2 * dy - 1, 2, 2, stroke=FRAME, width=1.2)
    return c.render()


def rules_svg(r: OverlapRule, ids: Iterable[int] | None = None) -> list[tuple[int, str]]:
    ids = range(len(r.table)) if ids is None else ids
    return [(t, rule_svg(r, t)) for t in ids]


def render_svg(target: Union[OrientedTile, Patch, DoubledPatch, tuple[OverlapRule, int]], tiles: DoubledCatalog | None = None) -> str:
    """Draw a tile, a patch, a patch of doubled tiles, or one rule entry ``(rule, tile id)``."""
    if isinstance(target, OrientedTile):
        return tile_svg(target)
    if isinstance(target, Patch):
        return patch_svg(target)
    if isinstance(target, DoubledPatch):
        if tiles is None:
            raise ValueError("drawing doubled tiles needs their catalog")
        return doubled_patch_svg(target, tiles)
    if isinstance(target, tuple) and len(target) == 2 and isinstance(target[0], OverlapRule):
        return rule_svg(*target)
    raise TypeError(f"cannot draw {type(target).__name__}")
