"""Finite patches of the Robinson tiling: legality, generation and frame checks.

Coordinates are global integer positions with y pointing north.  A patch
stores its rows from south to north.  With the default parity anchor (1, 1)
every position with odd x and odd y holds a cross.
"""

from __future__ import annotations

import logging
import random
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .tiles import (
    IN,
    OUT,
    PRINCIPAL,
    SECONDARY,
    Catalog,
    EdgeSignature,
    OrientedTile,
    abut,
    default_catalog,
)

log = logging.getLogger(__name__)

DEFAULT_NODE_LIMIT = 2_000_000


class UnsatisfiableError(RuntimeError):
    """No legal patch exists with the requested constraints."""


class SearchLimitError(UnsatisfiableError):
    """The solver gave up after exhausting its node budget."""


@dataclass(frozen=True)
class Patch:
    origin: tuple[int, int]
    rows: tuple[tuple[OrientedTile, ...], ...]
    parity_anchor: tuple[int, int] = (1, 1)

    @property
    def width(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    @property
    def height(self) -> int:
        return len(self.rows)

    def __contains__(self, pos: tuple[int, int]) -> bool:
        x, y = pos[0] - self.origin[0], pos[1] - self.origin[1]
        return 0 <= x < self.width and 0 <= y < self.height

    def at(self, x: int, y: int) -> OrientedTile:
        return self.rows[y - self.origin[1]][x - self.origin[0]]

    def positions(self) -> Iterator[tuple[int, int]]:
        ox, oy = self.origin
        for j in range(self.height):
            for i in range(self.width):
                yield ox + i, oy + j

    def cross_site(self, x: int, y: int) -> bool:
        ax, ay = self.parity_anchor
        return (x - ax) % 2 == 0 and (y - ay) % 2 == 0

    def window(self, x: int, y: int, width: int, height: int) -> "Patch":
        ox, oy = self.origin
        i, j = x - ox, y - oy
        if i < 0 or j < 0 or i + width > self.width or j + height > self.height:
            raise ValueError("window leaves the patch")
        rows = tuple(r[i : i + width] for r in self.rows[j : j + height])
        return Patch((x, y), rows, self.parity_anchor)

    def trimmed(self, margin: int) -> "Patch":
        ox, oy = self.origin
        return self.window(ox + margin, oy + margin, self.width - 2 * margin, self.height - 2 * margin)

    def replace(self, x: int, y: int, tile: OrientedTile) -> "Patch":
        rows = [list(r) for r in self.rows]
        rows[y - self.origin[1]][x - self.origin[0]] = tile
        return Patch(self.origin, tuple(tuple(r) for r in rows), self.parity_anchor)

    def names(self) -> list[list[str]]:
        return [[t.name for t in row] for row in self.rows]


def patch_to_dict(p: Patch) -> dict:
    return {
        "origin": list(p.origin),
        "width": p.width,
        "height": p.height,
        "parity_anchor": list(p.parity_anchor),
        "rows": p.names(),
    }


def patch_from_dict(data: dict, catalog: Catalog | None = None) -> Patch:
    catalog = catalog or default_catalog()
    try:
        rows = tuple(tuple(catalog.by_name[n] for n in row) for row in data["rows"])
    except KeyError as exc:
        raise ValueError(f"unknown tile {exc.args[0]!r} in patch") from None
    if len(rows) != data.get("height", len(rows)) or any(len(r) != data.get("width", len(r)) for r in rows):
        raise ValueError("patch rows do not match the declared width and height")
    return Patch(tuple(data["origin"]), rows, tuple(data.get("parity_anchor", (1, 1))))


def legal(p: Patch, catalog: Catalog | None = None) -> bool:
    """Every seam matches and every cross site holds a cross.

    Crosses of higher order also appear away from the cross sites; only the
    sites themselves are constrained.
    """
    return not violations(p, catalog)


def violations(p: Patch, catalog: Catalog | None = None) -> list[tuple]:
    catalog = catalog or default_catalog()
    bad = []
    for x, y in p.positions():
        t = p.at(x, y)
        if t not in catalog.index:
            bad.append(("unknown tile", (x, y)))
            continue
        if p.cross_site(x, y) and not t.is_cross:
            bad.append(("missing cross", (x, y)))
        if (x + 1, y) in p and not abut(t.edge("E"), p.at(x + 1, y).edge("W")):
            bad.append(("horizontal seam", (x, y), (x + 1, y)))
        if (x, y + 1) in p and not abut(t.edge("N"), p.at(x, y + 1).edge("S")):
            bad.append(("vertical seam", (x, y), (x, y + 1)))
    return bad


# ---------------------------------------------------------------------------
# constraint search


def _support(mask: int, table: Sequence[int]) -> int:
    out = 0
    while mask:
        low = mask & -mask
        out |= table[low.bit_length() - 1]
        mask ^= low
    return out


class _Search:
    """Arc-consistent backtracking over bitmask domains with an undo trail."""

    def __init__(self, catalog: Catalog, width: int, height: int, origin, parity, domains=None):
        self.catalog = catalog
        self.width, self.height = width, height
        n = width * height
        ox, oy = origin
        ax, ay = parity
        self.dom = []
        for k in range(n):
            x, y = ox + k % width, oy + k // width
            site = (x - ax) % 2 == 0 and (y - ay) % 2 == 0
            base = catalog.cross_mask if site else catalog.all_mask
            if domains and (x, y) in domains:
                base &= domains[(x, y)]
            self.dom.append(base)
        self.nbrs = []
        for k in range(n):
            i, j = k % width, k // width
            lst = []
            if i + 1 < width:
                lst.append((k + 1, catalog.right))
            if i > 0:
                lst.append((k - 1, catalog.left))
            if j + 1 < height:
                lst.append((k + width, catalog.up))
            if j > 0:
                lst.append((k - width, catalog.down))
            self.nbrs.append(lst)
        self.trail: list[tuple[int, int]] = []

    def propagate(self, queue: list[int]) -> bool:
        dom, trail = self.dom, self.trail
        while queue:
            k = queue.pop()
            s = dom[k]
            for j, table in self.nbrs[k]:
                new = dom[j] & _support(s, table)
                if new != dom[j]:
                    if not new:
                        return False
                    trail.append((j, dom[j]))
                    dom[j] = new
                    queue.append(j)
        return True

    def undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            j, old = self.trail.pop()
            self.dom[j] = old

    def run(self, order: list[int], node_limit: int) -> bool:
        if any(d == 0 for d in self.dom) or not self.propagate(list(range(len(self.dom)))):
            return False
        self.nodes = 0
        # explicit stack of (cell, remaining values, trail mark)
        stack: list[tuple[int, list[int], int]] = []
        cursor = 0
        n = len(self.dom)
        while True:
            while cursor < n and (self.dom[cursor] & (self.dom[cursor] - 1)) == 0:
                cursor += 1
            if cursor == n:
                return True
            d = self.dom[cursor]
            stack.append((cursor, [v for v in order if d >> v & 1], len(self.trail)))
            while True:
                if not stack:
                    return False
                cell, values, mark = stack[-1]
                self.undo(mark)
                if not values:
                    stack.pop()
                    continue
                v = values.pop(0)
                self.nodes += 1
                if self.nodes > node_limit:
                    raise SearchLimitError(f"gave up after {node_limit} nodes")
                self.trail.append((cell, self.dom[cell]))
                self.dom[cell] = 1 << v
                if self.propagate([cell]):
                    cursor = cell
                    break

    def tiles(self) -> list[OrientedTile]:
        return [self.catalog.tiles[d.bit_length() - 1] for d in self.dom]


def solve_region(
    width: int,
    height: int,
    *,
    origin: tuple[int, int] = (0, 0),
    seed: int = 0,
    catalog: Catalog | None = None,
    domains: dict[tuple[int, int], int] | None = None,
    parity_anchor: tuple[int, int] = (1, 1),
    node_limit: int = DEFAULT_NODE_LIMIT,
    restart_budget: int = 300,
) -> Patch:
    """Find a legal patch covering the given rectangle.

    ``domains`` optionally restricts single cells to a bitmask of catalogue
    indices.  Cells are decided in row-major order and the order in which
    tiles are tried is a permutation fixed by ``seed``.  An attempt that
    uses up ``restart_budget`` nodes is abandoned and the search restarts
    with the next permutation, so the result depends only on ``seed``.
    The final attempt runs without a budget until ``node_limit``.
    """
    catalog = catalog or default_catalog()
    rng = random.Random(seed)
    spent = 0
    attempt = 0
    while True:
        order = list(range(len(catalog)))
        rng.shuffle(order)
        search = _Search(catalog, width, height, origin, parity_anchor, domains)
        budget = min(restart_budget, node_limit - spent)
        last = budget >= node_limit - spent
        try:
            found = search.run(order, budget)
        except SearchLimitError:
            if last:
                raise SearchLimitError(f"gave up after {node_limit} nodes") from None
            spent += budget
            attempt += 1
            continue
        if not found:
            raise UnsatisfiableError(f"no legal {width}x{height} patch")
        break
    tiles = search.tiles()
    rows = tuple(tuple(tiles[j * width : (j + 1) * width]) for j in range(height))
    log.debug("solved %dx%d seed=%d after %d restarts", width, height, seed, attempt)
    return Patch(origin, rows, parity_anchor)


def generate_patch(
    width: int,
    height: int,
    margin: int = 4,
    seed: int = 0,
    *,
    catalog: Catalog | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> Patch:
    """A legal ``width`` x ``height`` patch cut from the middle of a larger solved one.

    The ``margin`` of discarded tiles around the window keeps boundary
    artefacts of the search out of the result.  The window origin is (0, 0)
    so that crosses sit on odd/odd positions.
    """
    big = solve_region(
        width + 2 * margin,
        height + 2 * margin,
        origin=(-margin, -margin),
        seed=seed,
        catalog=catalog,
        node_limit=node_limit,
    )
    return big.window(0, 0, width, height)


# ---------------------------------------------------------------------------
# cross hierarchy


class HierarchyError(ValueError):
    """The crosses of a patch do not nest into a single hierarchy."""


def hierarchy_residues(p: Patch, depth: int | None = None) -> list[tuple[int, int]]:
    """Residues of the cross sites of each order, relative to the patch's parity anchor.

    Order-k crosses occupy one residue class modulo ``2**(k+1)`` that
    refines the class of order k-1 offset by ``2**(k-1)`` in each
    coordinate.  Entry ``k`` of the result is that class (entry 0 is
    always (0, 0)).  Orders are examined while the patch is at least
    ``3 * 2**(k+1)`` across (or up to ``depth``).  A patch crossed by a
    misaligned fault line has no consistent class and raises
    :class:`HierarchyError`.
    """
    size = min(p.width, p.height)
    ax, ay = p.parity_anchor
    out = [(0, 0)]
    k = 1
    while (depth is None and 3 * 2 ** (k + 1) <= size) or (depth is not None and k <= depth):
        mod = 2 ** (k + 1)
        base = (out[-1][0] + 2 ** (k - 1), out[-1][1] + 2 ** (k - 1))
        found = []
        for a in (0, 1):
            for b in (0, 1):
                r = ((base[0] + a * 2**k) % mod, (base[1] + b * 2**k) % mod)
                sites = [(x, y) for x, y in p.positions() if ((x - ax) % mod, (y - ay) % mod) == r]
                if sites and all(p.at(x, y).is_cross for x, y in sites):
                    found.append(r)
        if len(found) != 1:
            raise HierarchyError(f"no consistent class for crosses of order {k} (candidates {found})")
        out.append(found[0])
        k += 1
    return out


def consistent_hierarchy(p: Patch, depth: int | None = None) -> bool:
    try:
        hierarchy_residues(p, depth)
    except HierarchyError:
        return False
    return True


# ---------------------------------------------------------------------------
# frames


def cross_facing(t: OrientedTile) -> tuple[int, int]:
    """Diagonal direction (sx, sy) towards which the secondary corner of a cross opens."""
    sx = 1 if t.edge("E").has(SECONDARY) else -1
    sy = 1 if t.edge("N").has(SECONDARY) else -1
    return sx, sy


def _offset(side: str, direction: int) -> int:
    # global direction (+1 = north on E/W edges, east on N/S edges) to edge offset
    return {"E": direction, "W": -direction, "N": -direction, "S": direction}[side]


def _has_secondary(sig: EdgeSignature, offset: int) -> bool:
    return any(m.color == SECONDARY and m.offset == offset for m in sig.marks)


def trace_secondary(p: Patch, start: tuple[int, int], step: tuple[int, int], side: int):
    """Follow a secondary line leaving ``start`` along ``step``.

    ``side`` says on which side of the tile centres the line runs (+1 north
    or east of the centre line).  Returns ``("corner", distance)`` when a
    cross is reached, ``("open", distance)`` when the line leaves the patch
    and ``("broken", distance)`` when it stops inside a non-cross tile.
    """
    dx, dy = step
    if dx:
        enter, leave = ("W", "E") if dx > 0 else ("E", "W")
    else:
        enter, leave = ("S", "N") if dy > 0 else ("N", "S")
    x, y = start
    dist = 0
    while True:
        x, y = x + dx, y + dy
        dist += 1
        if (x, y) not in p:
            return "open", dist
        t = p.at(x, y)
        if not _has_secondary(t.edge(enter), _offset(enter, side)):
            return "broken", dist
        if t.is_cross:
            return "corner", dist
        if not _has_secondary(t.edge(leave), _offset(leave, side)):
            return "broken", dist


@dataclass
class FrameCensus:
    sizes: Counter = field(default_factory=Counter)
    broken: list = field(default_factory=list)
    open_traces: int = 0


def frame_census(p: Patch) -> FrameCensus:
    """Trace the secondary corner of every cross and sort the closed squares by side length."""
    census = FrameCensus()
    frames = set()
    for x, y in p.positions():
        t = p.at(x, y)
        if not t.is_cross:
            continue
        sx, sy = cross_facing(t)
        kind_h, a = trace_secondary(p, (x, y), (sx, 0), sy)
        kind_v, b = trace_secondary(p, (x, y), (0, sy), sx)
        if "broken" in (kind_h, kind_v):
            census.broken.append(((x, y), "trace stops inside a tile"))
            continue
        if "open" in (kind_h, kind_v):
            census.open_traces += 1
            continue
        if a != b or a & (a - 1):
            census.broken.append(((x, y), f"sides {a} and {b}"))
            continue
        s = a
        corners = {(x + sx * s, y): (-sx, sy), (x, y + sy * s): (sx, -sy), (x + sx * s, y + sy * s): (-sx, -sy)}
        ok = True
        for (cx, cy), want in corners.items():
            if (cx, cy) not in p:
                ok = None
                break
            c = p.at(cx, cy)
            if not c.is_cross or cross_facing(c) != want:
                ok = False
                break
        if ok is None:
            census.open_traces += 1
            continue
        far = (x + sx * s, y + sy * s)
        if ok:
            k1 = trace_secondary(p, (x + sx * s, y), (0, sy), -sx)
            k2 = trace_secondary(p, (x, y + sy * s), (sx, 0), -sy)
            ok = k1 == ("corner", s) and k2 == ("corner", s)
        if not ok:
            census.broken.append(((x, y), f"frame of side {s} does not close at {far}"))
            continue
        frames.add((min(x, far[0]), min(y, far[1]), s))
    census.sizes = Counter(s for _, _, s in frames)
    return census


def verify_frame_hierarchy(p: Patch, n: int) -> bool:
    """Check the nested red squares of sides 2, 4, ..., 2**n.

    Every traced frame lying inside the patch must close up into a square
    whose side is a power of two.  Each required side ``s`` must occur at
    least once whenever the patch is at least ``3 s`` across, which is
    enough room to guarantee one.  Smaller patches pass vacuously with a
    warning.
    """
    census = frame_census(p)
    if census.broken:
        log.info("broken frames: %s", census.broken[:5])
        return False
    for k in range(1, n + 1):
        s = 2**k
        if min(p.width, p.height) < 3 * s:
            warnings.warn(f"patch too small to guarantee a frame of side {s}", stacklevel=2)
            continue
        if census.sizes[s] == 0:
            return False
    return True


def cross_period(p: Patch, axes: str = "xy") -> int | None:
    """Smallest period (2 or 4) shared by the cross orientations along the given axes.

    Across a fault line the two half-planes are independent, so strips
    around such a line should only be measured along it.
    """
    steps = [(1, 0)] * ("x" in axes) + [(0, 1)] * ("y" in axes)
    sites = [(x, y) for x, y in p.positions() if p.cross_site(x, y)]
    for period in (2, 4):
        ok = all(
            p.at(x, y) == p.at(x + period * sx, y + period * sy)
            for x, y in sites
            for sx, sy in steps
            if (x + period * sx, y + period * sy) in p
        )
        if ok:
            return period
    return None


def full_cross_cosets(p: Patch, modulus: int = 2) -> list[tuple[int, int]]:
    """Residues (x mod n, y mod n) at which every position of the patch holds a cross.

    This looks only at the tiles, not at the parity anchor.  A single full
    coset for n = 2 means the crosses contain a square lattice of index 4;
    crosses at the centres of larger squares lie outside it.
    """
    full = []
    for rx in range(modulus):
        for ry in range(modulus):
            cells = [(x, y) for x, y in p.positions() if x % modulus == rx and y % modulus == ry]
            if cells and all(p.at(x, y).is_cross for x, y in cells):
                full.append((rx, ry))
    return full

# ---------------------------------------------------------------------------
# fault rows


@dataclass(frozen=True, order=True)
class FaultRowClass:
    axis: str  # "horizontal" or "vertical"
    direction: str  # where the principal arrows point
    companion: str | None  # side of the secondary line, if any
    signature: str
    line_period: int | None  # period of the tiles along the line itself
    cross_period: int | None  # period of the cross orientations in the strip

    @property
    def multiplicity(self) -> int:
        return 1 if self.companion is None else 2


def _through_signatures(catalog: Catalog, axis: str) -> dict[EdgeSignature, int]:
    """Edge signatures along which a straight principal line can run forever."""
    lead, trail = ("E", "W") if axis == "horizontal" else ("N", "S")
    flank = ("N", "S") if axis == "horizontal" else ("E", "W")
    out: dict[EdgeSignature, int] = {}
    for i, t in enumerate(catalog.tiles):
        if t.is_cross:
            continue
        a, b = t.edge(lead), t.edge(trail)
        if a.lines() != b.reflected().lines() or not a.has(PRINCIPAL):
            continue
        if a.has(PRINCIPAL, OUT) == b.has(PRINCIPAL, OUT):
            continue  # the principal line must pass straight through
        # a fault line separates two supertiles, so no frame crosses it
        if any(t.edge(s).has(SECONDARY) for s in flank):
            continue
        out[a] = out.get(a, 0) | (1 << i)
    return out


def enumerate_fault_rows(
    length: int = 16,
    margin: int = 4,
    *,
    axis: str = "horizontal",
    catalog: Catalog | None = None,
    seed: int = 0,
) -> list[FaultRowClass]:
    """Find every decoration a cross-free straight line can carry.

    For each candidate edge signature the middle line of a
    ``length`` x ``2 margin + 1`` strip is forced to carry it throughout,
    and the strip is solved.  Satisfiable candidates are returned, labelled
    by arrow direction and by the side of the companion secondary line.
    """
    catalog = catalog or default_catalog()
    out = []
    for sig, mask in sorted(_through_signatures(catalog, axis).items(), key=lambda kv: str(kv[0])):
        if axis == "horizontal":
            w, h, origin = length, 2 * margin + 1, (0, -margin)
            line = [(x, 0) for x in range(length)]
        else:
            w, h, origin = 2 * margin + 1, length, (-margin, 0)
            line = [(0, y) for y in range(length)]
        # the line must avoid cross sites, so put it on an even coordinate
        try:
            patch = solve_region(w, h, origin=origin, seed=seed, catalog=catalog, domains={c: mask for c in line})
        except UnsatisfiableError:
            continue
        tiles = [patch.at(*c) for c in line]
        line_period = next(
            (q for q in (1, 2, 4) if all(tiles[i] == tiles[i + q] for i in range(len(tiles) - q))), None
        )
        principal = next(m for m in sig.marks if m.color == PRINCIPAL)
        secondary = [m for m in sig.marks if m.color == SECONDARY]
        if axis == "horizontal":
            direction = "east" if principal.arrow == OUT else "west"
            companion = None if not secondary else ("north" if secondary[0].offset > 0 else "south")
        else:
            direction = "north" if principal.arrow == OUT else "south"
            companion = None if not secondary else ("west" if secondary[0].offset > 0 else "east")
        along = "x" if axis == "horizontal" else "y"
        out.append(FaultRowClass(axis, direction, companion, str(sig), line_period, cross_period(patch, along)))
    return out
