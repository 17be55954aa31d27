"""Doubled tiles and the substitution read off from legal patches.

A *doubled tile* is the 3x3 block of unit tiles centred on an even/even
position of a legal patch.  Neighbouring doubled tiles sit two units apart,
so they share their outer rows and columns.  The sub-lattice of positions
congruent to 2 mod 4 (relative to the cross sites) is populated by crosses
again.  Reading a patch at every second position therefore yields a patch
of the same kind, and this self-similarity is what the substitution
records.

The *overlapping* rule maps a doubled tile to the 3x3 array of doubled
tiles that cover it after inflation by two.  Its *normal* rule keeps the
upper-right 2x2 of that array, so that images tile the plane without
overlap.

Images and contents are indexed ``[dy][dx]`` with rows from south to north,
so ``block[0][0]`` is the south-west cell and ``block[2][2]`` the north-east.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .patches import HierarchyError, Patch, consistent_hierarchy, generate_patch, hierarchy_residues, legal
from .tiles import D4, Catalog, D4Element, OrientedTile, default_catalog

log = logging.getLogger(__name__)

CACHE_SCHEMA_VERSION = 1


class DerivationError(RuntimeError):
    """The ensemble does not determine a consistent substitution."""


class InstabilityError(DerivationError):
    pass


class CoverageError(DerivationError):
    pass


class AmbiguityError(DerivationError):
    pass


class PrimitivityError(DerivationError):
    pass


Block = tuple[tuple, tuple, tuple]


def _block_map(g: D4Element, block: Sequence[Sequence], f=lambda v: v) -> Block:
    """Move the cells of a 3x3 block by ``g`` and transform their contents by ``f``."""
    out = [[None] * 3 for _ in range(3)]
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            ex, ey = g.vector(dx, dy)
            out[ey + 1][ex + 1] = f(block[dy + 1][dx + 1])
    return tuple(tuple(r) for r in out)


@dataclass(frozen=True)
class DoubledTile:
    id: int
    content: Block  # 3x3 OrientedTiles, [dy][dx], south row first

    @property
    def center(self) -> OrientedTile:
        return self.content[1][1]

    def cell(self, dx: int, dy: int) -> OrientedTile:
        return self.content[dy + 1][dx + 1]


def _content_key(block: Block) -> tuple:
    return tuple(t for row in block for t in row)


class DoubledCatalog:
    """The doubled tiles in canonical order (by centre tile, then content)."""

    def __init__(self, blocks: Iterable[Block], catalog: Catalog):
        self.catalog = catalog
        ordered = sorted(set(blocks), key=lambda b: (b[1][1], _content_key(b)))
        self.tiles = [DoubledTile(i, b) for i, b in enumerate(ordered)]
        self._lookup = {b: i for i, b in enumerate(ordered)}

    def __len__(self) -> int:
        return len(self.tiles)

    def __getitem__(self, i: int) -> DoubledTile:
        return self.tiles[i]

    def find(self, block: Block) -> int | None:
        return self._lookup.get(block)

    def transform(self, g: D4Element, i: int) -> int | None:
        moved = _block_map(g, self.tiles[i].content, lambda t: self.catalog.transform(g, t))
        return self.find(moved)

    def centre_counts(self) -> dict[OrientedTile, int]:
        counts: dict[OrientedTile, int] = defaultdict(int)
        for t in self.tiles:
            counts[t.center] += 1
        return dict(counts)


def _unit_block(p: Patch, x: int, y: int, step: int = 1) -> Block | None:
    cells = []
    for dy in (-1, 0, 1):
        row = []
        for dx in (-1, 0, 1):
            pos = (x + step * dx, y + step * dy)
            if pos not in p:
                return None
            row.append(p.at(*pos))
        cells.append(tuple(row))
    return tuple(cells)


def _doubled_sites(p: Patch) -> list[tuple[int, int]]:
    ax, ay = p.parity_anchor
    return [(x, y) for x, y in p.positions() if (x - ax) % 2 == 1 and (y - ay) % 2 == 1]


def doubled_blocks(p: Patch) -> list[Block]:
    out = []
    for x, y in _doubled_sites(p):
        b = _unit_block(p, x, y)
        if b is not None:
            out.append(b)
    return out


def derive_doubled_tiles(ensemble: Iterable[Patch], catalog: Catalog | None = None) -> DoubledCatalog:
    """All distinct 3x3 blocks centred on even/even positions of the ensemble."""
    catalog = catalog or default_catalog()
    blocks = set()
    for p in ensemble:
        blocks.update(doubled_blocks(p))
    return DoubledCatalog(blocks, catalog)


# ---------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class OverlapRule:
    tiles: DoubledCatalog
    table: tuple[Block, ...]  # table[i] is the 3x3 image (doubled ids) of tile i

    def image(self, i: int) -> Block:
        return self.table[i]


@dataclass(frozen=True)
class NormalRule:
    tiles: DoubledCatalog
    table: tuple[tuple[tuple[int, int], tuple[int, int]], ...]  # [dy][dx], south row first

    def image(self, i: int):
        return self.table[i]


def level_one_samples(p: Patch, tiles: DoubledCatalog):
    """Yield (type, image) for every second-order tile of ``p`` that fits inside it.

    A second-order tile is centred four units away from the nearest
    second-order crosses.  Its type is the doubled tile whose content
    matches the unit tiles at spacing two around the centre, and its image
    is the 3x3 array of doubled tiles centred at those positions.
    """
    try:
        rx, ry = hierarchy_residues(p, 1)[1]
    except HierarchyError as exc:
        raise DerivationError(f"patch at {p.origin}: {exc}") from None
    ax, ay = p.parity_anchor
    for x, y in p.positions():
        if (x - ax) % 4 != (rx + 2) % 4 or (y - ay) % 4 != (ry + 2) % 4:
            continue
        coarse = _unit_block(p, x, y, step=2)
        if coarse is None:
            continue
        image = []
        for dy in (-1, 0, 1):
            row = []
            for dx in (-1, 0, 1):
                b = _unit_block(p, x + 2 * dx, y + 2 * dy)
                if b is None:
                    break
                row.append(tiles.find(b))
            else:
                image.append(tuple(row))
                continue
            break
        if len(image) != 3:
            continue
        yield tiles.find(coarse), tuple(image), (x, y)


def derive_overlapping_rule(ensemble: Iterable[Patch], tiles: DoubledCatalog) -> OverlapRule:
    images: dict[int, Block] = {}
    for p in ensemble:
        for t, image, where in level_one_samples(p, tiles):
            if t is None:
                raise CoverageError(f"second-order tile at {where} is not a known doubled tile")
            if any(v is None for row in image for v in row):
                raise CoverageError(f"image at {where} contains an unknown doubled tile")
            if t in images and images[t] != image:
                raise AmbiguityError(f"doubled tile {t} has two different images")
            images[t] = image
    missing = [i for i in range(len(tiles)) if i not in images]
    if missing:
        raise CoverageError(f"no second-order sample for doubled tiles {missing}")
    return OverlapRule(tiles, tuple(images[i] for i in range(len(tiles))))


def to_normal_rule(r: OverlapRule) -> NormalRule:
    """Keep the upper-right 2x2 of each overlapping image."""
    if not isinstance(r, OverlapRule):
        raise TypeError("to_normal_rule expects an overlapping rule")
    table = tuple(tuple(tuple(img[dy][1:]) for dy in (1, 2)) for img in r.table)
    return NormalRule(r.tiles, table)


@dataclass
class Derivation:
    catalog: Catalog
    tiles: DoubledCatalog
    overlap: OverlapRule
    normal: NormalRule
    ensemble: list[Patch]
    seeds: list[int]
    rejected: list[int] = field(default_factory=list)


def build_ensemble(size: int, margin: int, seeds: Iterable[int], catalog: Catalog | None = None) -> list[Patch]:
    return [generate_patch(size, size, margin, s, catalog=catalog) for s in seeds]


def derive_rules(
    *,
    size: int = 64,
    margin: int = 8,
    seed: int = 0,
    start: int = 4,
    max_patches: int = 256,
    catalog: Catalog | None = None,
) -> Derivation:
    """Grow an ensemble of generated patches until the substitution is determined.

    Patches whose crosses do not nest into one hierarchy (a misaligned
    fault line runs through them) are set aside.  The ensemble doubles until
    two consecutive rounds give the same doubled tiles and every doubled
    tile has been seen at second order.
    """
    catalog = catalog or default_catalog()
    patches: list[Patch] = []
    used: list[int] = []
    rejected: list[int] = []
    previous = None
    target = start
    next_seed = seed
    while True:
        while len(patches) < target:
            p = generate_patch(size, size, margin, next_seed, catalog=catalog)
            if consistent_hierarchy(p):
                patches.append(p)
                used.append(next_seed)
            else:
                rejected.append(next_seed)
            next_seed += 1
            if next_seed - seed > 2 * max_patches:
                raise InstabilityError("too many generated patches are crossed by fault lines")
        tiles = derive_doubled_tiles(patches, catalog)
        keys = [t.content for t in tiles.tiles]
        if keys == previous:
            try:
                overlap = derive_overlapping_rule(patches, tiles)
            except CoverageError as exc:
                log.info("ensemble of %d patches: %s", len(patches), exc)
            else:
                return Derivation(catalog, tiles, overlap, to_normal_rule(overlap), patches, used, rejected)
        if target * 2 > max_patches:
            raise InstabilityError(f"no stable substitution from {target} patches of size {size}")
        previous = keys
        target *= 2


# ---------------------------------------------------------------------------
# doubled patches


@dataclass(frozen=True)
class DoubledPatch:
    """Doubled tile ids on the lattice of doubled positions, rows south to north.

    The doubled tile at lattice position ``q`` is centred on unit position
    ``2q`` relative to the cross sites.
    """

    origin: tuple[int, int]
    rows: tuple[tuple[int, ...], ...]

    @property
    def width(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    @property
    def height(self) -> int:
        return len(self.rows)

    def __contains__(self, q) -> bool:
        i, j = q[0] - self.origin[0], q[1] - self.origin[1]
        return 0 <= i < self.width and 0 <= j < self.height

    def at(self, qx: int, qy: int) -> int:
        return self.rows[qy - self.origin[1]][qx - self.origin[0]]

    def positions(self):
        for j in range(self.height):
            for i in range(self.width):
                yield self.origin[0] + i, self.origin[1] + j

    def crop(self, qx: int, qy: int, width: int, height: int) -> "DoubledPatch":
        i, j = qx - self.origin[0], qy - self.origin[1]
        rows = tuple(r[i : i + width] for r in self.rows[j : j + height])
        return DoubledPatch((qx, qy), rows)

    def centre_crop(self, size: int) -> "DoubledPatch":
        if self.width <= size and self.height <= size:
            return self
        w, h = min(size, self.width), min(size, self.height)
        i, j = (self.width - w) // 2, (self.height - h) // 2
        return self.crop(self.origin[0] + i, self.origin[1] + j, w, h)


def to_doubled_patch(p: Patch, tiles: DoubledCatalog) -> DoubledPatch:
    ax, ay = p.parity_anchor
    sites = [(x, y) for x, y in _doubled_sites(p) if _unit_block(p, x, y) is not None]
    if not sites:
        raise ValueError("patch too small to hold a doubled tile")
    qs = {((x - ax + 1) // 2, (y - ay + 1) // 2): (x, y) for x, y in sites}
    xs = sorted({q[0] for q in qs})
    ys = sorted({q[1] for q in qs})
    rows = []
    for qy in ys:
        row = []
        for qx in xs:
            b = _unit_block(p, *qs[(qx, qy)])
            i = tiles.find(b)
            if i is None:
                raise DerivationError(f"block at {qs[(qx, qy)]} is not a doubled tile")
            row.append(i)
        rows.append(tuple(row))
    return DoubledPatch((xs[0], ys[0]), tuple(rows))


def to_unit_patch(dp: DoubledPatch, tiles: DoubledCatalog, parity_anchor=(1, 1)) -> Patch:
    """Spread the doubled tiles back onto unit positions, checking that the overlaps agree."""
    ax, ay = parity_anchor
    cells: dict[tuple[int, int], OrientedTile] = {}
    for qx, qy in dp.positions():
        cx, cy = 2 * qx + ax - 1, 2 * qy + ay - 1
        t = tiles[dp.at(qx, qy)]
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                pos = (cx + dx, cy + dy)
                u = t.cell(dx, dy)
                if cells.setdefault(pos, u) != u:
                    raise ValueError(f"doubled tiles disagree at unit position {pos}")
    xs = [x for x, _ in cells]
    ys = [y for _, y in cells]
    x0, y0 = min(xs), min(ys)
    rows = tuple(tuple(cells[(x, y)] for x in range(x0, max(xs) + 1)) for y in range(y0, max(ys) + 1))
    return Patch((x0, y0), rows, parity_anchor)


def doubled_patch_legal(dp: DoubledPatch, tiles: DoubledCatalog) -> bool:
    try:
        return legal(to_unit_patch(dp, tiles), tiles.catalog)
    except ValueError:
        return False


def substitute_patch(n: NormalRule, dp: DoubledPatch, m: int = 1) -> DoubledPatch:
    """Apply the normal rule ``m`` times.

    The tile at ``q`` becomes the 2x2 block whose upper-right cell is ``2q``.
    """
    for _ in range(m):
        rows = []
        for j in range(dp.height):
            lower, upper = [], []
            for i in range(dp.width):
                img = n.table[dp.rows[j][i]]
                lower.extend(img[0])
                upper.extend(img[1])
            rows.append(tuple(lower))
            rows.append(tuple(upper))
        dp = DoubledPatch((2 * dp.origin[0] - 1, 2 * dp.origin[1] - 1), tuple(rows))
    return dp


def substitute_overlapping(r: OverlapRule, placed: dict[tuple[int, int], int]) -> dict[tuple[int, int], int]:
    """Apply the overlapping rule once to a partial map ``q -> id``; raises if images clash."""
    out: dict[tuple[int, int], int] = {}
    for (qx, qy), t in placed.items():
        img = r.table[t]
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                pos = (2 * qx + dx, 2 * qy + dy)
                v = img[dy + 1][dx + 1]
                if out.setdefault(pos, v) != v:
                    raise AmbiguityError(f"overlapping images disagree at {pos}")
    return out


def overlapping_power(r: OverlapRule, t: int, m: int) -> dict[tuple[int, int], int]:
    """sigma^m of a single doubled tile placed at the origin, as ``q -> id``."""
    placed = {(0, 0): t}
    for _ in range(m):
        placed = substitute_overlapping(r, placed)
    return placed


# ---------------------------------------------------------------------------
# adjacency and checks


@dataclass
class AdjacencyTables:
    horizontal: frozenset  # (west, east)
    vertical: frozenset  # (south, north)
    corners: frozenset  # (sw, se, nw, ne)
    neighbourhoods: frozenset  # 3x3 blocks of ids, [dy][dx]
    rounds: int = 0


def _collect(dp: DoubledPatch, h: set, v: set, c: set, nb: set) -> None:
    for qx, qy in dp.positions():
        a = dp.at(qx, qy)
        e = (qx + 1, qy) in dp
        u = (qx, qy + 1) in dp
        if e:
            h.add((a, dp.at(qx + 1, qy)))
        if u:
            v.add((a, dp.at(qx, qy + 1)))
        if e and u:
            c.add((a, dp.at(qx + 1, qy), dp.at(qx, qy + 1), dp.at(qx + 1, qy + 1)))
        if all((qx + dx, qy + dy) in dp for dx in (-1, 1) for dy in (-1, 1)):
            nb.add(tuple(tuple(dp.at(qx + dx, qy + dy) for dx in (-1, 0, 1)) for dy in (-1, 0, 1)))


def observed_tables(patches: Iterable[DoubledPatch]) -> AdjacencyTables:
    """Tables of exactly what occurs in ``patches``, with no substitution."""
    h: set = set()
    v: set = set()
    c: set = set()
    nb: set = set()
    for dp in patches:
        _collect(dp, h, v, c, nb)
    return AdjacencyTables(frozenset(h), frozenset(v), frozenset(c), frozenset(nb), 0)


def adjacency_tables(
    n: NormalRule, seeds: Iterable[DoubledPatch], *, max_rounds: int = 8, crop: int = 40
) -> AdjacencyTables:
    """Legal neighbour pairs, corner quadruples and 3x3 neighbourhoods of doubled tiles.

    The seeds are substituted repeatedly (keeping a central ``crop`` window
    each time) and the tables accumulated until a full round adds nothing.
    """
    h: set = set()
    v: set = set()
    c: set = set()
    nb: set = set()
    current = list(seeds)
    for dp in current:
        _collect(dp, h, v, c, nb)
    for rounds in range(1, max_rounds + 1):
        before = (len(h), len(v), len(c), len(nb))
        current = [substitute_patch(n, dp).centre_crop(crop) for dp in current]
        for dp in current:
            _collect(dp, h, v, c, nb)
        if (len(h), len(v), len(c), len(nb)) == before:
            return AdjacencyTables(frozenset(h), frozenset(v), frozenset(c), frozenset(nb), rounds)
    raise InstabilityError(f"adjacency tables still growing after {max_rounds} substitutions")


@dataclass
class CheckResult:
    ok: bool
    violations: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def check_overlap_consistency(r: OverlapRule, adj: AdjacencyTables) -> CheckResult:
    """Images of neighbouring tiles must agree wherever they overlap."""
    bad = []
    for a, b in sorted(adj.horizontal):
        if any(r.table[a][dy][2] != r.table[b][dy][0] for dy in range(3)):
            bad.append(("horizontal", a, b))
    for a, b in sorted(adj.vertical):
        if r.table[a][2] != r.table[b][0]:
            bad.append(("vertical", a, b))
    for sw, se, nw, ne in sorted(adj.corners):
        vals = {r.table[sw][2][2], r.table[se][2][0], r.table[nw][0][2], r.table[ne][0][0]}
        if len(vals) != 1:
            bad.append(("corner", sw, se, nw, ne))
    return CheckResult(not bad, bad)


def check_border_forcing(n: NormalRule, r: OverlapRule, adj: AdjacencyTables) -> CheckResult:
    """Each normal image must arrive with the collar its overlapping image dictates.

    With the normal image of ``t`` in the upper-right corner of the
    overlapping image of ``t``, the cells of that overlapping image which
    the normal image does not cover (its west column and south row) are
    supplied in a substituted patch by the normal images of the west, south
    and south-west neighbours of ``t``.  For every legal neighbour the tiles
    it supplies must be the ones the overlapping image of ``t`` prescribes.

    The remaining neighbours of a normal image (to its east and north) lie
    outside the overlapping image.  How many tiles have a unique such
    neighbourhood is reported in ``detail`` but does not affect the verdict.
    """
    bad = []
    for w, t in sorted(adj.horizontal):
        # the west neighbour's image sits two doubled cells to the left
        if any(n.table[w][dy][1] != r.table[t][dy + 1][0] for dy in (0, 1)):
            bad.append(("west", w, t))
    for s, t in sorted(adj.vertical):
        if any(n.table[s][1][dx] != r.table[t][0][dx + 1] for dx in (0, 1)):
            bad.append(("south", s, t))
    for sw, _, _, t in sorted(adj.corners):
        if n.table[sw][1][1] != r.table[t][0][0]:
            bad.append(("south-west", sw, t))
    for t in range(len(n.table)):
        if (n.table[t][0], n.table[t][1]) != (r.table[t][1][1:], r.table[t][2][1:]):
            bad.append(("corner convention", t))
    # the twelve cells around the normal image of t, which occupies {-1, 0}^2
    ring_cells = [(px, py) for py in range(-2, 2) for px in range(-2, 2) if not (px in (-1, 0) and py in (-1, 0))]
    coronas: dict[int, set] = defaultdict(set)
    for block in adj.neighbourhoods:
        ring = []
        for px, py in ring_cells:
            ox, oy = (px + 1) // 2, (py + 1) // 2
            img = n.table[block[oy + 1][ox + 1]]
            ring.append(img[py - 2 * oy + 1][px - 2 * ox + 1])
        coronas[block[1][1]].add(tuple(ring))
    unique = sum(1 for t in coronas if len(coronas[t]) == 1)
    return CheckResult(not bad, bad, {"full_corona_unique": unique, "tiles_with_context": len(coronas)})


def check_covariance(r: OverlapRule) -> CheckResult:
    """The doubled tiles are closed under D4 and the overlapping rule commutes with it."""
    tiles = r.tiles
    bad = []
    for g in D4:
        for i in range(len(tiles)):
            j = tiles.transform(g, i)
            if j is None:
                bad.append(("not closed", str(g), i))
                continue
            want = _block_map(g, r.table[i], lambda k: tiles.transform(g, k))
            if r.table[j] != want:
                bad.append(("rule", str(g), i))
    return CheckResult(not bad, bad)


# ---------------------------------------------------------------------------
# substitution matrix


@dataclass(frozen=True)
class SubstitutionMatrix:
    matrix: tuple[tuple[int, ...], ...]  # matrix[i][j] = copies of tile i in the image of tile j
    column_sum: int
    primitive_power: int

    @property
    def size(self) -> int:
        return len(self.matrix)


def substitution_matrix(n: NormalRule) -> SubstitutionMatrix:
    k = len(n.table)
    m = [[0] * k for _ in range(k)]
    for j, img in enumerate(n.table):
        for row in img:
            for i in row:
                m[i][j] += 1
    sums = {sum(m[i][j] for i in range(k)) for j in range(k)}
    if sums != {4}:
        raise DerivationError(f"images do not all have four tiles: column sums {sorted(sums)}")
    # boolean powers; Wielandt's bound caps the exponent for a primitive matrix
    support = [{i for i in range(k) if m[i][j]} for j in range(k)]
    reach = [set(s) for s in support]
    bound = (k - 1) ** 2 + 1
    for power in range(1, bound + 1):
        if all(len(r) == k for r in reach):
            return SubstitutionMatrix(tuple(map(tuple, m)), 4, power)
        reach = [set().union(*(support[i] for i in r)) for r in reach]
    raise PrimitivityError("substitution matrix is not primitive")


# ---------------------------------------------------------------------------
# cache


def rule_cache_dict(d: Derivation, tileset_digest: str) -> dict:
    return {
        "schema_version": CACHE_SCHEMA_VERSION,
        "tileset_hash": tileset_digest,
        "doubled_tiles": [
            {"id": t.id, "content": [[u.name for u in row] for row in t.content]} for t in d.tiles.tiles
        ],
        "overlap_table": [[list(row) for row in img] for img in d.overlap.table],
        "normal_table": [[list(row) for row in img] for img in d.normal.table],
        "ensemble_seeds": d.seeds,
    }


def write_json_atomic(path: str | Path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_rule_cache(path: str | Path, d: Derivation, tileset_digest: str) -> None:
    write_json_atomic(path, rule_cache_dict(d, tileset_digest))


class StaleCacheError(DerivationError):
    pass


def load_rule_cache(path: str | Path, catalog: Catalog, tileset_digest: str) -> tuple[DoubledCatalog, OverlapRule]:
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != CACHE_SCHEMA_VERSION:
        raise StaleCacheError("rule cache has a different schema version")
    if data.get("tileset_hash") != tileset_digest:
        raise StaleCacheError("rule cache was derived from a different tile set")
    blocks = []
    for entry in data["doubled_tiles"]:
        blocks.append(tuple(tuple(catalog.by_name[name] for name in row) for row in entry["content"]))
    tiles = DoubledCatalog(blocks, catalog)
    if [t.content for t in tiles.tiles] != blocks:
        raise StaleCacheError("doubled tiles in the cache are not in canonical order")
    table = tuple(tuple(tuple(row) for row in img) for img in data["overlap_table"])
    return tiles, OverlapRule(tiles, table)
