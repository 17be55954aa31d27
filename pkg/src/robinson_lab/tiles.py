"""Decorated square tiles, their edge signatures and the dihedral action.

A tile is a unit square whose four edges carry *line marks*.  Each mark has
an offset along the edge (-1, 0 or +1 in quarter-edge units), a colour
(``principal`` for the central lines, ``secondary`` for the lines drawn off
centre) and an arrow saying whether the line leaves the tile through that
edge (``out``) or enters it (``in``).

Offsets are measured counter-clockwise along the boundary, so each edge has
its own positive direction:

    N: positive towards the west      E: positive towards the north
    S: positive towards the east      W: positive towards the south

With this convention a quarter turn only relabels the sides and leaves every
offset alone, while a mirror image negates every offset.  Two abutting edges
run in opposite directions, so the offsets on one side are the negatives of
the offsets on the other.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SIDES = ("N", "E", "S", "W")
OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}
CORNERS = ("NE", "NW", "SW", "SE")

PRINCIPAL = "principal"
SECONDARY = "secondary"
COLORS = (PRINCIPAL, SECONDARY)
OUT = "out"
IN = "in"
ARROWS = (OUT, IN)

# A counter-clockwise quarter turn carries the content of each side to the
# side listed here.
_ROTATE_SIDE = {"N": "W", "E": "N", "S": "E", "W": "S"}
_REFLECT_SIDE = {"N": "N", "S": "S", "E": "W", "W": "E"}


class TileSetError(ValueError):
    """Raised when a tile-set description is malformed."""


class TileParseError(TileSetError):
    """The tile-set file could not be read as JSON."""


class TileValidationError(TileSetError):
    """The tile-set file is well formed JSON but violates the schema."""


@dataclass(frozen=True, order=True)
class LineMark:
    offset: int
    color: str
    arrow: str

    def __post_init__(self) -> None:
        if self.offset not in (-1, 0, 1):
            raise TileValidationError(f"offset must be -1, 0 or 1, got {self.offset!r}")
        if self.color not in COLORS:
            raise TileValidationError(f"unknown colour {self.color!r}")
        if self.arrow not in ARROWS:
            raise TileValidationError(f"unknown arrow {self.arrow!r}")

    def reflected(self) -> "LineMark":
        return LineMark(-self.offset, self.color, self.arrow)

    def flipped(self) -> "LineMark":
        return LineMark(self.offset, self.color, IN if self.arrow == OUT else OUT)


@dataclass(frozen=True)
class EdgeSignature:
    """The marks carried by one edge, sorted by offset then colour."""

    marks: tuple[LineMark, ...]

    def __post_init__(self) -> None:
        marks = tuple(sorted(self.marks))
        keys = [(m.offset, m.color) for m in marks]
        if len(set(keys)) != len(keys):
            raise TileValidationError(f"duplicate mark on an edge: {keys}")
        object.__setattr__(self, "marks", marks)

    @classmethod
    def of(cls, *marks: tuple[int, str, str]) -> "EdgeSignature":
        return cls(tuple(LineMark(*m) for m in marks))

    def reflected(self) -> "EdgeSignature":
        """Negate every offset.  This is also how an edge looks from across the seam."""
        return EdgeSignature(tuple(m.reflected() for m in self.marks))

    def lines(self) -> frozenset[tuple[int, str]]:
        return frozenset((m.offset, m.color) for m in self.marks)

    def has(self, color: str, arrow: str | None = None) -> bool:
        return any(m.color == color and (arrow is None or m.arrow == arrow) for m in self.marks)

    def __str__(self) -> str:
        return ",".join(f"{m.offset:+d}{m.color[0]}{'>' if m.arrow == OUT else '<'}" for m in self.marks)


def edges_match(a: EdgeSignature, b: EdgeSignature) -> bool:
    """Do two abutting edges fit together?

    ``b`` must already be expressed in the frame of ``a`` (offsets mirrored
    by the caller, see :func:`abut`).  The lines must continue across the
    seam and every line must leave exactly one of the two tiles.
    """
    if len(a.marks) != len(b.marks):
        return False
    for ma, mb in zip(a.marks, b.marks):
        if (ma.offset, ma.color) != (mb.offset, mb.color):
            return False
        if ma.arrow == mb.arrow:
            return False
    return True


def abut(left: EdgeSignature, right: EdgeSignature) -> bool:
    """Match two edges as they appear on their own tiles (e.g. E of one tile, W of the next)."""
    return edges_match(left, right.reflected())


@dataclass(frozen=True, order=True)
class D4Element:
    """``rotation`` counter-clockwise quarter turns applied after an optional mirror x -> -x."""

    rotation: int = 0
    reflected: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", self.rotation % 4)

    def __mul__(self, other: "D4Element") -> "D4Element":
        # (self * other) acts as "other first, then self".
        sign = -1 if self.reflected else 1
        return D4Element(self.rotation + sign * other.rotation, self.reflected != other.reflected)

    def inverse(self) -> "D4Element":
        if self.reflected:
            return self
        return D4Element(-self.rotation, False)

    def side(self, s: str) -> str:
        if self.reflected:
            s = _REFLECT_SIDE[s]
        for _ in range(self.rotation):
            s = _ROTATE_SIDE[s]
        return s

    def vector(self, dx: int, dy: int) -> tuple[int, int]:
        if self.reflected:
            dx = -dx
        for _ in range(self.rotation):
            dx, dy = -dy, dx
        return dx, dy

    def act(self, edges: Mapping[str, EdgeSignature]) -> dict[str, EdgeSignature]:
        out = {}
        for s, sig in edges.items():
            out[self.side(s)] = sig.reflected() if self.reflected else sig
        return out

    def __str__(self) -> str:
        return f"r{self.rotation}{'m' if self.reflected else ''}"

    @classmethod
    def parse(cls, text: str) -> "D4Element":
        if not text.startswith("r"):
            raise ValueError(f"bad symmetry {text!r}")
        return cls(int(text[1]), text.endswith("m"))


IDENTITY = D4Element()
ROT90 = D4Element(1)
MIRROR = D4Element(0, True)
D4 = tuple(D4Element(r, f) for f in (False, True) for r in range(4))


@dataclass(frozen=True)
class Prototile:
    id: str
    edges: tuple[EdgeSignature, EdgeSignature, EdgeSignature, EdgeSignature]
    is_cross: bool = False

    def edge(self, side: str) -> EdgeSignature:
        return self.edges[SIDES.index(side)]

    def edge_map(self) -> dict[str, EdgeSignature]:
        return dict(zip(SIDES, self.edges))

    @cached_property
    def stabilizer(self) -> tuple[D4Element, ...]:
        mine = self.edge_map()
        return tuple(g for g in D4 if g.act(mine) == mine)


@dataclass(frozen=True, order=True)
class OrientedTile:
    """A prototile in one of its distinct orientations.

    Build these with :func:`orient`, which picks the canonical symmetry
    among all those giving the same placement.
    """

    prototile_id: str
    symmetry: D4Element
    prototile: Prototile = field(compare=False, repr=False)

    @cached_property
    def edges(self) -> dict[str, EdgeSignature]:
        return self.symmetry.act(self.prototile.edge_map())

    def edge(self, side: str) -> EdgeSignature:
        return self.edges[side]

    @property
    def is_cross(self) -> bool:
        return self.prototile.is_cross

    @property
    def name(self) -> str:
        return f"{self.prototile_id}/{self.symmetry}"

    def __str__(self) -> str:
        return self.name


def orient(proto: Prototile, g: D4Element) -> OrientedTile:
    coset = [g * s for s in proto.stabilizer]
    return OrientedTile(proto.id, min(coset), proto)


def apply_symmetry(g: D4Element, t: OrientedTile) -> OrientedTile:
    return orient(t.prototile, g * t.symmetry)


def oriented_orbit(tiles: Iterable[Prototile]) -> list[OrientedTile]:
    """Every distinct placement of every prototile, sorted canonically."""
    seen = {orient(p, g) for p in tiles for g in D4}
    return sorted(seen)


# ---------------------------------------------------------------------------
# loading


def _parse_edge(raw, where: str) -> EdgeSignature:
    if not isinstance(raw, list) or not raw:
        raise TileValidationError(f"{where}: an edge needs a non-empty list of marks")
    marks = []
    for m in raw:
        try:
            marks.append(LineMark(int(m["offset"]), m["color"], m["arrow"]))
        except (KeyError, TypeError) as exc:
            raise TileValidationError(f"{where}: bad mark {m!r}") from exc
        except TileValidationError as exc:
            raise TileValidationError(f"{where}: {exc}") from exc
    try:
        return EdgeSignature(tuple(marks))
    except TileValidationError as exc:
        raise TileValidationError(f"{where}: {exc}") from exc


def parse_tileset(data: Mapping) -> list[Prototile]:
    protos = data.get("prototiles") if isinstance(data, Mapping) else None
    if not isinstance(protos, list) or not protos:
        raise TileValidationError("expected a non-empty 'prototiles' list")
    out = []
    for raw in protos:
        pid = raw.get("id")
        if not isinstance(pid, str) or not pid:
            raise TileValidationError(f"prototile without an id: {raw!r}")
        edges = raw.get("edges")
        if not isinstance(edges, Mapping) or set(edges) != set(SIDES):
            raise TileValidationError(f"{pid}: edges must give exactly N, E, S and W")
        sigs = tuple(_parse_edge(edges[s], f"{pid}.{s}") for s in SIDES)
        out.append(Prototile(pid, sigs, bool(raw.get("is_cross", False))))
    ids = [p.id for p in out]
    if len(set(ids)) != len(ids):
        raise TileValidationError("duplicate prototile ids")
    if sum(p.is_cross for p in out) != 1:
        raise TileValidationError("exactly one prototile must be marked as the cross")
    return out


def default_tileset_path() -> Path:
    return Path(str(resources.files("robinson_lab") / "data" / "robinson.tiles.json"))


def load_tileset(path: str | Path | None = None) -> list[Prototile]:
    path = Path(path) if path is not None else default_tileset_path()
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TileParseError(f"{path}: {exc}") from exc
    return parse_tileset(data)


def tileset_hash(path: str | Path | None = None) -> str:
    path = Path(path) if path is not None else default_tileset_path()
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tileset_to_json(tiles: Sequence[Prototile]) -> dict:
    return {
        "prototiles": [
            {
                "id": p.id,
                "is_cross": p.is_cross,
                "edges": {
                    s: [{"offset": m.offset, "color": m.color, "arrow": m.arrow} for m in p.edge(s).marks]
                    for s in SIDES
                },
            }
            for p in tiles
        ]
    }


class Catalog:
    """The oriented tiles of a tile set together with their adjacency tables.

    Tiles are numbered 0..n-1 in canonical order; ``right[i]`` is a bitmask
    of the tiles that may sit east of tile ``i`` and ``up[i]`` those that may
    sit north of it.
    """

    def __init__(self, prototiles: Sequence[Prototile]):
        self.prototiles = list(prototiles)
        self.tiles = oriented_orbit(self.prototiles)
        self.index = {t: i for i, t in enumerate(self.tiles)}
        self.by_name = {t.name: t for t in self.tiles}
        n = len(self.tiles)
        self.right = [0] * n
        self.left = [0] * n
        self.up = [0] * n
        self.down = [0] * n
        for i, a in enumerate(self.tiles):
            for j, b in enumerate(self.tiles):
                if abut(a.edge("E"), b.edge("W")):
                    self.right[i] |= 1 << j
                    self.left[j] |= 1 << i
                if abut(a.edge("N"), b.edge("S")):
                    self.up[i] |= 1 << j
                    self.down[j] |= 1 << i
        self.cross_mask = sum(1 << i for i, t in enumerate(self.tiles) if t.is_cross)
        self.all_mask = (1 << n) - 1

    def __len__(self) -> int:
        return len(self.tiles)

    def fits_right(self, a: OrientedTile, b: OrientedTile) -> bool:
        return bool(self.right[self.index[a]] >> self.index[b] & 1)

    def fits_up(self, a: OrientedTile, b: OrientedTile) -> bool:
        return bool(self.up[self.index[a]] >> self.index[b] & 1)

    def transform(self, g: D4Element, t: OrientedTile) -> OrientedTile:
        return self.tiles[self.index[apply_symmetry(g, t)]]


_default_catalog: Catalog | None = None


def default_catalog() -> Catalog:
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = Catalog(load_tileset())
    return _default_catalog
