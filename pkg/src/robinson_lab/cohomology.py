"""The cell complex of doubled tiles and the cohomology of the tiling space.

Every doubled tile is a square 2-cell.  Two edges (or corners) of tiles are
identified whenever the tiles can sit next to each other with those edges
(or corners) touching in a legal tiling.  The substitution induces a
cellular self-map of this complex, and the cohomology of the tiling space
is the direct limit of the cohomology of the complex under that map.

Orientations: horizontal edges point east, vertical edges point north, and
faces are counter-clockwise, so the boundary of a face is S + E - N - W.
Cochain maps are written as matrices acting on column vectors, with entry
``[i][j]`` the number of times cell ``j`` occurs in the image of cell ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .linalg import (
    AbelianGroup,
    DirectLimit,
    Matrix,
    char_poly,
    direct_limit,
    diagonal,
    integer_roots,
    inverse_unimodular,
    is_zero,
    kernel_basis,
    matmul,
    smith_normal_form,
    solve_integer,
    submatrix,
    transpose,
    zeros,
)
from .substitution import AdjacencyTables, CheckResult, NormalRule
from .tiles import CORNERS, SIDES


class BorderForcingError(RuntimeError):
    """The complex is only meaningful for a substitution that forces its border."""


class IllDefinedError(RuntimeError):
    """The substitution does not respect the identifications of the complex."""


# head and tail corner of each side under the orientation convention
_ENDS = {"N": ("NE", "NW"), "S": ("SE", "SW"), "E": ("NE", "SE"), "W": ("NW", "SW")}
_FACE_SIGN = {"S": 1, "E": 1, "N": -1, "W": -1}


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _classes(uf: _UnionFind, items) -> tuple[list[frozenset], dict]:
    groups: dict = {}
    for it in items:
        groups.setdefault(uf.find(it), set()).add(it)
    ordered = sorted((frozenset(g) for g in groups.values()), key=min)
    return ordered, {it: i for i, g in enumerate(ordered) for it in g}


@dataclass
class CellComplex:
    faces: int
    edges: list[frozenset]  # each a set of (tile, side)
    vertices: list[frozenset]  # each a set of (tile, corner)
    edge_of: dict
    vertex_of: dict
    boundary2: Matrix  # edges x faces
    boundary1: Matrix  # vertices x edges

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.faces, len(self.edges), len(self.vertices)

    @property
    def euler_characteristic(self) -> int:
        f, e, v = self.counts
        return v - e + f

    def coboundaries(self) -> tuple[Matrix, Matrix]:
        """(delta0: C^0 -> C^1, delta1: C^1 -> C^2)."""
        return transpose(self.boundary1, len(self.edges)), transpose(self.boundary2, self.faces)


def build_complex(n_faces: int, adj: AdjacencyTables, border_forcing: CheckResult) -> CellComplex:
    if not border_forcing:
        raise BorderForcingError("border forcing has not been verified for this substitution")
    edges = _UnionFind()
    verts = _UnionFind()
    for a, b in adj.horizontal:
        edges.union((a, "E"), (b, "W"))
        verts.union((a, "NE"), (b, "NW"))
        verts.union((a, "SE"), (b, "SW"))
    for a, b in adj.vertical:
        edges.union((a, "N"), (b, "S"))
        verts.union((a, "NE"), (b, "SE"))
        verts.union((a, "NW"), (b, "SW"))
    for sw, se, nw, ne in adj.corners:
        verts.union((sw, "NE"), (se, "NW"))
        verts.union((sw, "NE"), (nw, "SE"))
        verts.union((sw, "NE"), (ne, "SW"))
    edge_items = [(t, s) for t in range(n_faces) for s in SIDES]
    vert_items = [(t, c) for t in range(n_faces) for c in CORNERS]
    edge_classes, edge_of = _classes(edges, edge_items)
    vert_classes, vertex_of = _classes(verts, vert_items)
    for cls in edge_classes:
        kinds = {s in "NS" for _, s in cls}
        if len(kinds) != 1:
            raise IllDefinedError("an edge class mixes horizontal and vertical edges")
    d2 = zeros(len(edge_classes), n_faces)
    for t in range(n_faces):
        for s in SIDES:
            d2[edge_of[(t, s)]][t] += _FACE_SIGN[s]
    d1 = zeros(len(vert_classes), len(edge_classes))
    for e, cls in enumerate(edge_classes):
        ends = {(vertex_of[(t, _ENDS[s][0])], vertex_of[(t, _ENDS[s][1])]) for t, s in cls}
        if len(ends) != 1:
            raise IllDefinedError(f"edge class {e} has inconsistent endpoints")
        head, tail = ends.pop()
        d1[head][e] += 1
        d1[tail][e] -= 1
    if not is_zero(matmul(d1, d2)):
        raise ArithmeticError("boundary of a boundary is not zero")
    return CellComplex(n_faces, edge_classes, vert_classes, edge_of, vertex_of, d2, d1)


def approximant_cohomology(c: CellComplex) -> tuple[AbelianGroup, AbelianGroup, AbelianGroup]:
    return tuple(_presentation(c, k, None)[0] for k in range(3))


# ---------------------------------------------------------------------------
# induced maps


@dataclass
class InducedMaps:
    a0: Matrix
    a1: Matrix
    a2: Matrix

    def __getitem__(self, k: int) -> Matrix:
        return (self.a0, self.a1, self.a2)[k]


def _cell_map(classes, lookup, image_of) -> Matrix:
    m = zeros(len(classes), len(classes))
    for i, cls in enumerate(classes):
        rows = set()
        for member in cls:
            row = [0] * len(classes)
            for target in image_of(member):
                row[lookup[target]] += 1
            rows.add(tuple(row))
        if len(rows) != 1:
            raise IllDefinedError(f"cell {sorted(cls)[0]} has images that depend on the representative")
        m[i] = list(rows.pop())
    return m


def induced_maps(n: NormalRule, c: CellComplex) -> InducedMaps:
    """Cochain maps of the substitution on the complex, checked against the coboundaries."""

    def quad(t):
        (ll, lr), (ul, ur) = n.table[t]
        return ll, lr, ul, ur

    def edge_image(item):
        t, s = item
        ll, lr, ul, ur = quad(t)
        return {"S": [(ll, "S"), (lr, "S")], "N": [(ul, "N"), (ur, "N")],
                "W": [(ll, "W"), (ul, "W")], "E": [(lr, "E"), (ur, "E")]}[s]

    def vertex_image(item):
        t, k = item
        ll, lr, ul, ur = quad(t)
        return [{"SW": (ll, "SW"), "SE": (lr, "SE"), "NW": (ul, "NW"), "NE": (ur, "NE")}[k]]

    a2 = zeros(c.faces, c.faces)
    for t in range(c.faces):
        for cell in quad(t):
            a2[t][cell] += 1
    a1 = _cell_map(c.edges, c.edge_of, edge_image)
    a0 = _cell_map(c.vertices, c.vertex_of, vertex_image)
    d0, d1 = c.coboundaries()
    if matmul(d0, a0) != matmul(a1, d0) or matmul(d1, a1) != matmul(a2, d1):
        raise IllDefinedError("induced maps do not commute with the coboundaries")
    return InducedMaps(a0, a1, a2)


# ---------------------------------------------------------------------------
# cohomology with the induced action


def _presentation(c: CellComplex, k: int, action: Matrix | None):
    """H^k of the complex as an AbelianGroup, plus the induced action on its generators."""
    f, e, v = c.counts
    dims = (v, e, f)
    d0, d1 = c.coboundaries()
    nxt = (d0, d1, None)[k]
    prev = (None, d0, d1)[k]
    n = dims[k]
    cycles = kernel_basis(nxt, n) if nxt is not None else [[int(i == j) for j in range(n)] for i in range(n)]
    z = len(cycles[0]) if cycles and cycles[0] else 0
    if z == 0:
        return AbelianGroup(0), []
    if prev is None:
        rel = [[] for _ in range(z)]
        width = 0
    else:
        width = len(prev[0])
        cols = []
        for j in range(width):
            x = solve_integer(cycles, [row[j] for row in prev])
            if x is None:
                raise ArithmeticError("a coboundary is not a cocycle")
            cols.append(x)
        rel = transpose(cols, z) if cols else [[] for _ in range(z)]
    if width:
        u, d, _ = smith_normal_form(rel, width)
        diag = diagonal(d)
    else:
        u = [[int(i == j) for j in range(z)] for i in range(z)]
        diag = []
    rank = sum(1 for x in diag if x)
    orders = [diag[i] if i < rank else 0 for i in range(z)]
    tors = [i for i in range(z) if orders[i] > 1]
    free = [i for i in range(z) if orders[i] == 0]
    group = AbelianGroup(len(free), tuple(orders[i] for i in tors))
    if action is None:
        return group, []
    # action in cocycle coordinates, then in Smith coordinates
    ak = matmul(action, cycles)
    cols = []
    for j in range(z):
        x = solve_integer(cycles, [row[j] for row in ak])
        if x is None:
            raise IllDefinedError("the action does not preserve cocycles")
        cols.append(x)
    tilde = transpose(cols)
    ay = matmul(matmul(u, tilde), inverse_unimodular(u))
    for j in range(rank):
        for i in range(z):
            val = ay[i][j] * orders[j]
            if (orders[i] == 0 and val) or (orders[i] and val % orders[i]):
                raise IllDefinedError("the action does not preserve coboundaries")
    keep = tors + free
    return group, submatrix(ay, keep, keep)


@dataclass
class DegreeResult:
    degree: int
    approximant: AbelianGroup
    action: Matrix
    limit: DirectLimit
    char_poly: list[int]
    eigenvalues: dict[int, int]  # integer eigenvalues of the action on the free part

    @property
    def rational_rank(self) -> int:
        return self.approximant.free_rank


@dataclass
class CohomologyResult:
    degrees: list[DegreeResult] = field(default_factory=list)

    def __getitem__(self, k: int) -> DegreeResult:
        return self.degrees[k]

    def summary(self) -> dict:
        return {f"H{d.degree}": str(d.limit) for d in self.degrees}


def hull_cohomology(c: CellComplex, maps: InducedMaps) -> CohomologyResult:
    out = CohomologyResult()
    for k in range(3):
        group, action = _presentation(c, k, maps[k])
        limit = direct_limit(group, action) if group.generators else DirectLimit(())
        t = len(group.torsion)
        free_part = submatrix(action, range(t, group.generators), range(t, group.generators)) if action else []
        cp = char_poly(free_part)
        roots, _ = integer_roots(cp)
        out.degrees.append(DegreeResult(k, group, action, limit, cp, roots))
    return out
