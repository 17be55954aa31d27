"""Zeta functions of the substitution and their periodic points.

A zeta function here is a finite product of factors ``(1 - c z)^e`` with
integer ``c`` and ``e``, optionally times a ratio of leftover polynomials
whose roots are not integers.  Its logarithmic derivative gives the number
``a_m`` of points of period ``m``.  The same numbers are counted directly
from the substitution and compared.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import sympy

from .linalg import Matrix, char_poly, integer_roots
from .substitution import AdjacencyTables, NormalRule, OverlapRule, overlapping_power
from .tiles import OUT, PRINCIPAL, SECONDARY, OrientedTile


class FactorizationError(ValueError):
    """A zeta function is not a product of the expected solenoid factors."""


def _poly_mul(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return tuple(out)


@dataclass(frozen=True)
class ZetaFunction:
    """``prod (1 - c z)^exponents[c] * numerator(z) / denominator(z)``.

    The leftover polynomials have constant term 1 and coefficients listed
    from the constant term up.
    """

    exponents: tuple[tuple[int, int], ...]
    numerator: tuple[int, ...] = (1,)
    denominator: tuple[int, ...] = (1,)

    @classmethod
    def from_factors(cls, numerator: Iterable[int] = (), denominator: Iterable[int] = ()) -> "ZetaFunction":
        """Build from the values ``c`` of the factors ``(1 - c z)`` above and below the line."""
        ex: Counter = Counter()
        for c in numerator:
            ex[c] += 1
        for c in denominator:
            ex[c] -= 1
        return cls._make(ex)

    @classmethod
    def _make(cls, ex, num=(1,), den=(1,)) -> "ZetaFunction":
        items = tuple(sorted((c, e) for c, e in ex.items() if e and c))
        return cls(items, tuple(num), tuple(den))

    def __mul__(self, other: "ZetaFunction") -> "ZetaFunction":
        ex = Counter(dict(self.exponents))
        ex.update(dict(other.exponents))
        return ZetaFunction._make(
            ex, _poly_mul(self.numerator, other.numerator), _poly_mul(self.denominator, other.denominator)
        )

    def __pow__(self, k: int) -> "ZetaFunction":
        out = ZetaFunction(())
        for _ in range(k):
            out = out * self
        return out

    @property
    def exponent(self) -> dict[int, int]:
        return dict(self.exponents)

    def as_expr(self, z: sympy.Symbol | None = None):
        z = z or sympy.Symbol("z")
        expr = sympy.Integer(1)
        for c, e in self.exponents:
            expr *= (1 - c * z) ** e
        expr *= sum(a * z**i for i, a in enumerate(self.numerator))
        expr /= sum(a * z**i for i, a in enumerate(self.denominator))
        return expr

    def __str__(self) -> str:
        def factor(c: int, e: int) -> str:
            term = "z" if abs(c) == 1 else f"{abs(c)}z"
            base = f"(1{'-' if c > 0 else '+'}{term})"
            return f"{base}^{e}" if e > 1 else base

        top = [factor(c, e) for c, e in self.exponents if e > 0]
        bot = [factor(c, -e) for c, e in self.exponents if e < 0]
        return f"{''.join(top) or '1'} / {''.join(bot) or '1'}"


def det_one_minus_z(a: Matrix) -> ZetaFunction:
    """det(1 - z a) as a ZetaFunction (zero eigenvalues contribute nothing)."""
    roots, rest = integer_roots(char_poly(a))
    ex = Counter({c: m for c, m in roots.items() if c})
    return ZetaFunction._make(ex, tuple(rest))


def zeta_from_action(
    spectra: Sequence[Iterable[int]] | None = None,
    matrices: Sequence[Matrix] | None = None,
) -> ZetaFunction:
    """Alternating product of det(1 - z A_k) over degrees k = 0 .. d.

    ``spectra`` (eigenvalue multisets) or ``matrices`` are given by degree.
    Degrees with the same parity as the top degree go in the denominator,
    the others in the numerator.
    """
    if (spectra is None) == (matrices is None):
        raise ValueError("give exactly one of spectra or matrices")
    if spectra is not None:
        factors = [ZetaFunction.from_factors(numerator=[c for c in s if c]) for s in spectra]
    else:
        factors = [det_one_minus_z(a) for a in matrices]
    top = len(factors) - 1
    out = ZetaFunction(())
    for k, f in enumerate(factors):
        if (top - k) % 2 == 1:
            out = out * f
        else:
            out = out * _invert(f)
    return out


def _invert(f: ZetaFunction) -> ZetaFunction:
    return ZetaFunction(tuple((c, -e) for c, e in f.exponents), f.denominator, f.numerator)


def _power_sums(poly: Sequence[int], count: int) -> list[int]:
    """s_1..s_count for prod(1 - alpha z) = poly, via z P'/P = -sum s_m z^m."""
    p = list(poly) + [0] * (count + 1)
    deriv = [i * p[i] for i in range(1, len(p))]  # P'(z)
    num = [0] + deriv  # z P'(z)
    q = [0] * (count + 1)  # q = z P' / P, computed by long division (P(0) = 1)
    for m in range(count + 1):
        acc = num[m] if m < len(num) else 0
        acc -= sum(q[i] * p[m - i] for i in range(m))
        q[m] = acc
    return [-q[m] for m in range(1, count + 1)]


@dataclass(frozen=True)
class ZetaSeries:
    counts: tuple[int, ...]  # a_1, a_2, ...

    def __getitem__(self, m: int) -> int:
        return self.counts[m - 1]


def zeta_series(zeta: ZetaFunction, max_power: int) -> ZetaSeries:
    """Periodic point counts a_1..a_max_power (checked to be non-negative)."""
    out = []
    for m in range(1, max_power + 1):
        out.append(-sum(e * c**m for c, e in zeta.exponents))
    for poly, sign in ((zeta.numerator, -1), (zeta.denominator, 1)):
        if len(poly) > 1:
            sums = _power_sums(poly, max_power)
            out = [a + sign * s for a, s in zip(out, sums)]
    if any(a < 0 for a in out):
        raise ArithmeticError(f"negative periodic point count in {out}")
    return ZetaSeries(tuple(out))


def closed_form(zeta: ZetaFunction, m: sympy.Symbol | None = None):
    """a_m as a symbolic expression in m (only for fully factored zeta functions)."""
    if len(zeta.numerator) > 1 or len(zeta.denominator) > 1:
        raise FactorizationError("closed form needs a fully factored zeta function")
    m = m or sympy.Symbol("m", positive=True, integer=True)
    return sympy.simplify(sum(-e * sympy.Integer(c) ** m for c, e in zeta.exponents))


# ---------------------------------------------------------------------------
# solenoid factors


def plane_solenoid_zeta(base: int = 2) -> ZetaFunction:
    """Zeta function of the base-adic solenoid of dimension two."""
    return ZetaFunction.from_factors(numerator=[base, base], denominator=[1, base * base])


def line_solenoid_zeta(base: int = 2) -> ZetaFunction:
    return ZetaFunction.from_factors(numerator=[1], denominator=[base])


def point_zeta() -> ZetaFunction:
    return ZetaFunction.from_factors(denominator=[1])


@dataclass(frozen=True)
class SolenoidAccounting:
    plane: int
    line: int
    points: int

    def zeta(self, base: int = 2) -> ZetaFunction:
        return plane_solenoid_zeta(base) ** self.plane * line_solenoid_zeta(base) ** self.line * point_zeta() ** self.points

    def count(self, m: int, base: int = 2) -> int:
        q = base**m - 1
        return self.plane * q * q + self.line * q + self.points


def factor_zeta(zeta: ZetaFunction, base: int = 2) -> SolenoidAccounting:
    """Write ``zeta`` as a product of 2d solenoids, 1d solenoids and fixed points."""
    if len(zeta.numerator) > 1 or len(zeta.denominator) > 1:
        raise FactorizationError("zeta function has non-integer roots")
    ex = zeta.exponent
    if set(ex) - {1, base, base * base}:
        raise FactorizationError(f"unexpected factors {sorted(set(ex) - {1, base, base * base})}")
    plane = -ex.get(base * base, 0)
    line = 2 * plane - ex.get(base, 0)
    points = line - plane - ex.get(1, 0)
    if min(plane, line, points) < 0:
        raise FactorizationError(f"negative multiplicities {(plane, line, points)}")
    acc = SolenoidAccounting(plane, line, points)
    if acc.zeta(base) != zeta:
        raise FactorizationError("solenoid product does not reproduce the zeta function")
    return acc


# ---------------------------------------------------------------------------
# periodic points from the substitution


@dataclass
class PeriodicPoints:
    period: int
    fibres: dict[tuple[int, int], int]  # anchor -> number of points

    @property
    def total(self) -> int:
        return sum(self.fibres.values())


def periodic_anchors(m: int) -> list[tuple[int, int]]:
    """Index offsets at which a period-m tiling can repeat its central tile.

    Measuring positions in doubled-tile spacings, a tiling fixed by the m-th
    power of the substitution has the tile containing the origin centred at
    ``c = -j / (2**m - 1)`` for an integer vector ``j`` with |c| < 1/2; that
    tile reappears at index ``j`` inside its own m-th image.
    """
    h = 2 ** (m - 1) - 1
    return [(jx, jy) for jy in range(-h, h + 1) for jx in range(-h, h + 1)]


def enumerate_periodic_points(r: OverlapRule, m: int) -> PeriodicPoints:
    """Count the points of period ``m`` by looking for each tile inside its own m-th image."""
    q = 2**m - 1
    fibres = {}
    images = [overlapping_power(r, t, m) for t in range(len(r.table))]
    for j in periodic_anchors(m):
        # the centre -j/q must lie strictly inside the tile
        assert all(2 * abs(v) < q for v in j)
        fibres[j] = sum(1 for t, img in enumerate(images) if img.get(j) == t)
    return PeriodicPoints(m, fibres)


def fibre_accounting(points: PeriodicPoints, fixed: int) -> SolenoidAccounting:
    """Read off solenoid multiplicities from the fibre sizes over the anchors.

    Anchors off both axes carry the plane solenoid only; anchors on one
    axis add the line solenoids along that axis; the origin adds the
    isolated fixed points.  The fibre sizes must be constant on each kind of
    anchor.
    """
    generic = {n for (x, y), n in points.fibres.items() if x and y}
    horizontal = {n for (x, y), n in points.fibres.items() if y == 0 and x}
    vertical = {n for (x, y), n in points.fibres.items() if x == 0 and y}
    if len(generic) != 1 or len(horizontal) != 1 or len(vertical) != 1:
        raise FactorizationError(f"fibre sizes are not uniform: {points.fibres}")
    g, h, v = generic.pop(), horizontal.pop(), vertical.pop()
    line = h + v - 2 * g
    return SolenoidAccounting(g, line, fixed - g - line)


# ---------------------------------------------------------------------------
# geometry of the fixed points


def _line_label(t: OrientedTile, axis: str) -> tuple[str, str | None] | None:
    """Direction and companion side of a straight principal line through ``t``, if any."""
    lead, trail = ("E", "W") if axis == "horizontal" else ("N", "S")
    a, b = t.edge(lead), t.edge(trail)
    if t.is_cross or a.has(PRINCIPAL, OUT) == b.has(PRINCIPAL, OUT):
        return None
    if axis == "horizontal":
        direction = "east" if a.has(PRINCIPAL, OUT) else "west"
    else:
        direction = "north" if a.has(PRINCIPAL, OUT) else "south"
    sec = [mk for mk in a.marks if mk.color == SECONDARY]
    if not sec:
        return direction, None
    if axis == "horizontal":
        return direction, "north" if sec[0].offset > 0 else "south"
    return direction, "west" if sec[0].offset > 0 else "east"


@dataclass
class FixedPoint:
    tile: int
    kind: str  # "cross", "horizontal-fault", "vertical-fault" or "undetermined"
    row: tuple | None  # decoration of the horizontal line through the origin
    column: tuple | None  # decoration of the vertical line through the origin
    half_lines: dict = field(default_factory=dict)

    @property
    def supertiles(self) -> int | None:
        """Number of infinite-order supertiles making up the tiling."""
        return {"cross": 1, "horizontal-fault": 2, "vertical-fault": 2}.get(self.kind)


@dataclass
class FixedPointReport:
    points: list[FixedPoint]
    depth: int

    @property
    def counts(self) -> dict[str, int]:
        return dict(Counter(p.kind for p in self.points))

    @property
    def undetermined(self) -> int:
        return sum(p.kind == "undetermined" for p in self.points)


def _unit_axes(r: OverlapRule, t: int, depth: int):
    """Unit tiles along the two axes through the origin of the limit tiling grown from ``t``."""
    placed = overlapping_power(r, t, depth)
    row: dict[int, OrientedTile] = {}
    col: dict[int, OrientedTile] = {}
    for (qx, qy), i in placed.items():
        d = r.tiles[i]
        if qy == 0:
            for dx in (-1, 0, 1):
                row[2 * qx + dx] = d.cell(dx, 0)
        if qx == 0:
            for dy in (-1, 0, 1):
                col[2 * qy + dy] = d.cell(0, dy)
    return row, col


def _half_line(cells: dict[int, OrientedTile], sign: int, axis: str):
    labels = {_line_label(cells[k], axis) for k in cells if k * sign > 0}
    if any(cells[k].is_cross for k in cells if k * sign > 0) or len(labels) != 1 or None in labels:
        return None
    return labels.pop()


def classify_fixed_points(r: OverlapRule, depth: int = 6) -> FixedPointReport:
    """Describe the lines through the origin of every substitution-fixed tiling.

    The four half-lines leaving the origin are grown to length about
    ``2**depth`` and each must carry a single uniform decoration without
    crosses.  A cross at the origin means the four half-lines are the arms
    of one infinite cross.  Otherwise the principal line through the origin
    tile is a full fault line, and the two half-lines perpendicular to it
    meet it at the origin.
    """
    points = []
    for t in range(len(r.table)):
        if r.table[t][1][1] != t:
            continue
        row, col = _unit_axes(r, t, depth)
        halves = {
            "east": _half_line(row, 1, "horizontal"),
            "west": _half_line(row, -1, "horizontal"),
            "north": _half_line(col, 1, "vertical"),
            "south": _half_line(col, -1, "vertical"),
        }
        centre = r.tiles[t].center
        kind = "undetermined"
        row_label = col_label = None
        if None not in halves.values():
            if centre.is_cross:
                kind = "cross"
            else:
                h, v = _line_label(centre, "horizontal"), _line_label(centre, "vertical")
                if h is not None and halves["east"] == halves["west"] == h:
                    kind, row_label = "horizontal-fault", h
                elif v is not None and halves["north"] == halves["south"] == v:
                    kind, col_label = "vertical-fault", v
        points.append(FixedPoint(t, kind, row_label, col_label, halves))
    return FixedPointReport(points, depth)


def vertex_fixed_points(n: NormalRule, adj: AdjacencyTables) -> list[tuple[int, int, int, int]]:
    """Fixed points of the normal rule, as legal corner quadruples (sw, se, nw, ne).

    The normal rule inflates about the vertex shared by the four tiles, so
    each tile must reappear in the matching corner of its own image, and the
    fixed tiling is the union of four quarter-plane supertiles.
    """
    t = n.table
    return sorted(
        (sw, se, nw, ne)
        for sw, se, nw, ne in adj.corners
        if t[sw][1][1] == sw and t[se][1][0] == se and t[nw][0][1] == nw and t[ne][0][0] == ne
    )
