"""Exact integer linear algebra: Smith form, lattices, abelian groups, direct limits.

Matrices are lists of rows of Python ints.  Nothing here uses floating
point.  Characteristic polynomials are delegated to sympy's domain
matrices; everything else is done by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from sympy import ZZ
from sympy.polys.matrices import DomainMatrix

Matrix = list[list[int]]


class NonSplitError(ArithmeticError):
    """The action does not decompose into integer eigen-lattices."""


# ---------------------------------------------------------------------------
# basics


def as_matrix(rows: Sequence[Sequence[int]]) -> Matrix:
    return [[int(v) for v in r] for r in rows]


def zeros(n: int, m: int) -> Matrix:
    return [[0] * m for _ in range(n)]


def identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def shape(a: Matrix, cols: int | None = None) -> tuple[int, int]:
    return len(a), (len(a[0]) if a else (cols or 0))


def transpose(a: Matrix, cols: int = 0) -> Matrix:
    if not a:
        return [[] for _ in range(cols)]
    return [list(c) for c in zip(*a)]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if not a:
        return []
    inner = len(b)
    width = len(b[0]) if b else 0
    if len(a[0]) != inner:
        raise ValueError(f"shape mismatch {len(a[0])} vs {inner}")
    bt = transpose(b, width)
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def matpow(a: Matrix, k: int) -> Matrix:
    out = identity(len(a))
    base = a
    while k:
        if k & 1:
            out = matmul(out, base)
        base = matmul(base, base)
        k >>= 1
    return out


def sub(a: Matrix, b: Matrix) -> Matrix:
    return [[x - y for x, y in zip(r, s)] for r, s in zip(a, b)]


def scalar_shift(a: Matrix, lam: int) -> Matrix:
    """``a - lam * I``."""
    return [[v - (lam if i == j else 0) for j, v in enumerate(r)] for i, r in enumerate(a)]


def submatrix(a: Matrix, rows: Sequence[int], cols: Sequence[int]) -> Matrix:
    return [[a[i][j] for j in cols] for i in rows]


def hstack(*blocks: Matrix) -> Matrix:
    n = len(blocks[0])
    return [sum((b[i] for b in blocks), []) for i in range(n)]


def columns(a: Matrix, idx: Sequence[int]) -> Matrix:
    return [[r[j] for j in idx] for r in a]


def is_zero(a: Matrix) -> bool:
    return all(v == 0 for r in a for v in r)


def det(a: Matrix) -> int:
    """Bareiss fraction-free elimination."""
    n = len(a)
    if n == 0:
        return 1
    m = [row[:] for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k]), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


# ---------------------------------------------------------------------------
# Smith normal form


def smith_normal_form(m: Matrix, cols: int | None = None) -> tuple[Matrix, Matrix, Matrix]:
    """Return ``(U, D, V)`` with ``U @ m @ V == D``.

    ``U`` and ``V`` are unimodular and ``D`` is diagonal with non-negative
    entries, each dividing the next.
    """
    n, k = shape(m, cols)
    d = [row[:] for row in m]
    u = identity(n)
    v = identity(k)

    def swap_rows(i, j):
        d[i], d[j] = d[j], d[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in d:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, f):  # row dst += f * row src
        if f:
            d[dst] = [a + f * b for a, b in zip(d[dst], d[src])]
            u[dst] = [a + f * b for a, b in zip(u[dst], u[src])]

    def add_col(src, dst, f):
        if f:
            for row in d:
                row[dst] += f * row[src]
            for row in v:
                row[dst] += f * row[src]

    t = 0
    while t < min(n, k):
        pivot = None
        for i in range(t, n):
            for j in range(t, k):
                if d[i][j] and (pivot is None or abs(d[i][j]) < abs(d[pivot[0]][pivot[1]])):
                    pivot = (i, j)
        if pivot is None:
            break
        swap_rows(t, pivot[0])
        swap_cols(t, pivot[1])
        while True:
            done = True
            for i in range(t + 1, n):
                if d[i][t]:
                    q = d[i][t] // d[t][t]
                    add_row(t, i, -q)
                    if d[i][t]:
                        swap_rows(t, i)
                        done = False
            for j in range(t + 1, k):
                if d[t][j]:
                    q = d[t][j] // d[t][t]
                    add_col(t, j, -q)
                    if d[t][j]:
                        swap_cols(t, j)
                        done = False
            if not done:
                continue
            # the pivot must divide the rest of the matrix
            bad = next(
                ((i, j) for i in range(t + 1, n) for j in range(t + 1, k) if d[i][j] % d[t][t]),
                None,
            )
            if bad is None:
                break
            add_row(bad[0], t, 1)
        if d[t][t] < 0:
            d[t] = [-x for x in d[t]]
            u[t] = [-x for x in u[t]]
        t += 1
    return u, d, v


def diagonal(d: Matrix) -> list[int]:
    return [d[i][i] for i in range(min(shape(d)))]


def inverse_unimodular(u: Matrix) -> Matrix:
    """Exact inverse of an integer matrix with determinant +-1."""
    n = len(u)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(u)]
    for c in range(n):
        p = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[p] = aug[p], aug[c]
        pv = aug[c][c]
        aug[c] = [x / pv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    out = []
    for row in aug:
        right = row[n:]
        if any(x.denominator != 1 for x in right):
            raise ValueError("matrix is not unimodular")
        out.append([int(x) for x in right])
    return out


# ---------------------------------------------------------------------------
# lattices


def kernel_basis(m: Matrix, cols: int | None = None) -> Matrix:
    """Columns spanning the integer kernel of ``m`` (a saturated lattice)."""
    n, k = shape(m, cols)
    _, d, v = smith_normal_form(m, k)
    rank = sum(1 for x in diagonal(d) if x)
    return columns(v, range(rank, k)) if k else []


def image_basis(m: Matrix, cols: int | None = None) -> Matrix:
    """Columns forming a Z-basis of the lattice spanned by the columns of ``m``."""
    n, k = shape(m, cols)
    u, d, _ = smith_normal_form(m, k)
    uinv = inverse_unimodular(u)
    diag = diagonal(d)
    rank = sum(1 for x in diag if x)
    return [[uinv[i][j] * diag[j] for j in range(rank)] for i in range(n)]


def solve_integer(basis: Matrix, y: Sequence[int]) -> list[int] | None:
    """The integer vector x with ``basis @ x == y``, or None if there is none.

    ``basis`` must have full column rank.
    """
    n, k = shape(basis)
    u, d, v = smith_normal_form(basis, k)
    uy = [sum(a * b for a, b in zip(row, y)) for row in u]
    z = []
    for i in range(k):
        if d[i][i] == 0 or uy[i] % d[i][i]:
            return None
        z.append(uy[i] // d[i][i])
    if any(uy[i] for i in range(k, n)):
        return None
    return [sum(v[i][j] * z[j] for j in range(k)) for i in range(k)]


# ---------------------------------------------------------------------------
# polynomials


def char_poly(m: Matrix) -> list[int]:
    """Coefficients of det(x I - m), leading coefficient first."""
    if not m:
        return [1]
    coeffs = DomainMatrix([[ZZ(v) for v in row] for row in m], (len(m), len(m)), ZZ).charpoly()
    return [int(c) for c in coeffs]


def poly_eval_matrix(coeffs: Sequence[int], m: Matrix) -> Matrix:
    """Horner evaluation of a polynomial at a square matrix."""
    n = len(m)
    acc = zeros(n, n)
    for c in coeffs:
        acc = matmul(acc, m)
        for i in range(n):
            acc[i][i] += c
    return acc


def _divide_linear(coeffs: list[int], root: int) -> tuple[list[int], int]:
    out = []
    acc = 0
    for c in coeffs:
        acc = acc * root + c
        out.append(acc)
    return out[:-1], out[-1]


def integer_roots(coeffs: Sequence[int]) -> tuple[dict[int, int], list[int]]:
    """Integer roots of a monic integer polynomial with multiplicities, and the leftover factor."""
    poly = list(coeffs)
    roots: dict[int, int] = {}
    while len(poly) > 1 and poly[-1] == 0:
        poly.pop()
        roots[0] = roots.get(0, 0) + 1
    changed = True
    while changed and len(poly) > 1:
        changed = False
        const = abs(poly[-1])
        cands = set()
        f = 1
        while f * f <= const:
            if const % f == 0:
                cands.update({f, -f, const // f, -(const // f)})
            f += 1
        for r in sorted(cands, key=lambda x: (abs(x), x)):
            q, rem = _divide_linear(poly, r)
            if rem == 0:
                poly = q
                roots[r] = roots.get(r, 0) + 1
                changed = True
                break
    return roots, poly


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class AbelianGroup:
    """Z^free_rank plus cyclic factors Z/d for d in ``torsion`` (each > 1, each dividing the next)."""

    free_rank: int
    torsion: tuple[int, ...] = ()

    @property
    def generators(self) -> int:
        return len(self.torsion) + self.free_rank

    def __str__(self) -> str:
        parts = []
        if self.free_rank:
            parts.append("Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        parts += [f"Z/{d}" for d in self.torsion]
        return " + ".join(parts) or "0"


def cokernel(m: Matrix, rows: int | None = None, cols: int | None = None) -> AbelianGroup:
    """Z^rows / (column span of m)."""
    n = len(m) if m else (rows or 0)
    k = len(m[0]) if m and m[0] else (cols or 0)
    if k == 0:
        return AbelianGroup(n)
    _, d, _ = smith_normal_form(m, k)
    diag = diagonal(d)
    rank = sum(1 for x in diag if x)
    return AbelianGroup(n - rank, tuple(x for x in diag if x > 1))


@dataclass(frozen=True)
class DirectLimit:
    """A finite sum of Z[1/b]^mult (b = 1 meaning Z) and a finite torsion group."""

    summands: tuple[tuple[int, int], ...]  # (base, multiplicity), base descending
    torsion: tuple[int, ...] = ()

    @property
    def rank(self) -> int:
        return sum(m for _, m in self.summands)

    def multiplicity(self, base: int) -> int:
        return dict(self.summands).get(base, 0)

    def __str__(self) -> str:
        parts = []
        for b, m in self.summands:
            g = "Z" if b == 1 else f"Z[1/{b}]"
            parts.append(g if m == 1 else f"{g}^{m}")
        parts += [f"Z/{d}" for d in self.torsion]
        return " + ".join(parts) or "0"


def _check_action(g: AbelianGroup, a: Matrix) -> None:
    k = len(g.torsion)
    n = g.generators
    if shape(a, n) != (n, n):
        raise ValueError(f"action must be {n}x{n}")
    for i in range(k, n):
        for j in range(k):
            if a[i][j]:
                raise ValueError("action sends torsion to a free element")
    for i in range(k):
        for j in range(k):
            if (g.torsion[j] * a[i][j]) % g.torsion[i]:
                raise ValueError("action is not well defined on the torsion")


def _subgroup_order(gens: Matrix, orders: Sequence[int]) -> tuple[int, Matrix]:
    """Order of the subgroup of (+) Z/d_i generated by the columns of ``gens``."""
    k = len(orders)
    rel = [[orders[i] if i == j else 0 for j in range(k)] for i in range(k)]
    lattice = image_basis(hstack(gens, rel) if gens and gens[0] else rel, None)
    total = 1
    for d in orders:
        total *= d
    return total // abs(det(lattice)), lattice


def stable_torsion(orders: Sequence[int], a: Matrix) -> tuple[int, ...]:
    """Invariant factors of the eventual image of ``a`` acting on (+) Z/d_i."""
    k = len(orders)
    if k == 0:
        return ()
    gens = identity(k)
    size, lattice = _subgroup_order(gens, orders)
    while True:
        gens = matmul(a, gens)
        new_size, new_lattice = _subgroup_order(gens, orders)
        if new_size == size:
            break
        size, lattice = new_size, new_lattice
    rel = [[orders[i] if i == j else 0 for j in range(k)] for i in range(k)]
    # express the relations in the lattice basis, then read off the quotient
    coords = []
    for j in range(k):
        x = solve_integer(lattice, [rel[i][j] for i in range(k)])
        if x is None:
            raise ArithmeticError("relations are not contained in the image lattice")
        coords.append(x)
    _, d, _ = smith_normal_form(transpose(coords))
    return tuple(x for x in diagonal(d) if x > 1)


def eventual_image(b: Matrix) -> tuple[Matrix, Matrix]:
    """A basis L of the image of b^n and the matrix C with ``b @ L == L @ C``."""
    n = len(b)
    lattice = image_basis(matpow(b, max(n, 1)), n)
    if not lattice or not lattice[0]:
        return [[] for _ in range(n)], []
    bl = matmul(b, lattice)
    cols = []
    for j in range(len(lattice[0])):
        x = solve_integer(lattice, [row[j] for row in bl])
        if x is None:
            raise ArithmeticError("eventual image is not invariant")
        cols.append(x)
    return lattice, transpose(cols)


def eigen_lattices(c: Matrix) -> dict[int, Matrix]:
    """Split Z^n into integer eigen-lattices of ``c``; raise NonSplitError if impossible."""
    n = len(c)
    if n == 0:
        return {}
    roots, rest = integer_roots(char_poly(c))
    if len(rest) > 1:
        raise NonSplitError(f"characteristic polynomial has a non-integer factor {rest}")
    blocks = {}
    for lam, mult in sorted(roots.items(), reverse=True):
        k = kernel_basis(scalar_shift(c, lam), n)
        if not k or len(k[0]) != mult:
            raise NonSplitError(f"eigenvalue {lam} is not semisimple")
        blocks[lam] = k
    total = hstack(*blocks.values())
    if abs(det(total)) != 1:
        raise NonSplitError("eigen-lattices do not span the lattice")
    return blocks


def direct_limit(g: AbelianGroup, a: Matrix) -> DirectLimit:
    """The direct limit of ``g -> g -> ...`` under ``a``.

    Generators of ``g`` are ordered torsion first, then free.  The free
    part is cut down to the eventual image, where the action is injective,
    and decomposed into integer eigen-lattices; each eigenvalue ``l``
    contributes Z[1/|l|].  The torsion part is the subgroup on which the
    powers of the action stabilise.
    """
    _check_action(g, a)
    k = len(g.torsion)
    free = list(range(k, g.generators))
    summands: dict[int, int] = {}
    if free:
        _, c = eventual_image(submatrix(a, free, free))
        if c:
            for lam, basis in eigen_lattices(c).items():
                if lam == 0:
                    raise NonSplitError("zero eigenvalue on the eventual image")
                summands[abs(lam)] = summands.get(abs(lam), 0) + len(basis[0])
    tors = stable_torsion(g.torsion, submatrix(a, range(k), range(k))) if k else ()
    return DirectLimit(tuple(sorted(summands.items(), reverse=True)), tors)
