from collections import Counter

import pytest
import sympy
from sympy.matrices.normalforms import invariant_factors

from robinson_lab.cohomology import (
    BorderForcingError,
    approximant_cohomology,
    build_complex,
)
from robinson_lab.linalg import is_zero, matmul
from robinson_lab.substitution import CheckResult

HULL = {"H0": "Z", "H1": "Z[1/2]^2 + Z", "H2": "Z[1/4] + Z[1/2]^10 + Z^8 + Z/4"}


def test_cell_counts(complex_):
    assert complex_.counts == (56, 36, 4)
    assert complex_.euler_characteristic == 24


def test_every_face_has_four_distinct_sides(complex_):
    for t in range(complex_.faces):
        assert sum(abs(complex_.boundary2[e][t]) for e in range(len(complex_.edges))) in (2, 4)
        assert sum(complex_.boundary2[e][t] for e in range(len(complex_.edges))) == 0


def test_boundary_of_boundary(complex_):
    assert is_zero(matmul(complex_.boundary1, complex_.boundary2))


def test_cochain_maps_commute(complex_, maps):
    d0, d1 = complex_.coboundaries()
    assert matmul(d0, maps.a0) == matmul(maps.a1, d0)
    assert matmul(d1, maps.a1) == matmul(maps.a2, d1)


def test_face_map_is_the_substitution_matrix(rules, maps):
    for t in range(56):
        assert sum(maps.a2[t]) == 4
        (ll, lr), (ul, ur) = rules.normal.table[t]
        assert Counter({c: n for c, n in enumerate(maps.a2[t]) if n}) == Counter((ll, lr, ul, ur))


def _reference_groups(complex_):
    """Cohomology of the approximant from ranks and invariant factors of the coboundaries."""
    d0, d1 = (sympy.Matrix(m) for m in complex_.coboundaries())
    f, e, v = complex_.counts
    r0, r1 = d0.rank(), d1.rank()
    tors = lambda m: sorted(abs(int(x)) for x in invariant_factors(m) if abs(x) > 1)
    return [(v - r0, []), (e - r1 - r0, tors(d0)), (f - r1, tors(d1))]


def test_approximant_matches_reference(complex_):
    groups = approximant_cohomology(complex_)
    for g, (rank, torsion) in zip(groups, _reference_groups(complex_)):
        assert g.free_rank == rank
        assert sorted(g.torsion) == torsion
    assert [str(g) for g in groups] == ["Z", "Z^4", "Z^27 + Z/4"]


def test_hull_cohomology(cohomology):
    assert cohomology.summary() == HULL


def _eigenvalues_on_cohomology(complex_, maps):
    """Integer eigenvalue multiplicities of the action on rational cohomology."""
    x = sympy.Symbol("x")
    d0, d1 = (sympy.Matrix(m) for m in complex_.coboundaries())
    a = [sympy.Matrix(maps[k]) for k in range(3)]

    def restricted(act, image):
        cols = image.columnspace()
        if not cols:
            return sympy.Poly(1, x)
        b = sympy.Matrix.hstack(*cols)
        m = (b.T * b).inv() * b.T * act * b
        assert act * b == b * m
        return sympy.Poly(m.charpoly(x).as_expr(), x)

    b1, b2 = restricted(a[1], d0), restricted(a[2], d1)
    whole = [sympy.Poly(m.charpoly(x).as_expr(), x) for m in a]
    quotients = [whole[0], sympy.div(whole[1], b1)[0], sympy.div(whole[2], b2)[0]]
    quotients[0] = sympy.div(quotients[0], b1)[0]
    quotients[1] = sympy.div(quotients[1], b2)[0]
    return [{int(r): m for r, m in sympy.roots(q).items() if r.is_integer} for q in quotients]


def test_hull_ranks_follow_the_rational_spectrum(complex_, maps, cohomology):
    for k, eig in enumerate(_eigenvalues_on_cohomology(complex_, maps)):
        limit = cohomology[k].limit
        for base in (1, 2, 4):
            assert limit.multiplicity(base) == eig.get(base, 0) + eig.get(-base, 0), (k, base, eig)


def test_cochain_spectra(maps):
    x = sympy.Symbol("x")
    spectra = []
    for k in range(3):
        roots = sympy.roots(sympy.Matrix(maps[k]).charpoly(x).as_expr(), x)
        spectra.append({int(r): m for r, m in roots.items()})
    assert spectra == [{1: 1, 0: 3}, {2: 2, 1: 10, 0: 24}, {4: 1, 2: 10, 1: 17, 0: 28}]


def test_complex_requires_border_forcing(rules, tables):
    with pytest.raises(BorderForcingError):
        build_complex(56, tables, CheckResult(False, ["not checked"]))
