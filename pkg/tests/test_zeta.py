import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from robinson_lab.zeta import (
    FactorizationError,
    SolenoidAccounting,
    ZetaFunction,
    classify_fixed_points,
    closed_form,
    enumerate_periodic_points,
    factor_zeta,
    fibre_accounting,
    line_solenoid_zeta,
    periodic_anchors,
    plane_solenoid_zeta,
    point_zeta,
    vertex_fixed_points,
    zeta_from_action,
    zeta_series,
)

z = sympy.Symbol("z")
SPECTRA = [[1, 0, 0, 0], [2] * 2 + [1] * 10 + [0] * 24, [4] + [2] * 10 + [1] * 17 + [0] * 28]
SERIES = (28, 56, 136, 392, 1288)


@pytest.fixture(scope="module")
def zeta():
    return zeta_from_action(spectra=SPECTRA)


def counts_from_expression(expr, n):
    """a_m from the power series of z d/dz log zeta."""
    s = sympy.series(z * sympy.diff(sympy.log(expr), z), z, 0, n + 1).removeO()
    return tuple(int(s.coeff(z, m)) for m in range(1, n + 1))


def test_zeta_from_spectra_and_matrices_agree(zeta, maps):
    assert zeta_from_action(matrices=[maps[k] for k in range(3)]) == zeta


def test_zeta_expression(zeta):
    expected = 1 / ((1 - z) ** 8 * (1 - 2 * z) ** 8 * (1 - 4 * z))
    assert sympy.simplify(zeta.as_expr(z) - expected) == 0
    assert zeta.exponent == {1: -8, 2: -8, 4: -1}


def test_series_against_power_series(zeta):
    assert zeta_series(zeta, 5).counts == SERIES
    assert counts_from_expression(zeta.as_expr(z), 5) == SERIES


def test_series_against_traces(zeta, maps):
    a = [sympy.Matrix(maps[k]) for k in range(3)]
    traces = tuple(int((a[2] ** m).trace() - (a[1] ** m).trace() + (a[0] ** m).trace()) for m in range(1, 6))
    assert traces == SERIES


def test_closed_form(zeta):
    m = sympy.Symbol("m", positive=True, integer=True)
    assert sympy.simplify(closed_form(zeta, m) - (2 ** (m + 3) + 4**m + 8)) == 0
    assert [closed_form(zeta, m).subs(m, k) for k in range(1, 6)] == list(SERIES)


def test_factorization(zeta):
    acc = factor_zeta(zeta)
    assert (acc.plane, acc.line, acc.points) == (1, 10, 17)
    assert [acc.count(m) for m in range(1, 6)] == list(SERIES)


@given(st.integers(0, 3), st.integers(0, 12), st.integers(0, 30))
def test_factorization_round_trip(plane, line, points):
    acc = SolenoidAccounting(plane, line, points)
    assert factor_zeta(acc.zeta()) == acc
    n = 4
    assert zeta_series(acc.zeta(), n).counts == tuple(acc.count(m) for m in range(1, n + 1))


def test_solenoid_counts():
    # the plane solenoid has (2^m - 1)^2 points of period m, the line one 2^m - 1
    for m in range(1, 6):
        assert zeta_series(plane_solenoid_zeta(), m)[m] == (2**m - 1) ** 2
        assert zeta_series(line_solenoid_zeta(), m)[m] == 2**m - 1
        assert zeta_series(point_zeta(), m)[m] == 1


def test_unfactorable_zeta():
    with pytest.raises(FactorizationError):
        factor_zeta(ZetaFunction.from_factors(denominator=[3]))
    with pytest.raises(FactorizationError):
        factor_zeta(ZetaFunction((), (1, 0, 1), (1,)))
    with pytest.raises(FactorizationError):
        closed_form(ZetaFunction((), (1, 0, 1), (1,)))


def test_zeta_needs_one_source():
    with pytest.raises(ValueError):
        zeta_from_action()
    with pytest.raises(ValueError):
        zeta_from_action(spectra=SPECTRA, matrices=[[[1]]])


def test_anchors():
    assert periodic_anchors(1) == [(0, 0)]
    assert len(periodic_anchors(3)) == 49


@pytest.mark.parametrize("m", [1, 2, 3])
def test_periodic_points_match_the_series(rules, m):
    points = enumerate_periodic_points(rules.overlap, m)
    assert points.total == SERIES[m - 1]
    assert set(points.fibres.values()) <= {1, 6, 28}
    assert points.fibres[(0, 0)] == 28


def test_fibres_reproduce_the_factorization(rules):
    acc = fibre_accounting(enumerate_periodic_points(rules.overlap, 2), 28)
    assert (acc.plane, acc.line, acc.points) == (1, 10, 17)


def test_fixed_point_classification(rules):
    report = classify_fixed_points(rules.overlap, depth=6)
    assert len(report.points) == 28
    assert report.undetermined == 0
    assert report.counts == {"cross": 4, "horizontal-fault": 12, "vertical-fault": 12}
    for p in report.points:
        assert p.supertiles == (1 if p.kind == "cross" else 2)


def test_vertex_anchored_fixed_points(rules, tables):
    quads = vertex_fixed_points(rules.normal, tables)
    assert len(quads) == 28
    # the south-west quadrant of every such tiling has a cross at its corner
    assert all(rules.tiles[sw].center.is_cross for sw, _, _, _ in quads)
