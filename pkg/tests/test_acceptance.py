"""One test per acceptance criterion; each prints a single PASS/FAIL line.

Every criterion is recomputed through the module APIs (not read back from a
report) and timed against its stated bound.
"""

import time
from collections import Counter

import sympy

from robinson_lab.cohomology import build_complex, hull_cohomology, induced_maps
from robinson_lab.linalg import char_poly, integer_roots, matpow
from robinson_lab.patches import enumerate_fault_rows
from robinson_lab.pipeline import PipelineConfig, property_suite, rule_tables, run_pipeline
from robinson_lab.substitution import (
    check_border_forcing,
    check_covariance,
    check_overlap_consistency,
    derive_rules,
    substitution_matrix,
)
from robinson_lab.tiles import load_tileset, oriented_orbit
from robinson_lab.zeta import (
    classify_fixed_points,
    enumerate_periodic_points,
    factor_zeta,
    fibre_accounting,
    zeta_from_action,
    zeta_series,
)

HULL = {"H0": "Z", "H1": "Z[1/2]^2 + Z", "H2": "Z[1/4] + Z[1/2]^10 + Z^8 + Z/4"}


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_criterion_1_oriented_tiles(criterion):
    with Timer() as t:
        tiles = oriented_orbit(load_tileset())
    ok = len(tiles) == 28 and t.seconds < 1
    assert criterion(1, ok, f"{len(tiles)} oriented tiles in {t.seconds:.2f}s (want 28, < 1 s)")


def test_criterion_2_doubled_tiles(criterion, catalog):
    with Timer() as t:
        d = derive_rules(catalog=catalog)
    per_centre = Counter(x.center for x in d.tiles.tiles)
    split = set(per_centre.values())
    ok = len(d.tiles) == 56 and len(per_centre) == 28 and split == {2} and t.seconds < 60
    assert criterion(
        2,
        ok,
        f"{len(d.tiles)} doubled tiles over {len(per_centre)} centres, split {sorted(split)}, "
        f"{t.seconds:.1f}s with patch generation (want 56, 2-to-1, < 60 s)",
    )


def test_criterion_3_substitution_structure(criterion, rules):
    with Timer() as t:
        tables = rule_tables(rules)
        overlap = check_overlap_consistency(rules.overlap, tables)
        covariance = check_covariance(rules.overlap)
        border = check_border_forcing(rules.normal, rules.overlap, tables)
        sm = substitution_matrix(rules.normal)
        power = matpow([list(r) for r in sm.matrix], sm.primitive_power)
    sums = {sum(col) for col in zip(*sm.matrix)}
    positive = all(x > 0 for row in power for x in row)
    cases = len(rules.tiles) * 8
    ok = overlap.ok and covariance.ok and border.ok and sums == {4} and positive and cases == 448 and t.seconds < 60
    assert criterion(
        3,
        ok,
        f"overlap violations {len(overlap.violations)}, covariance violations {len(covariance.violations)} of {cases}, "
        f"border forcing {border.ok}, column sums {sorted(sums)}, M^{sm.primitive_power} > 0 {positive}, "
        f"{t.seconds:.1f}s (want 0, 0 of 448, True, [4], True, < 60 s)",
    )


def test_criterion_4_cohomology(criterion, rules, tables, border):
    with Timer() as t:
        cx = build_complex(len(rules.tiles), tables, border)
        coh = hull_cohomology(cx, induced_maps(rules.normal, cx))
    got = coh.summary()
    ok = got == HULL and t.seconds < 60
    assert criterion(4, ok, f"{got} in {t.seconds:.1f}s (want {HULL}, < 60 s)")


def test_criterion_5_zeta(criterion, maps):
    spectra = []
    for k in range(3):
        roots, rest = integer_roots(char_poly(maps[k]))
        assert len(rest) == 1
        spectra.append([c for c, m in roots.items() for _ in range(m)])
    with Timer() as t:
        zeta = zeta_from_action(spectra=spectra)
        acc = factor_zeta(zeta)
    z = sympy.Symbol("z")
    target = 1 / ((1 - z) ** 8 * (1 - 2 * z) ** 8 * (1 - 4 * z))
    identity = sympy.cancel(zeta.as_expr(z) - target) == 0
    same = zeta == zeta_from_action(matrices=[maps[k] for k in range(3)])
    triple = (acc.plane, acc.line, acc.points)
    ok = identity and same and triple == (1, 10, 17) and t.seconds < 1
    assert criterion(
        5,
        ok,
        f"zeta = {zeta} (identity {identity}, matrices agree {same}), factors {triple}, "
        f"{t.seconds:.3f}s (want 1/((1-z)^8 (1-2z)^8 (1-4z)), (1, 10, 17), < 1 s)",
    )


def test_criterion_6_periodic_points(criterion, rules, maps):
    zeta = zeta_from_action(matrices=[maps[k] for k in range(3)])
    series = zeta_series(zeta, 3)
    with Timer() as t:
        counted = [enumerate_periodic_points(rules.overlap, m).total for m in (1, 2, 3)]
    m = sympy.Symbol("m", positive=True, integer=True)
    z = sympy.Symbol("z")
    expansion = sympy.series(z * sympy.diff(sympy.log(zeta.as_expr(z)), z), z, 0, 4).removeO()
    from_expansion = [int(expansion.coeff(z, k)) for k in (1, 2, 3)]
    closed = 4**m + 8 * 2**m + 8
    symbolic = sympy.simplify(sum(-e * sympy.Integer(c) ** m for c, e in zeta.exponents) - closed) == 0
    ok = (
        counted == list(series.counts) == from_expansion == [28, 56, 136]
        and symbolic
        and t.seconds < 60
    )
    assert criterion(
        6,
        ok,
        f"enumerated {counted}, series {list(series.counts)}, expansion {from_expansion}, "
        f"closed form 4^m + 8*2^m + 8 {symbolic}, {t.seconds:.1f}s (want [28, 56, 136], < 60 s)",
    )


def test_criterion_7_fixed_points(criterion, rules, maps):
    with Timer() as t:
        report = classify_fixed_points(rules.overlap, depth=6)
    from_zeta = factor_zeta(zeta_from_action(matrices=[maps[k] for k in range(3)]))
    from_fibres = fibre_accounting(enumerate_periodic_points(rules.overlap, 2), len(report.points))
    triple = (from_fibres.plane, from_fibres.line, from_fibres.points)
    ok = (
        len(report.points) == 28
        and report.undetermined == 0
        and sum(triple) == 28
        and from_fibres == from_zeta
        and triple == (1, 10, 17)
        and t.seconds < 60
    )
    assert criterion(
        7,
        ok,
        f"{len(report.points)} fixed points {report.counts}, undetermined {report.undetermined}, "
        f"fibre partition {triple}, {t.seconds:.1f}s at depth 6 (want 28, 0 undetermined, 1 + 10 + 17, < 60 s)",
    )


def test_criterion_8_fault_rows(criterion, catalog):
    with Timer() as t:
        found = {axis: enumerate_fault_rows(axis=axis, catalog=catalog) for axis in ("horizontal", "vertical")}
    shapes = {}
    for axis, rows in found.items():
        directions = {r.direction for r in rows}
        patterns = {r.companion for r in rows}
        product = {(r.direction, r.companion) for r in rows} == {(d, c) for d in directions for c in patterns}
        shapes[axis] = (len(rows), len(patterns), len(directions), product)
    ok = all(s == (6, 3, 2, True) for s in shapes.values()) and t.seconds < 120
    assert criterion(
        8,
        ok,
        f"(classes, patterns, directions, product) per axis {shapes}, {t.seconds:.1f}s (want (6, 3, 2, True), < 120 s)",
    )


def test_criterion_9_properties(criterion, rules, complex_, maps, analysis):
    with Timer() as t:
        props = property_suite(rules, complex_, maps, max_power=4)
    rerun = run_pipeline(PipelineConfig(), rules)
    same = rerun.report["report_sha256"] == analysis.report["report_sha256"]
    ok = all(props.values()) and same and t.seconds < 60
    failed = [k for k, v in props.items() if not v]
    assert criterion(
        9,
        ok,
        f"failed properties {failed}, identical report hash on rerun {same}, "
        f"{t.seconds:.1f}s (want none, True, < 60 s)",
    )
