"""End-to-end computation: tiles, substitution, complex, cohomology and zeta function.

``run_pipeline`` runs every stage in order and collects the outcome of each
check in a single JSON report.  Exceptions raised inside a stage are
re-raised as ``PipelineError`` carrying the module and check names.  Checks
that merely fail are recorded and make ``report["ok"]`` false.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .cohomology import CellComplex, CohomologyResult, InducedMaps, build_complex, hull_cohomology, induced_maps
from .linalg import char_poly, det, diagonal, integer_roots, is_zero, matmul, poly_eval_matrix, smith_normal_form
from .patches import (
    cross_period,
    enumerate_fault_rows,
    frame_census,
    full_cross_cosets,
    generate_patch,
    legal,
    verify_frame_hierarchy,
)
from .substitution import (
    AdjacencyTables,
    Derivation,
    DerivationError,
    DoubledCatalog,
    DoubledPatch,
    NormalRule,
    OverlapRule,
    StaleCacheError,
    adjacency_tables,
    check_border_forcing,
    check_covariance,
    check_overlap_consistency,
    derive_rules,
    doubled_patch_legal,
    load_rule_cache,
    observed_tables,
    save_rule_cache,
    substitute_patch,
    substitution_matrix,
    to_doubled_patch,
    to_normal_rule,
    write_json_atomic,
)
from .tiles import Catalog, default_tileset_path, load_tileset, tileset_hash
from .zeta import (
    classify_fixed_points,
    closed_form,
    enumerate_periodic_points,
    factor_zeta,
    fibre_accounting,
    vertex_fixed_points,
    zeta_from_action,
    zeta_series,
)

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


class PipelineError(RuntimeError):
    """A stage could not complete; ``module`` and ``check`` say where."""

    def __init__(self, module: str, check: str, cause: BaseException):
        super().__init__(f"[{module}/{check}] {type(cause).__name__}: {cause}")
        self.module = module
        self.check = check
        self.cause = cause


@contextmanager
def _stage(module: str, check: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(module, check, exc) from exc


@dataclass
class PipelineConfig:
    tileset: Path | None = None
    cache: Path | None = None
    seed: int = 0
    margin: int = 8
    size: int = 64
    max_power: int = 4
    depth: int = 6
    frame_levels: int = 3
    out: Path | None = None
    svg_dir: Path | None = None

    def __post_init__(self):
        if self.max_power < 1:
            raise ValueError("max_power must be at least 1")
        if self.tileset is not None and not Path(self.tileset).exists():
            raise FileNotFoundError(f"tile set {self.tileset} does not exist")


@dataclass
class Rules:
    catalog: Catalog
    tiles: DoubledCatalog
    overlap: OverlapRule
    normal: NormalRule
    derivation: Derivation | None = None


def load_catalog(cfg: PipelineConfig) -> tuple[Catalog, str]:
    path = cfg.tileset or default_tileset_path()
    with _stage("core-tiles", "load-tileset"):
        return Catalog(load_tileset(path)), tileset_hash(path)


def obtain_rules(cfg: PipelineConfig) -> Rules:
    """Derive the substitution, or reuse a cache made from the same tile-set file."""
    catalog, digest = load_catalog(cfg)
    if cfg.cache and Path(cfg.cache).exists():
        try:
            tiles, overlap = load_rule_cache(cfg.cache, catalog, digest)
        except StaleCacheError as exc:
            log.info("ignoring rule cache: %s", exc)
        else:
            return Rules(catalog, tiles, overlap, to_normal_rule(overlap))
    with _stage("doubling-substitution", "derive"):
        d = derive_rules(size=cfg.size, margin=cfg.margin, seed=cfg.seed, catalog=catalog)
        rules = Rules(catalog, d.tiles, d.overlap, d.normal, d)
        # the generated patches and the substitution must produce the same neighbours
        seen = observed_tables(to_doubled_patch(p, d.tiles) for p in d.ensemble)
        language = rule_tables(rules)
        if (seen.horizontal, seen.vertical) != (language.horizontal, language.vertical):
            raise DerivationError("generated patches and substituted patches disagree on neighbours")
    if cfg.cache:
        save_rule_cache(cfg.cache, d, digest)
    return rules


def substitution_seeds(rules: Rules) -> list[DoubledPatch]:
    """One single-tile patch per doubled tile; substituting them generates the language."""
    return [DoubledPatch((0, 0), ((t,),)) for t in range(len(rules.tiles))]


def rule_tables(rules: Rules) -> AdjacencyTables:
    return adjacency_tables(rules.normal, substitution_seeds(rules), max_rounds=10)


@dataclass
class Check:
    name: str
    ok: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "ok": bool(self.ok), "detail": self.detail}


@dataclass
class Analysis:
    rules: Rules
    tables: AdjacencyTables
    checks: list[Check]
    complex: CellComplex
    maps: InducedMaps
    cohomology: CohomologyResult
    report: dict

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)


def _spectrum(roots: dict[int, int]) -> dict[str, int]:
    return {str(k): v for k, v in sorted(roots.items(), reverse=True)}


def _snf_ok(m, cols: int) -> bool:
    u, d, v = smith_normal_form(m, cols)
    diag = [x for x in diagonal(d) if x]
    return (
        matmul(matmul(u, m), v) == d
        and abs(det(u)) == 1
        and abs(det(v)) == 1
        and all(b % a == 0 for a, b in zip(diag, diag[1:]))
    )


def _rank(m, cols: int) -> int:
    _, d, _ = smith_normal_form(m, cols)
    return sum(1 for x in diagonal(d) if x)


def property_suite(rules: Rules, cx: CellComplex, maps: InducedMaps, max_power: int = 4) -> dict[str, bool]:
    """Algebraic and combinatorial identities that must hold exactly."""
    d0, d1 = cx.coboundaries()
    f, e, v = cx.counts
    grown = [substitute_patch(rules.normal, s, max_power) for s in substitution_seeds(rules)]
    return {
        "boundary_squared_zero": is_zero(matmul(cx.boundary1, cx.boundary2)),
        "cochain_maps_commute": matmul(d0, maps.a0) == matmul(maps.a1, d0) and matmul(d1, maps.a1) == matmul(maps.a2, d1),
        "smith_form": _snf_ok(d0, v) and _snf_ok(d1, e),
        "cayley_hamilton": all(is_zero(poly_eval_matrix(char_poly(maps[k]), maps[k])) for k in range(3)),
        "substitution_preserves_legality": all(doubled_patch_legal(g, rules.tiles) for g in grown),
    }


def report_digest(report: dict) -> str:
    body = {k: v for k, v in report.items() if k != "report_sha256"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


ACCEPTANCE = (
    (1, "oriented tile census", ("tileset",)),
    (2, "doubled tile census", ("doubled-tiles",)),
    (3, "substitution structure", ("overlap-consistency", "d4-covariance", "border-forcing", "primitivity")),
    (4, "cohomology", ("cohomology",)),
    (5, "zeta function", ("zeta", "factorization")),
    (6, "periodic points", ("periodic-points",)),
    (7, "fixed-point accounting", ("fixed-points",)),
    (8, "fault rows", ("fault-rows",)),
    (9, "property suites", ("properties",)),
)


def run_pipeline(cfg: PipelineConfig | None = None, rules: Rules | None = None) -> Analysis:
    cfg = cfg or PipelineConfig()
    catalog, digest = load_catalog(cfg)
    checks: list[Check] = []

    protos = catalog.prototiles
    orbit = Counter(t.prototile_id for t in catalog.tiles)
    checks.append(
        Check(
            "tileset",
            len(protos) == 5 and len(catalog) == 28 and sum(p.is_cross for p in protos) == 1,
            {"prototiles": len(protos), "oriented": len(catalog), "orbits": dict(sorted(orbit.items()))},
        )
    )

    with _stage("patch-engine", "generation"):
        patch = generate_patch(cfg.size, cfg.size, cfg.margin, cfg.seed, catalog=catalog)
        census = frame_census(patch)
        frames_ok = verify_frame_hierarchy(patch, cfg.frame_levels)
        cosets = full_cross_cosets(patch)
    checks.append(
        Check(
            "generation",
            legal(patch, catalog) and cross_period(patch) == 4 and len(cosets) == 1 and frames_ok,
            {
                "size": cfg.size,
                "legal": legal(patch, catalog),
                "cross_period": cross_period(patch),
                "cross_lattice_index": 4 if len(cosets) == 1 else None,
                "crosses_off_lattice": sum(
                    1 for x, y in patch.positions() if patch.at(x, y).is_cross and (x % 2, y % 2) not in cosets
                ),
                "frames": {str(k): v for k, v in sorted(census.sizes.items())},
                "frame_levels_verified": cfg.frame_levels,
            },
        )
    )

    rules = rules or obtain_rules(cfg)
    tiles = rules.tiles
    centres = Counter(tiles.centre_counts().values())
    checks.append(
        Check(
            "doubled-tiles",
            len(tiles) == 2 * len(catalog) and set(centres) == {2},
            {"count": len(tiles), "per_centre": {str(k): v for k, v in centres.items()}},
        )
    )
    with _stage("doubling-substitution", "adjacency"):
        tables = rule_tables(rules)
    table_sizes = {
        "horizontal": len(tables.horizontal),
        "vertical": len(tables.vertical),
        "corners": len(tables.corners),
        "neighbourhoods": len(tables.neighbourhoods),
        "rounds": tables.rounds,
    }
    checks.append(Check("adjacency", tables.rounds > 0, dict(table_sizes)))
    overlap = check_overlap_consistency(rules.overlap, tables)
    checks.append(Check("overlap-consistency", overlap.ok, {"violations": len(overlap.violations)}))
    border = check_border_forcing(rules.normal, rules.overlap, tables)
    checks.append(Check("border-forcing", border.ok, {"violations": len(border.violations), **border.detail}))
    cov = check_covariance(rules.overlap)
    checks.append(Check("d4-covariance", cov.ok, {"violations": len(cov.violations), "cases": len(tiles) * 8}))
    with _stage("doubling-substitution", "primitivity"):
        sm = substitution_matrix(rules.normal)
    checks.append(
        Check(
            "primitivity",
            sm.column_sum == 4 and sm.primitive_power is not None,
            {"power": sm.primitive_power, "column_sum": sm.column_sum},
        )
    )

    with _stage("ap-cohomology", "complex"):
        cx = build_complex(len(tiles), tables, border)
        maps = induced_maps(rules.normal, cx)
    with _stage("ap-cohomology", "cohomology"):
        coh = hull_cohomology(cx, maps)
    faces, edges, verts = cx.counts
    expected = ("Z", "Z[1/2]^2 + Z", "Z[1/4] + Z[1/2]^10 + Z^8 + Z/4")
    checks.append(
        Check(
            "cohomology",
            tuple(str(d.limit) for d in coh.degrees) == expected,
            {f"H{d.degree}": str(d.limit) for d in coh.degrees},
        )
    )

    with _stage("dynamics-zeta", "zeta"):
        zeta_h = zeta_from_action(spectra=[Counter(d.eigenvalues).elements() for d in coh.degrees])
        zeta_c = zeta_from_action(matrices=[maps.a0, maps.a1, maps.a2])
        series = zeta_series(zeta_h, cfg.max_power)
        accounting = factor_zeta(zeta_h)
    checks.append(
        Check(
            "zeta",
            zeta_h == zeta_c and zeta_h.exponent == {1: -8, 2: -8, 4: -1} and not zeta_h.numerator[1:],
            {"from_cohomology": str(zeta_h), "from_cochains": str(zeta_c)},
        )
    )
    checks.append(
        Check(
            "factorization",
            (accounting.plane, accounting.line, accounting.points) == (1, 10, 17)
            and all(accounting.count(m) == series[m] for m in range(1, cfg.max_power + 1)),
            {"n2d": accounting.plane, "n1d": accounting.line, "nfp": accounting.points},
        )
    )
    with _stage("dynamics-zeta", "periodic-points"):
        counted = {m: enumerate_periodic_points(rules.overlap, m) for m in range(1, cfg.max_power + 1)}
    checks.append(
        Check(
            "periodic-points",
            all(counted[m].total == series[m] for m in counted),
            {"series": list(series.counts), "counted": [counted[m].total for m in sorted(counted)]},
        )
    )

    with _stage("patch-engine", "fault-rows"):
        rows = enumerate_fault_rows(axis="horizontal", catalog=catalog, seed=cfg.seed)
        cols = enumerate_fault_rows(axis="vertical", catalog=catalog, seed=cfg.seed)
    checks.append(
        Check(
            "fault-rows",
            len(rows) == len(cols) == 6
            and len({f.direction for f in rows}) == 2
            and len({f.companion for f in rows}) == 3
            and all(f.line_period == 1 and f.cross_period == 4 for f in rows + cols),
            {
                "horizontal": len(rows),
                "vertical": len(cols),
                "arrow_directions": len({f.direction for f in rows}),
                "line_patterns": len({f.companion for f in rows}),
            },
        )
    )

    with _stage("dynamics-zeta", "classification"):
        fp = classify_fixed_points(rules.overlap, cfg.depth)
        vertex = vertex_fixed_points(rules.normal, tables)
    fixed = counted[1].total
    # the fibres of the periodic points over the torus factor give the same split
    fibre = fibre_accounting(counted[2], fixed) if cfg.max_power >= 2 else None
    axis_fibre = max((k for k in counted[2].fibres.values() if k < fixed), default=None) if fibre else None
    fp_rows = {p.row for p in fp.points if p.kind == "horizontal-fault"}
    fp_cols = {p.column for p in fp.points if p.kind == "vertical-fault"}
    checks.append(
        Check(
            "fixed-points",
            len(fp.points) == fixed == len(vertex)
            and fp.undetermined == 0
            and fibre == accounting
            and axis_fibre == len(rows)
            and accounting.line == 2 * (len(rows) - 1)
            and fp_rows == {(f.direction, f.companion) for f in rows}
            and fp_cols == {(f.direction, f.companion) for f in cols},
            {
                "total": len(fp.points),
                "kinds": dict(sorted(fp.counts.items())),
                "undetermined": fp.undetermined,
                "vertex_anchored": len(vertex),
                "fibre_split": None if fibre is None else [fibre.plane, fibre.line, fibre.points],
                "axis_fibre": axis_fibre,
                "depth": fp.depth,
            },
        )
    )

    with _stage("exact-linalg", "properties"):
        props = property_suite(rules, cx, maps, cfg.max_power)
    checks.append(Check("properties", all(props.values()), props))

    by_name = {c.name: c for c in checks}
    acceptance = {
        str(number): {"title": title, "ok": all(by_name[n].ok for n in names), "checks": list(names)}
        for number, title, names in ACCEPTANCE
    }

    d0, d1 = cx.coboundaries()
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "version": __version__,
        "config": {
            "seed": cfg.seed,
            "margin": cfg.margin,
            "size": cfg.size,
            "max_power": cfg.max_power,
            "depth": cfg.depth,
        },
        "tileset": {
            "hash": digest,
            "prototiles": len(protos),
            "oriented": len(catalog),
            "orbits": dict(sorted(orbit.items())),
            "checked_by": "tileset",
        },
        "substitution": {
            "doubled_tiles": len(tiles),
            "primitive_power": sm.primitive_power,
            "column_sum": sm.column_sum,
            "tables": table_sizes,
            "checked_by": [
                "doubled-tiles",
                "adjacency",
                "overlap-consistency",
                "border-forcing",
                "d4-covariance",
                "primitivity",
            ],
        },
        "cohomology": {
            "f_vector": [verts, edges, faces],
            "euler_characteristic": cx.euler_characteristic,
            "boundary_ranks": [_rank(d0, verts), _rank(d1, edges)],
            "approximant": {f"H{d.degree}": str(d.approximant) for d in coh.degrees},
            "hull": {f"H{d.degree}": str(d.limit) for d in coh.degrees},
            "spectra": {f"H{d.degree}": _spectrum({k: m for k, m in d.eigenvalues.items() if k}) for d in coh.degrees},
            "cochain_spectra": {f"A{k}": _spectrum(integer_roots(char_poly(maps[k]))[0]) for k in range(3)},
            "checked_by": ["cohomology", "properties"],
        },
        "zeta": {
            "zeta": {
                "function": str(zeta_h),
                "numerator_factors": [[c, e] for c, e in zeta_h.exponents if e > 0],
                "denominator_factors": [[c, -e] for c, e in zeta_h.exponents if e < 0],
            },
            "series": list(series.counts),
            "closed_form": str(closed_form(zeta_h)),
            "factorization": {"n2d": accounting.plane, "n1d": accounting.line, "nfp": accounting.points},
            "periodic_points": {
                str(m): {
                    "total": pp.total,
                    "anchors": len(pp.fibres),
                    "fibre_sizes": {str(k): v for k, v in sorted(Counter(pp.fibres.values()).items())},
                }
                for m, pp in counted.items()
            },
            "classification": {
                "kinds": dict(sorted(fp.counts.items())),
                "vertex_anchored": len(vertex),
                "points": [
                    {
                        "tile": p.tile,
                        "kind": p.kind,
                        "supertiles": p.supertiles,
                        "half_lines": {k: list(h) if h else None for k, h in p.half_lines.items()},
                    }
                    for p in fp.points
                ],
            },
            "checked_by": ["zeta", "factorization", "periodic-points", "fixed-points"],
        },
        "fault_rows": {
            "classes": [
                {
                    "axis": f.axis,
                    "direction": f.direction,
                    "companion": f.companion,
                    "signature": f.signature,
                    "line_period": f.line_period,
                    "cross_period": f.cross_period,
                }
                for f in rows + cols
            ],
            "checked_by": "fault-rows",
        },
        "checks": [c.as_dict() for c in checks],
        "acceptance": acceptance,
        "ok": all(c.ok for c in checks),
    }
    if cfg.svg_dir is not None:
        report["figures"] = write_figures(cfg.svg_dir, rules, patch, cfg.out)
    report["report_sha256"] = report_digest(report)
    if cfg.out is not None:
        write_report(cfg.out, report)
    return Analysis(rules, tables, checks, cx, maps, coh, report)


def write_figures(directory: str | Path, rules: Rules, patch, report_path: str | Path | None = None) -> list[str]:
    """Draw the prototiles, a patch and the images of the cross-centred doubled tiles.

    Returned paths are relative to the report's directory when there is one.
    """
    from .render import doubled_patch_svg, patch_svg, rule_svg, tile_svg

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    drawings = []
    for proto in rules.catalog.prototiles:
        tile = next(
            t
            for t in rules.catalog.tiles
            if t.prototile_id == proto.id and t.symmetry.rotation == 0 and not t.symmetry.reflected
        )
        drawings.append((out / f"tile-{proto.id}.svg", tile_svg(tile)))
    window = patch.window(patch.origin[0], patch.origin[1], min(patch.width, 32), min(patch.height, 32))
    drawings.append((out / "patch.svg", patch_svg(window)))
    drawings.append((out / "doubled-patch.svg", doubled_patch_svg(to_doubled_patch(window, rules.tiles), rules.tiles)))
    for i, d in enumerate(rules.tiles):
        if d.center.is_cross:
            drawings.append((out / f"rule-{i:02d}.svg", rule_svg(rules.overlap, i)))
    base = Path(report_path).resolve().parent if report_path else None
    names = []
    for path, svg in drawings:
        path.write_text(svg)
        try:
            names.append(str(path.resolve().relative_to(base)) if base else str(path))
        except ValueError:
            names.append(str(path))
    return names


def write_report(path: str | Path, report: dict) -> None:
    write_json_atomic(path, report)
