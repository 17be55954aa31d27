"""Command line interface: ``robinson-lab <verb> [rules.json] [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .patches import UnsatisfiableError, generate_patch, legal, patch_to_dict
from .pipeline import PipelineConfig, PipelineError, load_catalog, obtain_rules, run_pipeline, write_figures
from .render import patch_svg
from .substitution import write_json_atomic

log = logging.getLogger("robinson_lab")


def _config(args: argparse.Namespace, **extra) -> PipelineConfig:
    return PipelineConfig(
        tileset=args.tileset,
        cache=args.cache or getattr(args, "rules", None),
        seed=args.seed,
        margin=args.margin,
        size=args.size,
        max_power=args.max_power,
        depth=args.depth,
        svg_dir=args.svg,
        **extra,
    )


def _emit(data, out: Path | None) -> None:
    if out is None:
        print(json.dumps(data, indent=2))
    else:
        write_json_atomic(out, data)
        log.info("wrote %s", out)


def _print_checks(checks) -> None:
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}  {json.dumps(c.detail, sort_keys=True)}")


def cmd_gen(args) -> int:
    cfg = _config(args)
    catalog, _ = load_catalog(cfg)
    width = args.width or cfg.size
    height = args.height or width
    patch = generate_patch(width, height, cfg.margin, cfg.seed, catalog=catalog)
    if args.svg:
        args.svg.mkdir(parents=True, exist_ok=True)
        (args.svg / "patch.svg").write_text(patch_svg(patch))
    _emit(patch_to_dict(patch), args.out)
    return 0 if legal(patch, catalog) else 1


def cmd_derive(args) -> int:
    # an explicit --out is where the rule cache goes
    cfg = _config(args)
    if args.out is not None:
        cfg.cache = args.out
    rules = obtain_rules(cfg)
    summary = {"doubled_tiles": len(rules.tiles), "cache": str(cfg.cache) if cfg.cache else None}
    if rules.derivation is not None:
        summary["ensemble_seeds"] = list(rules.derivation.seeds)
        summary["rejected_seeds"] = list(rules.derivation.rejected)
    if cfg.cache is None:
        summary["normal_table"] = [[list(r) for r in q] for q in rules.normal.table]
    print(json.dumps(summary, indent=2))
    return 0


def cmd_check(args) -> int:
    a = run_pipeline(_config(args))
    _print_checks(a.checks)
    return 0 if a.report["ok"] else 1


def _section(args, key: str) -> int:
    a = run_pipeline(_config(args))
    _emit(a.report[key], args.out)
    return 0 if a.report["ok"] else 1


def cmd_complex(args) -> int:
    a = run_pipeline(_config(args))
    coh = a.report["cohomology"]
    keep = ("f_vector", "euler_characteristic", "boundary_ranks", "approximant")
    _emit({k: coh[k] for k in keep}, args.out)
    return 0 if a.report["ok"] else 1


def cmd_cohomology(args) -> int:
    return _section(args, "cohomology")


def cmd_zeta(args) -> int:
    return _section(args, "zeta")


def cmd_render(args) -> int:
    cfg = _config(args)
    out = args.svg or args.out or Path("figures")
    rules = obtain_rules(cfg)
    patch = generate_patch(32, 32, cfg.margin, cfg.seed, catalog=rules.catalog)
    for name in write_figures(out, rules, patch):
        print(name)
    return 0


def cmd_report(args) -> int:
    a = run_pipeline(_config(args, out=args.out or Path("report.json")))
    _print_checks(a.checks)
    for number, entry in a.report["acceptance"].items():
        print(f"criterion {number} ({entry['title']}): {'PASS' if entry['ok'] else 'FAIL'}")
    return 0 if a.report["ok"] else 1


VERBS = {
    "gen": (cmd_gen, "generate a legal patch by constraint search"),
    "derive": (cmd_derive, "derive the substitution on doubled tiles and cache it"),
    "check": (cmd_check, "run every check and print pass or fail"),
    "complex": (cmd_complex, "cell counts and cohomology of the complex"),
    "cohomology": (cmd_cohomology, "cohomology of the tiling space"),
    "zeta": (cmd_zeta, "zeta function, periodic points and fixed points"),
    "render": (cmd_render, "draw tiles, a patch and substitution images as SVG"),
    "report": (cmd_report, "full pipeline, written as a JSON report"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tileset", type=Path, help="tile-set JSON (default: the bundled Robinson tiles)")
    common.add_argument("--cache", type=Path, help="rule cache, reused while the tile set is unchanged")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--margin", type=int, default=8, help="extra border solved around each patch")
    common.add_argument("--size", type=int, default=64, help="side of generated patches")
    common.add_argument("--max-power", type=int, default=4, help="largest period m for point counts")
    common.add_argument("--depth", type=int, default=6, help="substitution depth for fixed points")
    common.add_argument("--out", type=Path, help="output file")
    common.add_argument("--svg", type=Path, help="directory for SVG drawings")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="robinson-lab", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for name, (fn, help_text) in VERBS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=fn)
        if name == "gen":
            p.add_argument("--width", type=int)
            p.add_argument("--height", type=int)
        elif name != "derive":
            p.add_argument("rules", type=Path, nargs="?", help="rule cache to use (same as --cache)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PipelineError, UnsatisfiableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
