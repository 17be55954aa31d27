import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

import hierarchy_oracle as oracle
from robinson_lab.tiles import (
    D4,
    IDENTITY,
    MIRROR,
    ROT90,
    Catalog,
    D4Element,
    EdgeSignature,
    LineMark,
    TileParseError,
    TileValidationError,
    abut,
    apply_symmetry,
    default_tileset_path,
    edges_match,
    load_tileset,
    oriented_orbit,
    parse_tileset,
    tileset_hash,
    tileset_to_json,
)

elements = st.sampled_from(D4)


def raw_tileset():
    return json.loads(default_tileset_path().read_text())


def test_bundled_tileset_has_five_prototiles():
    protos = load_tileset()
    assert [p.id for p in protos] == ["cross", "arm", "arm-rail", "arm-stop", "arm-rail-stop"]
    assert [p.is_cross for p in protos] == [True, False, False, False, False]


def test_orbit_sizes():
    orbit = Counter(t.prototile_id for t in oriented_orbit(load_tileset()))
    assert orbit == {"cross": 4, "arm": 4, "arm-rail": 8, "arm-stop": 4, "arm-rail-stop": 8}
    assert sum(orbit.values()) == 28


def test_orbit_tiles_are_distinct_placements():
    tiles = oriented_orbit(load_tileset())
    placements = {tuple(sorted((s, str(e)) for s, e in t.edges.items())) for t in tiles}
    assert len(placements) == len(tiles)


def test_json_round_trip():
    protos = load_tileset()
    assert parse_tileset(tileset_to_json(protos)) == protos


def test_hash_is_stable(tmp_path):
    copy = tmp_path / "tiles.json"
    copy.write_bytes(default_tileset_path().read_bytes())
    assert tileset_hash(copy) == tileset_hash()
    copy.write_text(copy.read_text() + " ")
    assert tileset_hash(copy) != tileset_hash()


def test_malformed_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(TileParseError):
        load_tileset(bad)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["prototiles"][0]["edges"]["N"].append(dict(d["prototiles"][0]["edges"]["N"][0])),
        lambda d: d["prototiles"][1]["edges"]["E"][0].update(color="green"),
        lambda d: d["prototiles"][1]["edges"]["E"][0].update(offset=2),
        lambda d: d["prototiles"][1]["edges"]["E"][0].update(arrow="sideways"),
        lambda d: d["prototiles"][1].update(is_cross=True),
        lambda d: d["prototiles"][2].update(id="arm"),
        lambda d: d["prototiles"][3]["edges"].pop("S"),
    ],
    ids=["duplicate-mark", "unknown-colour", "bad-offset", "bad-arrow", "two-crosses", "duplicate-id", "missing-side"],
)
def test_validation_errors(mutate):
    data = raw_tileset()
    mutate(data)
    with pytest.raises(TileValidationError):
        parse_tileset(data)


def test_edge_signature_sorts_marks():
    a = EdgeSignature.of((1, "secondary", "out"), (0, "principal", "in"))
    b = EdgeSignature.of((0, "principal", "in"), (1, "secondary", "out"))
    assert a == b
    assert a.marks[0] == LineMark(0, "principal", "in")


def test_edges_match_needs_one_arrow_per_line():
    out = EdgeSignature.of((0, "principal", "out"))
    into = EdgeSignature.of((0, "principal", "in"))
    assert edges_match(out, into)
    assert not edges_match(out, out)
    assert not edges_match(into, into)
    assert not edges_match(out, EdgeSignature.of((0, "principal", "in"), (1, "secondary", "in")))


def test_abut_mirrors_offsets():
    # a secondary line at offset +1 on an east edge is north of centre;
    # on the neighbour's west edge the same height is offset -1
    east = EdgeSignature.of((0, "principal", "out"), (1, "secondary", "out"))
    west = EdgeSignature.of((-1, "secondary", "in"), (0, "principal", "in"))
    assert abut(east, west)
    assert not abut(east, west.reflected())


@given(elements, elements, elements)
def test_d4_associative(a, b, c):
    assert (a * b) * c == a * (b * c)


@given(elements)
def test_d4_inverse(g):
    assert g * g.inverse() == IDENTITY
    assert g.inverse() * g == IDENTITY


@given(elements, elements, st.integers(-3, 3), st.integers(-3, 3))
def test_d4_product_acts_in_order(g, h, dx, dy):
    assert (g * h).vector(dx, dy) == g.vector(*h.vector(dx, dy))


def test_d4_generators():
    assert ROT90.vector(1, 0) == (0, 1)
    assert MIRROR.vector(1, 0) == (-1, 0)
    assert ROT90.side("N") == "W"
    assert {ROT90 * g for g in D4} == set(D4)
    assert D4Element.parse("r3m") == D4Element(3, True)


@given(elements, elements)
def test_apply_symmetry_composes(g, h):
    for t in oriented_orbit(load_tileset()):
        assert apply_symmetry(g, apply_symmetry(h, t)) == apply_symmetry(g * h, t)


@given(elements)
def test_symmetry_preserves_matching(g):
    catalog = Catalog(load_tileset())
    for a in catalog.tiles[::3]:
        for b in catalog.tiles:
            if catalog.fits_right(a, b):
                ga, gb = apply_symmetry(g, a), apply_symmetry(g, b)
                side = g.side("E")
                other = {"N": "S", "S": "N", "E": "W", "W": "E"}[side]
                assert abut(ga.edge(side), gb.edge(other)) if side in "EN" else abut(gb.edge(other), ga.edge(side))


def test_catalog_masks_agree_with_abut(catalog):
    for i, a in enumerate(catalog.tiles):
        for j, b in enumerate(catalog.tiles):
            assert bool(catalog.right[i] >> j & 1) == abut(a.edge("E"), b.edge("W"))
            assert bool(catalog.up[i] >> j & 1) == abut(a.edge("N"), b.edge("S"))


def test_every_oracle_tile_is_in_the_catalog(catalog):
    lookup = oracle.oriented_lookup(catalog)
    seen = set()
    # away from the axes, where the closed form has no infinite-order lines
    for y in range(2 * 777, 2 * 777 + 80):
        for x in range(2 * 12345, 2 * 12345 + 80):
            sig = oracle.tile(x, y)
            key = tuple(sig[s] for s in "NESW")
            assert key in lookup, (x, y)
            seen.add(lookup[key])
    # a large enough piece of the tiling uses all 28 placements
    assert len(seen) == 28
