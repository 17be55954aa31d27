import pytest

from robinson_lab.cohomology import build_complex, hull_cohomology, induced_maps
from robinson_lab.pipeline import PipelineConfig, Rules, rule_tables, run_pipeline
from robinson_lab.substitution import check_border_forcing, derive_rules
from robinson_lab.tiles import default_catalog

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def derivation(catalog):
    return derive_rules(catalog=catalog)


@pytest.fixture(scope="session")
def rules(derivation):
    d = derivation
    return Rules(d.catalog, d.tiles, d.overlap, d.normal, d)


@pytest.fixture(scope="session")
def tables(rules):
    return rule_tables(rules)


@pytest.fixture(scope="session")
def border(rules, tables):
    return check_border_forcing(rules.normal, rules.overlap, tables)


@pytest.fixture(scope="session")
def complex_(rules, tables, border):
    return build_complex(len(rules.tiles), tables, border)


@pytest.fixture(scope="session")
def maps(rules, complex_):
    return induced_maps(rules.normal, complex_)


@pytest.fixture(scope="session")
def cohomology(complex_, maps):
    return hull_cohomology(complex_, maps)


@pytest.fixture(scope="session")
def analysis(rules):
    return run_pipeline(PipelineConfig(), rules)


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number: int, ok: bool, text: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
