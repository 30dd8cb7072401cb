import pytest
from importlib import resources

from uplan.dsl import parse_domain, parse_evidence
from uplan.evidence import generate_pstates, rank_pstates
from uplan.model import Proposition


def fixture_text(name: str) -> str:
    return (resources.files("uplan") / f"fixtures/{name}").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def air_combat_domain_text():
    return fixture_text("air_combat.domain")


@pytest.fixture(scope="session")
def air_combat_evidence_text():
    return fixture_text("air_combat.evidence")


@pytest.fixture(scope="session")
def air_combat_spec(air_combat_domain_text):
    return parse_domain(air_combat_domain_text, filename="air_combat.domain")


@pytest.fixture(scope="session")
def air_combat_evidence(air_combat_evidence_text):
    return parse_evidence(air_combat_evidence_text, filename="air_combat.evidence")


@pytest.fixture(scope="session")
def air_combat_worlds(air_combat_spec, air_combat_evidence):
    return rank_pstates(generate_pstates(
        air_combat_evidence, air_combat_spec.compat, air_combat_spec.n_levels,
    ))


def prop(text: str) -> Proposition:
    """(a b c) -> Proposition('a', ('b', 'c')); leading 'not ' flips polarity."""
    text = text.strip()
    negate = False
    if text.startswith("not "):
        negate = True
        text = text[4:].strip()
    parts = text.strip("()").split()
    p = Proposition(parts[0], tuple(parts[1:]))
    return p.negated() if negate else p
