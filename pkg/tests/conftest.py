import random

import pytest

from logicheck.kg import KnowledgeGraph, fixture_kg, synthetic_kg


@pytest.fixture
def kg() -> KnowledgeGraph:
    return fixture_kg()


@pytest.fixture(scope="session")
def synth() -> KnowledgeGraph:
    return synthetic_kg(1000, seed=3)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(7)
