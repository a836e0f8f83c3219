import json
import os

import pytest

from miqes import harness
from miqes.quadforms import make_instance

FIXTURES_PATH = os.path.join(os.path.dirname(__file__), "fixtures", "oracle_fixtures.json")

# Cells whose oracle references the acceptance suite needs.
ACCEPTANCE_CELLS = [
    ("TC0", 8, 10.0, 30.0),
    ("TC0", 8, 1e4, 30.0),
    ("TC2", 8, 1e4, 30.0),
]


@pytest.fixture(scope="session")
def oracle_fixtures():
    """Oracle references for the acceptance cells, cached on disk."""
    fixtures = harness.load_fixtures(FIXTURES_PATH)
    instances = [make_instance(tc, dim, cond, level)
                 for tc, dim, cond, level in ACCEPTANCE_CELLS]
    fixtures, failed = harness.ensure_references(instances, fixtures)
    assert not failed, f"oracle references unavailable: {failed}"
    harness.save_fixtures(fixtures, FIXTURES_PATH)
    return fixtures
