from __future__ import annotations

from pathlib import Path

import pytest
import structlog

from kgrag.db.graph import KnowledgeGraph
from kgrag.db.ingest import read_graph
from tests.helpers import graph_from

DEMO_DIR = Path(__file__).resolve().parent.parent / "data" / "demo"


@pytest.fixture(autouse=True)
def _reset_structlog():
    # the CLI binds structlog to the captured stderr of the test that ran it
    yield
    structlog.reset_defaults()


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DEMO_DIR


@pytest.fixture(scope="session")
def demo_graph() -> KnowledgeGraph:
    return read_graph(DEMO_DIR)


@pytest.fixture
def small_graph() -> KnowledgeGraph:
    """Five entities, five edges: three cross-layer, two within a layer."""
    return graph_from(
        [
            ("Valproate", "L4", ["VPA", "Valproic acid"]),
            ("Stiripentol", "L4", ["STP"]),
            ("Dravet Syndrome", "L1", ["Dravet"]),
            ("Lennox-Gastaut Syndrome", "L1", ["LGS"]),
            ("SCN1A", "L3", ["Nav1.1"]),
        ],
        [
            ("Valproate", "treats", "Dravet Syndrome", 12),
            ("Stiripentol", "treats", "Dravet Syndrome", 8),
            ("SCN1A", "associated_with", "Dravet Syndrome", 3),
            ("Stiripentol", "co_prescribed_with", "Valproate", 1),
            ("Dravet Syndrome", "differential_of", "Lennox-Gastaut Syndrome", 1),
        ],
    )
