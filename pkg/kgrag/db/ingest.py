# kgrag/db/ingest.py
"""Node/edge JSON files: parsing, graph loading and export.

Directory layout::

    <root>/nodes/<layer>.json      one array of node records per layer
    <root>/edges/<relation>.json   one array of edge records per relation
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import IO, Dict, Iterable, List, Sequence, Union

import structlog
from pydantic import TypeAdapter, ValidationError

from kgrag.core.errors import (
    EndpointFailure,
    IngestError,
    InvalidField,
    InvalidLayer,
    InvalidPaperCount,
    MalformedJson,
    MissingField,
    UnresolvedEndpoint,
)
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.models import (
    CANONICAL_RELATIONS,
    STANDARD_LAYERS,
    EdgeRecord,
    Entity,
    NodeRecord,
)

logger = structlog.get_logger(__name__)

_NODE_LIST = TypeAdapter(List[NodeRecord])
_EDGE_LIST = TypeAdapter(List[EdgeRecord])

Stream = Union[IO[str], IO[bytes], str, bytes]


def read_bytes(stream: Stream) -> bytes:
    data = stream.read() if hasattr(stream, "read") else stream
    return data.encode("utf-8") if isinstance(data, str) else data


def ingest_error_from(exc: ValidationError, source: str) -> IngestError:
    """Turn the first pydantic error into the matching ingest error."""
    error = exc.errors()[0]
    kind, loc = error["type"], error["loc"]
    if kind in ("json_invalid", "json_type"):
        return MalformedJson(error["msg"], source)
    if kind == "list_type" or not loc:
        return MalformedJson("expected a JSON array of objects", source)
    index = loc[0] if isinstance(loc[0], int) else None
    if len(loc) < 2:
        return MalformedJson(error["msg"], source, index)
    field = str(loc[1])
    if kind == "missing":
        return MissingField(field, source, index)
    if field == "layer":
        return InvalidLayer(error.get("input"), source, index)
    if field == "paper_count":
        return InvalidPaperCount(error.get("input"), source, index)
    return InvalidField(field, error["msg"], source, index)


def parse_nodes(stream: Stream, source: str = "<stream>") -> List[NodeRecord]:
    """Parse a node file (JSON array); records keep file order, extra keys are ignored."""
    try:
        records = _NODE_LIST.validate_json(read_bytes(stream))
    except ValidationError as exc:
        raise ingest_error_from(exc, source) from exc
    for index, record in enumerate(records):
        record._origin = f"{source}[{index}]"
    return records


def parse_edges(stream: Stream, source: str = "<stream>") -> List[EdgeRecord]:
    try:
        records = _EDGE_LIST.validate_json(read_bytes(stream))
    except ValidationError as exc:
        raise ingest_error_from(exc, source) from exc
    for index, record in enumerate(records):
        record._origin = f"{source}[{index}]"
    return records


def entity_from_record(record: NodeRecord) -> Entity:
    return Entity(
        canonical_name=record.name,
        layer=record.layer,
        identifier=record.identifier,
        ontology_source=record.source,
        aliases=record.aliases,
        definition=record.definition,
    )


def load_graph(node_records: Iterable[NodeRecord], edge_records: Sequence[EdgeRecord]) -> KnowledgeGraph:
    """Insert all entities, then all edges; returns a frozen graph.

    Endpoints resolve by canonical name, then alias, then identifier
    (case-folded). Every unresolved endpoint is collected and reported at once.
    """
    graph = KnowledgeGraph()
    for record in node_records:
        graph.add_entity(entity_from_record(record))

    failures: List[EndpointFailure] = []
    for index, record in enumerate(edge_records):
        origin = record.origin or f"edges[{index}]"
        head = graph.resolve(record.head)
        tail = graph.resolve(record.tail)
        if head is None:
            failures.append(EndpointFailure(origin, record.head, "head"))
        if tail is None:
            failures.append(EndpointFailure(origin, record.tail, "tail"))
        if head is None or tail is None:
            continue
        graph.add_triplet(head, record.relation, tail, record.paper_count, record.provenance)

    if failures:
        raise UnresolvedEndpoint(failures)
    return graph.freeze()


def _file_stem(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("._") or "unnamed"


def export_payloads(graph: KnowledgeGraph) -> Dict[str, bytes]:
    """Render the graph as ``{relative path: file bytes}``, deterministically.

    Files exist for the five standard layers and six templated relations even
    when empty.
    """
    graph.require_frozen()
    nodes: Dict[str, List[NodeRecord]] = {f"nodes/{layer.code}.json": [] for layer in STANDARD_LAYERS}
    edges: Dict[str, List[EdgeRecord]] = {f"edges/{name}.json": [] for name in CANONICAL_RELATIONS}

    for entity in graph.sorted_entities():
        nodes.setdefault(f"nodes/{_file_stem(entity.layer.code)}.json", []).append(
            NodeRecord(
                name=entity.canonical_name,
                identifier=entity.identifier,
                source=entity.ontology_source,
                layer=entity.layer.code,
                aliases=sorted(entity.aliases, key=lambda a: (a.casefold(), a)),
                definition=entity.definition,
            )
        )

    def edge_order(triplet):
        return (graph.entity(triplet.head).key, triplet.relation.name, graph.entity(triplet.tail).key)

    for triplet in sorted(graph.triplets(), key=edge_order):
        edges.setdefault(f"edges/{_file_stem(triplet.relation.name)}.json", []).append(
            EdgeRecord(
                head=graph.name_of(triplet.head),
                relation=triplet.relation.name,
                tail=graph.name_of(triplet.tail),
                paper_count=triplet.paper_count,
                provenance=triplet.provenance,
            )
        )

    payloads = {path: _NODE_LIST.dump_json(records, indent=2) + b"\n" for path, records in nodes.items()}
    payloads.update({path: _EDGE_LIST.dump_json(records, indent=2) + b"\n" for path, records in edges.items()})
    return dict(sorted(payloads.items()))


def write_graph(graph: KnowledgeGraph, root: Union[str, Path]) -> List[Path]:
    root = Path(root)
    written = []
    for relative, payload in export_payloads(graph).items():
        path = root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        written.append(path)
    logger.info("graph_exported", root=str(root), files=len(written))
    return written


def read_records(root: Union[str, Path]):
    root = Path(root)
    if not (root / "nodes").is_dir():
        raise MalformedJson("graph directory has no nodes/ folder", str(root))
    node_records: List[NodeRecord] = []
    edge_records: List[EdgeRecord] = []
    for path in sorted((root / "nodes").glob("*.json")):
        node_records.extend(parse_nodes(path.read_bytes(), str(path)))
    for path in sorted((root / "edges").glob("*.json")):
        edge_records.extend(parse_edges(path.read_bytes(), str(path)))
    return node_records, edge_records


def read_graph(root: Union[str, Path]) -> KnowledgeGraph:
    """Load a graph written by ``write_graph``."""
    nodes, edges = read_records(root)
    graph = load_graph(nodes, edges)
    logger.info("graph_loaded", root=str(root), nodes=len(graph), edges=graph.edge_count)
    return graph
