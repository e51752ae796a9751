# kgrag/core/errors.py
"""Exception hierarchy and process exit codes.

Every error the package raises derives from ``KGError`` and carries the exit
code the command line reports for it: 1 for domain errors, 2 for usage and
parse errors.
"""
from __future__ import annotations

import enum
from typing import Iterable, NamedTuple, Optional


class ExitCode(enum.IntEnum):
    SUCCESS = 0
    DOMAIN_ERROR = 1
    USAGE_ERROR = 2


class KGError(Exception):
    exit_code: ExitCode = ExitCode.DOMAIN_ERROR


def exit_code_for(exc: BaseException) -> ExitCode:
    """Map an exception to the exit code the CLI reports."""
    if isinstance(exc, KGError):
        return exc.exit_code
    if isinstance(exc, (OSError, ValueError)):
        return ExitCode.USAGE_ERROR
    return ExitCode.DOMAIN_ERROR


class ConfigError(KGError):
    exit_code = ExitCode.USAGE_ERROR


# ---------- kg-core ----------

class DuplicateName(KGError):
    def __init__(self, name: str, existing_id: str):
        super().__init__(f"name {name!r} collides with entity {existing_id}")
        self.name = name
        self.existing_id = existing_id


class EmptyName(KGError):
    pass


class UnknownEntity(KGError):
    def __init__(self, entity_id: str):
        super().__init__(f"unknown entity {entity_id!r}")
        self.entity_id = entity_id


class SelfLoop(KGError):
    def __init__(self, entity_id: str):
        super().__init__(f"triplet head and tail are the same entity ({entity_id})")
        self.entity_id = entity_id


class NonpositiveCount(KGError):
    def __init__(self, paper_count: object, where: str = ""):
        suffix = f" ({where})" if where else ""
        super().__init__(f"paper_count must be a positive integer, got {paper_count!r}{suffix}")
        self.paper_count = paper_count


class GraphFrozen(KGError):
    pass


class GraphNotFrozen(KGError):
    pass


class EmptyGraph(KGError):
    pass


# ---------- ingest ----------

class IngestError(KGError):
    exit_code = ExitCode.USAGE_ERROR

    def __init__(self, message: str, source: str = "<stream>", index: Optional[int] = None):
        where = source if index is None else f"{source}[{index}]"
        KGError.__init__(self, f"{where}: {message}")
        self.source = source
        self.index = index


class MalformedJson(IngestError):
    pass


class MissingField(IngestError):
    def __init__(self, field: str, source: str = "<stream>", index: Optional[int] = None):
        super().__init__(f"missing required field {field!r}", source, index)
        self.field = field


class InvalidLayer(IngestError):
    def __init__(self, value: object, source: str = "<stream>", index: Optional[int] = None):
        super().__init__(f"invalid layer {value!r}", source, index)
        self.value = value


class InvalidField(IngestError):
    def __init__(self, field: str, detail: str, source: str = "<stream>", index: Optional[int] = None):
        super().__init__(f"invalid field {field!r}: {detail}", source, index)
        self.field = field


class InvalidPaperCount(IngestError, NonpositiveCount):
    def __init__(self, value: object, source: str = "<stream>", index: Optional[int] = None):
        IngestError.__init__(self, f"paper_count must be a positive integer, got {value!r}", source, index)
        self.paper_count = value


class EndpointFailure(NamedTuple):
    origin: str
    endpoint: str
    role: str


class UnresolvedEndpoint(KGError):
    def __init__(self, failures: Iterable[EndpointFailure]):
        self.failures = list(failures)
        lines = "; ".join(f"{f.origin}: {f.role} {f.endpoint!r}" for f in self.failures)
        super().__init__(f"{len(self.failures)} unresolved endpoint(s): {lines}")


# ---------- normalizer ----------

class EmptyMention(KGError):
    pass


# ---------- retriever ----------

class EmptySeedSet(KGError):
    pass


class NoSeedInCandidates(KGError):
    pass


class DanglingTriplet(KGError):
    def __init__(self, key: tuple):
        super().__init__(f"path references a triplet absent from the graph: {key}")
        self.key = key


class ZeroVector(KGError):
    pass


class DimensionMismatch(KGError):
    pass


# ---------- metrics ----------

class LengthMismatch(KGError):
    pass


class EmptySet(KGError):
    pass


class EmptySubgraph(KGError):
    pass


class AllCasesInapplicable(KGError):
    pass
