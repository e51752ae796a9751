# kgrag/cli/commands.py
"""Sub-command parsers and handlers. Handlers return an exit code; payloads go to stdout."""
import argparse
import sys
from pathlib import Path
from typing import List

import structlog

from kgrag.cli.schemas import (
    CandidateView,
    ExtractReport,
    MetricReport,
    PromptView,
    RejectedView,
    RougePairView,
    RougeReport,
    SubgraphView,
    SweepReport,
    render,
)
from kgrag.core.config import NormalizerConfig, RetrievalConfig, RetrievalMode, RunConfig
from kgrag.core.errors import ConfigError, EmptySet, ExitCode
from kgrag.db.graph import KnowledgeGraph
from kgrag.db.ingest import load_graph, parse_edges, parse_nodes, read_graph, write_graph
from kgrag.services import metrics
from kgrag.services.embedding import build_embedder
from kgrag.services.extractor import (
    DEFAULT_TEMPLATES,
    commit_candidates,
    extract_candidates,
    load_templates,
    parse_candidates,
    resolve_conflicts,
    split_sentences,
)
from kgrag.services.prompts import mcq_messages, open_question_messages, treatment_messages
from kgrag.services.retriever import GraphRetriever
from kgrag.services.sweep import DEFAULT_GRID, run_sweep

logger = structlog.get_logger(__name__)

METRICS = ("top1", "rouge-l", "kgec", "dfs", "gc")
ITEM_PROMPTS = {"mcq": mcq_messages, "treatment": treatment_messages}


def _default(model, field: str) -> str:
    value = model.model_fields[field].default
    return value.value if isinstance(value, RetrievalMode) else str(value)


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"{args.metric} needs {', '.join(missing)}")


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "alpha",
            "max_nodes",
            "max_depth",
            "top_k",
            "mode",
            "fuzzy_threshold",
            "link_confidence",
            "embedder",
        )
    }
    return RunConfig.load(getattr(args, "config", None), **overrides)


# ---------- parsers ----------

def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file; flags override its values")


def _add_normalizer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--fuzzy-threshold",
        type=float,
        help=f"minimum edit similarity for fuzzy matches (default: {_default(NormalizerConfig, 'fuzzy_threshold')})",
    )
    parser.add_argument(
        "--link-confidence",
        type=float,
        help=f"minimum score of a query entity link (default: {_default(NormalizerConfig, 'link_confidence')})",
    )


def _add_retrieval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--alpha", type=float, help=f"PPR restart probability (default: {_default(RetrievalConfig, 'alpha')})"
    )
    parser.add_argument(
        "--max-nodes", type=int, help=f"subgraph node budget (default: {_default(RetrievalConfig, 'max_nodes')})"
    )
    parser.add_argument(
        "--max-depth", type=int, help=f"hop limit (default: {_default(RetrievalConfig, 'max_depth')})"
    )
    parser.add_argument(
        "--top-k", type=int, help=f"semantic candidate count (default: {_default(RetrievalConfig, 'top_k')})"
    )
    parser.add_argument(
        "--mode",
        choices=[m.value for m in RetrievalMode],
        help=f"retrieval mode (default: {_default(RetrievalConfig, 'mode')})",
    )
    parser.add_argument(
        "--embedder",
        choices=["trigram", "sentence-transformers"],
        help="node/query embedder (default: trigram)",
    )
    _add_normalizer_flags(parser)


def add_commands(subparsers) -> None:
    build = subparsers.add_parser("build", help="load node/edge files, export the graph, print statistics")
    build.add_argument("--nodes", nargs="+", type=Path, required=True, metavar="FILE", help="node JSON files")
    build.add_argument("--edges", nargs="*", type=Path, default=[], metavar="FILE", help="edge JSON files")
    build.add_argument("--out", type=Path, help="export directory (default: config output_path)")
    _add_config_flag(build)
    build.set_defaults(handler=cmd_build)

    retrieve = subparsers.add_parser("retrieve", help="retrieve a subgraph and print its reasoning paths")
    retrieve.add_argument("graph", type=Path, metavar="GRAPH_DIR", help="graph directory")
    retrieve.add_argument("query", help="question text")
    _add_retrieval_flags(retrieve)
    retrieve.add_argument("--json", type=Path, dest="json_path", help="also write the subgraph as JSON here")
    _add_config_flag(retrieve)
    retrieve.set_defaults(handler=cmd_retrieve)

    extract = subparsers.add_parser("extract", help="rule-based triplet extraction from sentences")
    extract.add_argument("graph", type=Path, metavar="GRAPH_DIR", help="graph directory")
    extract.add_argument("sentences", type=Path, metavar="SENTENCES_FILE", help="plain text to mine")
    extract.add_argument("--templates", type=Path, help="template JSON (default: the six built-in templates)")
    extract.add_argument("--candidates", type=Path, help="externally extracted candidate JSON to merge in")
    extract.add_argument("--commit", type=Path, metavar="OUT_DIR", help="write the enriched graph here")
    _add_normalizer_flags(extract)
    _add_config_flag(extract)
    extract.set_defaults(handler=cmd_extract)

    evaluate = subparsers.add_parser("eval", help="compute an evaluation metric")
    evaluate.add_argument("--metric", choices=METRICS, required=True, help="metric to compute")
    evaluate.add_argument("--items", type=Path, help="top1: MCQ items JSON")
    evaluate.add_argument("--responses", type=Path, help="top1: JSON array of response strings")
    evaluate.add_argument("--candidate", help="rouge-l: candidate text")
    evaluate.add_argument("--reference", help="rouge-l: reference text")
    evaluate.add_argument("--pairs", type=Path, help="rouge-l: JSON array of {candidate, reference}")
    evaluate.add_argument("--graph", type=Path, help="kgec: graph directory")
    evaluate.add_argument("--subgraph", type=Path, help="kgec: subgraph JSON written by retrieve --json")
    evaluate.add_argument("--output", type=Path, help="kgec: generated answer text file")
    evaluate.add_argument("--cases", type=Path, help="dfs/gc: cases JSON")
    evaluate.add_argument("--rules", type=Path, help="dfs/gc: rule table JSON")
    evaluate.set_defaults(handler=cmd_eval)

    prompt = subparsers.add_parser("prompt", help="assemble graph-grounded chat prompts")
    prompt.add_argument("graph", type=Path, metavar="GRAPH_DIR", help="graph directory")
    task = prompt.add_mutually_exclusive_group(required=True)
    task.add_argument("--items", type=Path, help="MCQ items JSON")
    task.add_argument("--question", help="open-ended question text")
    prompt.add_argument(
        "--task",
        choices=sorted(ITEM_PROMPTS),
        default="mcq",
        help="prompt template for --items (default: %(default)s)",
    )
    _add_retrieval_flags(prompt)
    _add_config_flag(prompt)
    prompt.set_defaults(handler=cmd_prompt)

    sweep = subparsers.add_parser("sweep", help="vary one retrieval setting at a time and report subgraph statistics")
    sweep.add_argument("graph", type=Path, metavar="GRAPH_DIR", help="graph directory")
    sweep.add_argument("--items", type=Path, required=True, help="MCQ items JSON; questions are the queries")
    sweep.add_argument(
        "--responses", type=Path, help="JSON array of generated answers for KGEC (default: gold options)"
    )
    sweep.add_argument(
        "--parameter",
        action="append",
        choices=list(DEFAULT_GRID),
        help="setting to sweep; repeatable (default: all)",
    )
    _add_retrieval_flags(sweep)
    _add_config_flag(sweep)
    sweep.set_defaults(handler=cmd_sweep)


# ---------- handlers ----------

def cmd_build(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    out = args.out or config.output_path
    if out is None:
        raise ConfigError("build needs --out")
    nodes = [record for path in args.nodes for record in parse_nodes(path.read_bytes(), str(path))]
    edges = [record for path in args.edges for record in parse_edges(path.read_bytes(), str(path))]
    graph = load_graph(nodes, edges)
    write_graph(graph, out)
    _emit(render(graph.compute_stats()))
    return ExitCode.SUCCESS


def _retriever(graph: KnowledgeGraph, config: RunConfig) -> GraphRetriever:
    return GraphRetriever(graph, config.retrieval(), build_embedder(config), config.normalizer())


def cmd_retrieve(args: argparse.Namespace) -> int:
    config = _run_config(args)
    graph = read_graph(args.graph)
    result = _retriever(graph, config).retrieve(args.query)
    for warning in result.warnings:
        logger.warning("retrieval_warning", detail=warning)

    json_path = args.json_path or config.json_path
    if json_path is not None:
        Path(json_path).write_text(render(SubgraphView.of(args.query, result, graph)), encoding="utf-8")
    context = result.serialized_context
    _emit(context + "\n" if context else "")
    return ExitCode.SUCCESS


def cmd_extract(args: argparse.Namespace) -> int:
    config = _run_config(args)
    graph = read_graph(args.graph)
    templates = (
        load_templates(args.templates.read_bytes(), str(args.templates)) if args.templates else DEFAULT_TEMPLATES
    )
    text = args.sentences.read_text(encoding="utf-8")

    candidates = extract_candidates(text, graph, templates, config.normalizer())
    if args.candidates:
        candidates += parse_candidates(args.candidates.read_bytes(), graph, str(args.candidates))
    resolved = resolve_conflicts(candidates)

    working = graph.thawed_copy()
    report = commit_candidates(working, resolved)
    if args.commit:
        write_graph(working.freeze(), args.commit)

    _emit(
        render(
            ExtractReport(
                sentences=len(split_sentences(text)),
                candidates=len(candidates),
                after_conflicts=len(resolved),
                inserted=report.inserted,
                merged=report.merged,
                accepted=[CandidateView.of(c, graph) for c in report.accepted],
                rejected=[RejectedView.of(r.candidate, graph, reason=r.reason) for r in report.rejected],
                committed_to=str(args.commit) if args.commit else None,
            )
        )
    )
    return ExitCode.SUCCESS


def _eval_top1(args: argparse.Namespace) -> MetricReport:
    _require(args, "items", "responses")
    items = metrics.load_items(args.items.read_bytes(), str(args.items))
    responses = metrics.load_strings(args.responses.read_bytes(), str(args.responses))
    value = metrics.top1_accuracy(items, responses)
    predictions = [
        {"id": item.id, "predicted": metrics.extract_choice(r, item.options), "gold": item.gold}
        for item, r in zip(items, responses)
    ]
    return MetricReport(metric="top1", value=value, total=len(items), predictions=predictions)


def _eval_rouge(args: argparse.Namespace) -> MetricReport:
    if args.pairs is not None:
        pairs = metrics.load_pairs(args.pairs.read_bytes(), str(args.pairs))
    else:
        _require(args, "candidate", "reference")
        pairs = [metrics.TextPair(candidate=args.candidate, reference=args.reference)]
    if not pairs:
        raise EmptySet("no ROUGE-L pairs given")
    scores = [metrics.rouge_l(p.candidate, p.reference) for p in pairs]
    summary = metrics.aggregate_runs([s.f1 for s in scores])
    return RougeReport(
        metric="rouge-l",
        value=summary.mean,
        pairs=[RougePairView(index=i, score=s) for i, s in enumerate(scores)],
        f1_summary=summary,
    )


def _eval_kgec(args: argparse.Namespace) -> MetricReport:
    _require(args, "graph", "subgraph", "output")
    graph = read_graph(args.graph)
    view = SubgraphView.model_validate_json(args.subgraph.read_bytes())
    subgraph = graph.induced_subgraph(node.id for node in view.nodes)
    text = args.output.read_text(encoding="utf-8")
    value = metrics.kg_evidence_coverage(subgraph, text, graph)
    return MetricReport(metric="kgec", value=value, entities=len(subgraph))


def _load_cases(args: argparse.Namespace) -> List[metrics.SafetyCase]:
    _require(args, "cases", "rules")
    rules = metrics.load_rules(args.rules.read_bytes(), str(args.rules))
    return metrics.load_cases(args.cases.read_bytes(), rules, str(args.cases))


def _eval_dfs(args: argparse.Namespace) -> MetricReport:
    cases = _load_cases(args)
    value = metrics.drug_safety_score(cases)
    return MetricReport(metric="dfs", value=value, total=len(cases), safe=sum(c.is_safe() for c in cases))


def _eval_gc(args: argparse.Namespace) -> MetricReport:
    result = metrics.guideline_concordance(_load_cases(args))
    return MetricReport(
        metric="gc",
        value=result.score,
        concordant=result.concordant,
        applicable=result.applicable,
        excluded=result.excluded,
    )


_EVALUATORS = {
    "top1": _eval_top1,
    "rouge-l": _eval_rouge,
    "kgec": _eval_kgec,
    "dfs": _eval_dfs,
    "gc": _eval_gc,
}


def cmd_eval(args: argparse.Namespace) -> int:
    _emit(render(_EVALUATORS[args.metric](args)))
    return ExitCode.SUCCESS


def cmd_prompt(args: argparse.Namespace) -> int:
    config = _run_config(args)
    graph = read_graph(args.graph)
    retriever = _retriever(graph, config)
    if args.question is not None:
        result = retriever.retrieve(args.question)
        view = PromptView(
            id="question",
            seeds=[graph.name_of(s) for s in result.seeds],
            warnings=result.warnings,
            messages=open_question_messages(args.question, result.serialized_context),
        )
        _emit(render([view.model_dump(mode="json")]))
        return ExitCode.SUCCESS

    items = metrics.load_items(args.items.read_bytes(), str(args.items))
    views: List[PromptView] = []
    for item in items:
        result = retriever.retrieve(item.question)
        views.append(
            PromptView(
                id=item.id,
                seeds=[graph.name_of(s) for s in result.seeds],
                warnings=result.warnings,
                messages=ITEM_PROMPTS[args.task](item, result.serialized_context),
            )
        )
    _emit(render([v.model_dump(mode="json") for v in views]))
    return ExitCode.SUCCESS


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _run_config(args)
    graph = read_graph(args.graph)
    items = metrics.load_items(args.items.read_bytes(), str(args.items))
    answers = metrics.load_strings(args.responses.read_bytes(), str(args.responses)) if args.responses else None
    grid = {name: DEFAULT_GRID[name] for name in dict.fromkeys(args.parameter)} if args.parameter else DEFAULT_GRID
    retrieval, normalizer = config.retrieval(), config.normalizer()
    points = run_sweep(graph, items, answers, grid, retrieval, normalizer, build_embedder(config))
    baseline = {**retrieval.model_dump(mode="json"), **normalizer.model_dump(mode="json")}
    _emit(render(SweepReport(baseline=baseline, points=points)))
    return ExitCode.SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgrag",
        description="Evidence-weighted knowledge graph: build, extract, retrieve, evaluate.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress (INFO) to standard error")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    add_commands(subparsers)
    return parser
