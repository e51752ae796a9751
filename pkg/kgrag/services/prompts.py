# kgrag/services/prompts.py
"""Chat message assembly for graph-grounded question answering. No model is called here."""
from typing import Dict, List, Mapping, Optional

from kgrag.services.metrics import McqItem

Message = Dict[str, str]

SYSTEM_PROMPT = (
    "You are an expert epileptologist with deep knowledge of epilepsy syndromes, antiseizure medications, "
    "pharmacogenomics, EEG interpretation, and epilepsy research. Answer the following question based on the "
    "provided clinical context and knowledge graph evidence. Think step by step and ground your answer in the "
    "evidence provided."
)

NO_CONTEXT = "(no graph evidence retrieved)"

MCQ_INSTRUCTION = "Answer with the option letter and a brief justification."
OPEN_INSTRUCTION = (
    "Provide a detailed answer grounded in the provided evidence. "
    "Cite specific entities or relations from the knowledge graph context where relevant."
)
PRECISION_INSTRUCTION = (
    "Select the most appropriate ASM from the following options and justify your selection "
    "based on the genetic evidence and clinical guidelines."
)
TREATMENT_INSTRUCTION = (
    "Select the most appropriate treatment option from the following choices. Consider guideline concordance, "
    "drug safety, and potential contraindications based on the provided knowledge graph evidence."
)
TREATMENT_ANSWER = (
    "Answer with the option letter and justify your selection with reference to clinical guidelines "
    "and any contraindication evidence."
)


def _context_line(context: str) -> str:
    return f"Context: {context.strip() or NO_CONTEXT}"


def _options_line(options: Mapping[str, str]) -> str:
    return "Options: " + " ".join(f"{label}) {text}" for label, text in options.items())


def _messages(lines: List[str], history: Optional[List[Message]]) -> List[Message]:
    messages: List[Message] = [{"role": "system", "content": SYSTEM_PROMPT}]
    if history:
        messages.extend(history)
    messages.append({"role": "user", "content": "\n".join(lines)})
    return messages


def mcq_messages(item: McqItem, context: str, history: Optional[List[Message]] = None) -> List[Message]:
    lines = [_context_line(context), f"Question: {item.question}", _options_line(item.options), MCQ_INSTRUCTION]
    return _messages(lines, history)


def open_question_messages(question: str, context: str, history: Optional[List[Message]] = None) -> List[Message]:
    return _messages([_context_line(context), f"Question: {question}", OPEN_INSTRUCTION], history)


def precision_medicine_messages(
    genetic_variant: str,
    phenotype: str,
    options: Mapping[str, str],
    context: str,
    history: Optional[List[Message]] = None,
) -> List[Message]:
    """Medication choice for a patient described by a variant and a phenotype."""
    lines = [
        _context_line(context),
        f"Patient: {genetic_variant}, {phenotype}",
        PRECISION_INSTRUCTION,
        _options_line(options),
    ]
    return _messages(lines, history)


def treatment_messages(item: McqItem, context: str, history: Optional[List[Message]] = None) -> List[Message]:
    """The item's question is read as the clinical scenario."""
    lines = [
        _context_line(context),
        f"Clinical scenario: {item.question}",
        TREATMENT_INSTRUCTION,
        _options_line(item.options),
        TREATMENT_ANSWER,
    ]
    return _messages(lines, history)
