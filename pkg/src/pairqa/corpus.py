"""Question/passage data model, dataset ingestion, and answer metrics.

The dataset file format is line-delimited JSON with fields
``question_id``, ``question``, ``answers``, ``retrieved`` and
``generated``. Each entry of the two passage pools is a chain: an array
of ``{"id", "title", "text"}`` objects. Single-hop files may store a bare
object instead of a one-element array; the loader accepts both.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ContractViolation
from .lineio import IngestionReport, read_jsonl, write_jsonl

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class Source(Enum):
    RETRIEVED = "retrieved"
    LLM_GENERATED = "generated"


class HopType(Enum):
    SINGLE_HOP = "single"
    MULTI_HOP_BRIDGE = "bridge"
    MULTI_HOP_COMPARISON = "comparison"
    UNKNOWN = "unknown"

    @property
    def is_multi_hop(self) -> bool:
        return self in (HopType.MULTI_HOP_BRIDGE, HopType.MULTI_HOP_COMPARISON)


@dataclass(frozen=True)
class Passage:
    id: str
    text: str
    title: str | None = None
    source: Source = Source.RETRIEVED

    def __post_init__(self):
        if not self.text.strip():
            raise ContractViolation(f"passage {self.id!r} has empty text")


@dataclass(frozen=True)
class PassageChain:
    """An ordered list of passage segments; length 1 single-hop, 2 multi-hop."""

    segments: tuple[Passage, ...]
    source: Source

    def __post_init__(self):
        if not self.segments:
            raise ContractViolation("passage chain must have at least one segment")
        for seg in self.segments:
            if seg.source != self.source:
                raise ContractViolation(
                    f"segment {seg.id!r} source {seg.source} differs from chain source {self.source}"
                )

    @property
    def id(self) -> str:
        return self.segments[0].id

    def text(self, with_titles: bool = False) -> str:
        """Segment texts joined by single spaces, optionally with titles."""
        parts = []
        for seg in self.segments:
            if with_titles and seg.title:
                parts.append(f"{seg.title} . {seg.text}")
            else:
                parts.append(seg.text)
        return " ".join(parts)


@dataclass(frozen=True)
class QAExample:
    question_id: str
    question: str
    answers: tuple[str, ...]
    retrieved: tuple[PassageChain, ...]
    generated: tuple[PassageChain, ...]
    hop_type: HopType = HopType.UNKNOWN

    def __post_init__(self):
        if not self.question.strip():
            raise ContractViolation(f"example {self.question_id!r} has empty question")
        if not self.answers:
            raise ContractViolation(f"example {self.question_id!r} has no gold answers")
        for chain in self.retrieved:
            if chain.source != Source.RETRIEVED:
                raise ContractViolation("retrieved pool contains a non-retrieved chain")
        for chain in self.generated:
            if chain.source != Source.LLM_GENERATED:
                raise ContractViolation("generated pool contains a non-generated chain")

    @property
    def n(self) -> int:
        return len(self.retrieved)

    @property
    def m(self) -> int:
        return len(self.generated)


@dataclass(frozen=True)
class AnswerVerdict:
    exact_match: bool
    f1: float
    matched_alias: str | None = None


def normalize_answer(s: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    s = s.lower().translate(_PUNCT_TABLE)
    s = _ARTICLE_RE.sub(" ", s)
    return " ".join(s.split())


def _token_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction: str, answers: Sequence[str]) -> AnswerVerdict:
    """Normalized string equality against any alias, plus the best token F1."""
    if not answers:
        raise ContractViolation("answers must be non-empty")
    pred_norm = normalize_answer(prediction)
    pred_tokens = pred_norm.split()
    best_f1 = 0.0
    matched = None
    for alias in answers:
        alias_norm = normalize_answer(alias)
        if matched is None and pred_norm == alias_norm:
            matched = alias
        best_f1 = max(best_f1, _token_f1(pred_tokens, alias_norm.split()))
    is_match = matched is not None
    if is_match:
        best_f1 = 1.0
    return AnswerVerdict(exact_match=is_match, f1=best_f1, matched_alias=matched)


def text_contains_answer(text: str, answers: Sequence[str]) -> bool:
    """True iff some normalized alias is a contiguous token run in the text."""
    tokens = normalize_answer(text).split()
    if not tokens:
        return False
    for alias in answers:
        alias_tokens = normalize_answer(alias).split()
        if not alias_tokens or len(alias_tokens) > len(tokens):
            continue
        k = len(alias_tokens)
        for start in range(len(tokens) - k + 1):
            if tokens[start : start + k] == alias_tokens:
                return True
    return False


def contains_answer(chain: PassageChain, answers: Sequence[str]) -> bool:
    return text_contains_answer(chain.text(), answers)


# --- dataset ingestion -------------------------------------------------


def _parse_chain(raw, source: Source, prefix: str, index: int) -> PassageChain:
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise ContractViolation("chain must be an object or a non-empty array")
    segments = []
    for seg_idx, seg in enumerate(raw):
        if not isinstance(seg, dict):
            raise ContractViolation("chain segment must be an object")
        text = seg.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ContractViolation(f"chain segment {seg_idx} has empty text")
        pid = seg.get("id")
        if pid is None:
            pid = f"{prefix}{index}" if len(raw) == 1 else f"{prefix}{index}.{seg_idx}"
        title = seg.get("title")
        if title is not None and not isinstance(title, str):
            raise ContractViolation("title must be a string when present")
        segments.append(Passage(id=str(pid), text=text, title=title, source=source))
    return PassageChain(segments=tuple(segments), source=source)


def _parse_pool(raw, source: Source, prefix: str) -> tuple[PassageChain, ...]:
    if raw is None:
        raw = []
    if not isinstance(raw, list):
        raise ContractViolation(f"{source.value} pool must be an array")
    chains = tuple(_parse_chain(item, source, prefix, i) for i, item in enumerate(raw))
    seen: set[str] = set()
    for chain in chains:
        for seg in chain.segments:
            if seg.id in seen:
                raise ContractViolation(f"duplicate passage id {seg.id!r} in {source.value} pool")
            seen.add(seg.id)
    return chains


def example_from_record(record: dict) -> QAExample:
    question_id = record.get("question_id")
    if not isinstance(question_id, str) or not question_id:
        raise ContractViolation("missing or empty question_id")
    question = record.get("question")
    if not isinstance(question, str) or not question.strip():
        raise ContractViolation("missing or empty question")
    answers = record.get("answers")
    if not isinstance(answers, list) or not answers or not all(isinstance(a, str) for a in answers):
        raise ContractViolation("answers must be a non-empty array of strings")
    retrieved = _parse_pool(record.get("retrieved"), Source.RETRIEVED, "r")
    generated = _parse_pool(record.get("generated"), Source.LLM_GENERATED, "g")
    hop_raw = record.get("hop_type")
    if hop_raw is None:
        single = all(len(c.segments) == 1 for c in retrieved + generated)
        hop_type = HopType.SINGLE_HOP if single else HopType.UNKNOWN
    else:
        try:
            hop_type = HopType(hop_raw)
        except ValueError:
            raise ContractViolation(f"unknown hop_type {hop_raw!r}") from None
    return QAExample(
        question_id=question_id,
        question=question,
        answers=tuple(answers),
        retrieved=retrieved,
        generated=generated,
        hop_type=hop_type,
    )


def example_to_record(example: QAExample) -> dict:
    def chain_out(chain: PassageChain) -> list[dict]:
        out = []
        for seg in chain.segments:
            d = {"id": seg.id, "text": seg.text}
            if seg.title is not None:
                d["title"] = seg.title
            out.append(d)
        return out

    return {
        "question_id": example.question_id,
        "question": example.question,
        "answers": list(example.answers),
        "retrieved": [chain_out(c) for c in example.retrieved],
        "generated": [chain_out(c) for c in example.generated],
        "hop_type": example.hop_type.value,
    }


def load_examples(
    path: str | Path,
    format_hint: str = "jsonl",
    report: IngestionReport | None = None,
) -> Iterator[QAExample]:
    """Stream examples from a dataset file in file order.

    ``format_hint`` is ``"jsonl"`` (the native format) or ``"auto"``, which
    tolerates the same layout. Malformed records are recorded in ``report``
    (line number + message) and skipped; empty passage pools are flagged as
    warnings but the example is still yielded.
    """
    if format_hint not in ("jsonl", "auto"):
        raise ContractViolation(f"unknown format_hint {format_hint!r}")
    if report is None:
        report = IngestionReport()
    for lineno, record in read_jsonl(path, report):
        try:
            example = example_from_record(record)
        except ContractViolation as exc:
            report.error(lineno, str(exc))
            continue
        if not example.retrieved:
            report.warn(lineno, f"{example.question_id}: empty retrieved pool")
        if not example.generated:
            report.warn(lineno, f"{example.question_id}: empty generated pool")
        yield example


def read_examples(path: str | Path) -> tuple[list[QAExample], IngestionReport]:
    report = IngestionReport()
    examples = list(load_examples(path, report=report))
    return examples, report


def write_examples(path: str | Path, examples: Iterable[QAExample]) -> int:
    return write_jsonl(path, (example_to_record(e) for e in examples))
