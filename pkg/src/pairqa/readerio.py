"""Serialization of matched pairs into reader encoder blocks.

Each pairwise block is ``question: <Q> generated passage: <lp text>
retrieved passage: <rp text>`` with the generated passage always first,
so the reader can learn that the factual source sits in the latter
position. The linearized variant emits one block per passage instead;
the shuffled variants are ablations (seeded, reproducible).

Budgets are whitespace-token counts per block (a neural tokenizer would
be model-specific). The question and markers are never truncated; the
leftover budget is split equally between the two passages, each cut at a
token boundary from the end.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .corpus import HopType, PassageChain, QAExample
from .errors import ContractViolation
from .lineio import IngestionReport, read_jsonl, write_jsonl
from .matching import PairMatching

logger = logging.getLogger(__name__)

QUESTION_MARKER = "question:"
GENERATED_MARKER = "generated passage:"
RETRIEVED_MARKER = "retrieved passage:"

_PAIRWISE_BUDGETS = {False: 400, True: 1000}
_LINEARIZED_BUDGETS = {False: 200, True: 500}


class Variant(Enum):
    PAIRWISE = "pairwise"
    LINEARIZED = "linearized"
    SHUFFLED_PAIRS = "shuffled-pairs"
    SHUFFLED_WITHIN_PAIR = "shuffled-within-pair"


@dataclass(frozen=True)
class ReaderExample:
    question_id: str
    blocks: tuple[str, ...]
    variant: Variant
    budget: int

    def to_record(self) -> dict:
        return {"question_id": self.question_id, "blocks": list(self.blocks)}


def default_budget(hop_type: HopType, variant: Variant = Variant.PAIRWISE) -> int:
    """400/1000 tokens per pair block, 200/500 per linearized block
    (single-hop/multi-hop). Unknown hop types get single-hop budgets."""
    multi = hop_type.is_multi_hop
    if variant is Variant.LINEARIZED:
        return _LINEARIZED_BUDGETS[multi]
    return _PAIRWISE_BUDGETS[multi]


def _truncate(text: str, max_tokens: int) -> str:
    tokens = text.split()
    if max_tokens <= 0:
        return ""
    return " ".join(tokens[:max_tokens])


def _chain_block_text(chain: PassageChain) -> str:
    return chain.text(with_titles=True)


def _join(parts: Iterable[str]) -> str:
    return " ".join(p for p in parts if p)


def _pair_block(question: str, lp_text: str, rp_text: str, budget: int, swap: bool = False) -> str:
    overhead = (
        len(QUESTION_MARKER.split())
        + len(question.split())
        + len(GENERATED_MARKER.split())
        + len(RETRIEVED_MARKER.split())
    )
    room = budget - overhead
    lp_share = (room + 1) // 2 if room > 0 else 0
    rp_share = room - lp_share if room > 0 else 0
    lp_out = _truncate(lp_text, lp_share)
    rp_out = _truncate(rp_text, rp_share)
    if swap:
        return _join([QUESTION_MARKER, question, RETRIEVED_MARKER, rp_out, GENERATED_MARKER, lp_out])
    return _join([QUESTION_MARKER, question, GENERATED_MARKER, lp_out, RETRIEVED_MARKER, rp_out])


def _single_block(question: str, marker: str, text: str, budget: int) -> str:
    overhead = len(QUESTION_MARKER.split()) + len(question.split()) + len(marker.split())
    return _join([QUESTION_MARKER, question, marker, _truncate(text, budget - overhead)])


def _pair_texts(example: QAExample, matching: PairMatching) -> list[tuple[str, str]]:
    texts = []
    for lp_index, rp_index, _ in matching.pairs:
        if not (0 <= lp_index < example.m and 0 <= rp_index < example.n):
            raise ContractViolation(
                f"{example.question_id}: pair ({lp_index},{rp_index}) out of range for "
                f"M={example.m}, N={example.n}"
            )
        texts.append(
            (
                _chain_block_text(example.generated[lp_index]),
                _chain_block_text(example.retrieved[rp_index]),
            )
        )
    return texts


def serialize_pairwise(example: QAExample, matching: PairMatching, budget: int) -> ReaderExample:
    """One block per matched pair, in matching (compatibility-sorted) order."""
    blocks = tuple(
        _pair_block(example.question, lp_text, rp_text, budget)
        for lp_text, rp_text in _pair_texts(example, matching)
    )
    return ReaderExample(
        question_id=example.question_id, blocks=blocks, variant=Variant.PAIRWISE, budget=budget
    )


def serialize_variant(
    example: QAExample,
    matching: PairMatching,
    variant: Variant,
    budget: int,
    seed: int = 0,
) -> ReaderExample:
    """Serialize under any input variant; shuffles derive from ``seed``."""
    if variant is Variant.PAIRWISE:
        return serialize_pairwise(example, matching, budget)
    texts = _pair_texts(example, matching)
    if variant is Variant.LINEARIZED:
        blocks = []
        for lp_text, rp_text in texts:
            blocks.append(_single_block(example.question, GENERATED_MARKER, lp_text, budget))
            blocks.append(_single_block(example.question, RETRIEVED_MARKER, rp_text, budget))
        return ReaderExample(
            question_id=example.question_id,
            blocks=tuple(blocks),
            variant=variant,
            budget=budget,
        )
    rng = random.Random(seed)
    if variant is Variant.SHUFFLED_PAIRS:
        order = list(range(len(texts)))
        rng.shuffle(order)
        blocks = tuple(
            _pair_block(example.question, texts[k][0], texts[k][1], budget) for k in order
        )
    elif variant is Variant.SHUFFLED_WITHIN_PAIR:
        blocks = tuple(
            _pair_block(example.question, lp_text, rp_text, budget, swap=rng.random() < 0.5)
            for lp_text, rp_text in texts
        )
    else:
        raise ContractViolation(f"unknown variant {variant!r}")
    return ReaderExample(
        question_id=example.question_id, blocks=tuple(blocks), variant=variant, budget=budget
    )


def parse_pair_block(block: str) -> tuple[str, str, str]:
    """Recover (question, lp_text, rp_text) from a pair block.

    Handles either within-pair order. Only guaranteed for passage texts
    that do not themselves contain the literal markers.
    """
    if not block.startswith(QUESTION_MARKER):
        raise ContractViolation("block does not start with the question marker")
    gen_pos = block.find(f" {GENERATED_MARKER}")
    ret_pos = block.find(f" {RETRIEVED_MARKER}")
    if gen_pos < 0 or ret_pos < 0:
        raise ContractViolation("block is missing a passage marker")
    first, second = sorted([(gen_pos, GENERATED_MARKER), (ret_pos, RETRIEVED_MARKER)])
    question = block[len(QUESTION_MARKER) : first[0]].strip()
    mid = block[first[0] + 1 + len(first[1]) : second[0]].strip()
    tail = block[second[0] + 1 + len(second[1]) :].strip()
    if first[1] == GENERATED_MARKER:
        return question, mid, tail
    return question, tail, mid


def write_reader_examples(path: str | Path, examples: Iterable[ReaderExample]) -> int:
    return write_jsonl(path, (ex.to_record() for ex in examples))


def ingest_predictions(
    path: str | Path, report: IngestionReport | None = None
) -> dict[str, str]:
    """Load ``{"question_id", "answer"}`` lines; duplicate ids keep the
    last value with a warning."""
    if report is None:
        report = IngestionReport()
    predictions: dict[str, str] = {}
    for lineno, rec in read_jsonl(path, report):
        qid = rec.get("question_id")
        answer = rec.get("answer")
        if not isinstance(qid, str) or not isinstance(answer, str):
            report.error(lineno, "prediction record needs string question_id and answer")
            continue
        if qid in predictions:
            report.warn(lineno, f"duplicate prediction for {qid}; keeping the last one")
            logger.warning("duplicate prediction for %s at line %d; last wins", qid, lineno)
        predictions[qid] = answer
    return predictions
