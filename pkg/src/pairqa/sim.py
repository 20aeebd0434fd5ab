"""Synthetic corpora with known ground truth, plus a noiseless mock reader.

Every synthetic question gets a unique gold answer token and a unique
distractor token. Retrieved chains either contain the gold token
(evidential) or neither token; generated chains contain the gold token
(faithful) or the distractor (hallucinated, but always plausible). All
draws come from a per-question RNG stream whose draw order does not
depend on the parameters, so sweeping a probability while holding the
seed fixed changes each chain's flag monotonically.

The mock reader answers with the gold token when the input contains at
least one supporting chain and no hallucinated generated chain; a
hallucinated chain always misleads it to the distractor. That determinism
makes mined silver labels exactly checkable against the ground truth.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import HopType, Passage, PassageChain, QAExample, Source
from .errors import ContractViolation
from .lineio import read_jsonl, write_jsonl
from .providers import PredictRequest


@dataclass(frozen=True)
class SynthSpec:
    num_questions: int
    n: int = 10
    m: int = 10
    p_retrieved_evidential: float = 0.5
    p_llm_hallucinated: float = 0.5
    seed: int = 0
    hop_type: HopType = HopType.SINGLE_HOP
    single_pivot: bool = False

    def __post_init__(self):
        if self.num_questions < 1 or self.n < 1 or self.m < 1:
            raise ContractViolation("num_questions, n, and m must all be >= 1")
        for name in ("p_retrieved_evidential", "p_llm_hallucinated"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ContractViolation(f"{name} must lie in [0,1]")


@dataclass(frozen=True)
class ChainTruth:
    chain_id: str
    source: Source
    text: str
    supports: bool  # evidential (retrieved) / faithful (generated)


@dataclass(frozen=True)
class QuestionTruth:
    question_id: str
    question: str
    gold: str
    distractor: str
    chains: dict[str, ChainTruth]

    def supporting_ids(self, source: Source | None = None) -> set[str]:
        return {
            cid
            for cid, ct in self.chains.items()
            if ct.supports and (source is None or ct.source is source)
        }


@dataclass
class GroundTruth:
    questions: dict[str, QuestionTruth] = field(default_factory=dict)

    def __post_init__(self):
        self._by_question_text = {qt.question: qid for qid, qt in self.questions.items()}

    def for_question_text(self, question: str) -> QuestionTruth:
        qid = self._by_question_text.get(question)
        if qid is None:
            raise ContractViolation(f"unknown synthetic question {question!r}")
        return self.questions[qid]


def _make_chain(qid: str, cid: str, source: Source, body: str, hop_type: HopType) -> PassageChain:
    if hop_type.is_multi_hop:
        segments = (
            Passage(id=f"{cid}.0", text=f"{cid} hop one links {qid} to its record", source=source),
            Passage(id=f"{cid}.1", text=body, source=source),
        )
    else:
        segments = (Passage(id=cid, text=body, source=source),)
    return PassageChain(segments=segments, source=source)


def generate_corpus(spec: SynthSpec) -> tuple[list[QAExample], GroundTruth]:
    """Deterministic corpus + ground truth from ``spec.seed``.

    In single-pivot mode exactly one retrieved chain per question is
    evidential (``p_retrieved_evidential`` is ignored), which is the
    regime where leave-one-out mining has full coverage.
    """
    examples = []
    truths: dict[str, QuestionTruth] = {}
    for q in range(spec.num_questions):
        rng = random.Random(f"{spec.seed}:{q}")
        qid = f"q{q:05d}"
        gold = f"gold{q:05d}"
        distractor = f"wrong{q:05d}"
        question = f"which entity is referenced by record {q:05d}"
        pivot = rng.randrange(spec.n)
        chains: dict[str, ChainTruth] = {}

        retrieved = []
        for j in range(spec.n):
            u = rng.random()
            evidential = (j == pivot) if spec.single_pivot else (u < spec.p_retrieved_evidential)
            cid = f"{qid}-r{j}"
            if evidential:
                body = f"source {cid} states that the entity is {gold}"
            else:
                body = f"source {cid} discusses an unrelated topic instead"
            chain = _make_chain(qid, cid, Source.RETRIEVED, body, spec.hop_type)
            retrieved.append(chain)
            chains[cid] = ChainTruth(cid, Source.RETRIEVED, chain.text(), evidential)

        generated = []
        for i in range(spec.m):
            u = rng.random()
            hallucinated = u < spec.p_llm_hallucinated
            cid = f"{qid}-g{i}"
            claimed = distractor if hallucinated else gold
            body = f"model account {cid} claims that the entity is {claimed}"
            chain = _make_chain(qid, cid, Source.LLM_GENERATED, body, spec.hop_type)
            generated.append(chain)
            chains[cid] = ChainTruth(cid, Source.LLM_GENERATED, chain.text(), not hallucinated)

        examples.append(
            QAExample(
                question_id=qid,
                question=question,
                answers=(gold,),
                retrieved=tuple(retrieved),
                generated=tuple(generated),
                hop_type=spec.hop_type,
            )
        )
        truths[qid] = QuestionTruth(
            question_id=qid, question=question, gold=gold, distractor=distractor, chains=chains
        )
    return examples, GroundTruth(questions=truths)


def mock_predict(question: str, blocks: Sequence[str], truth: GroundTruth) -> str:
    """Noiseless set-based reader over ground-truth flags.

    Each block must contain the text of at least one known chain of the
    question; otherwise the call is a contract violation.
    """
    if not blocks:
        raise ContractViolation("mock predictor requires at least one block")
    qt = truth.for_question_text(question)
    supported = False
    misled = False
    for block in blocks:
        present = [ct for ct in qt.chains.values() if ct.text in block]
        if not present:
            raise ContractViolation(
                f"block for {qt.question_id} does not contain any known chain text"
            )
        for ct in present:
            if ct.supports:
                supported = True
            elif ct.source is Source.LLM_GENERATED:
                misled = True
    return qt.gold if supported and not misled else qt.distractor


class SimPredictor:
    """Predictor backend over a GroundTruth (duck-typed like RemotePredictor)."""

    def __init__(self, truth: GroundTruth):
        self.truth = truth

    def predict(self, req: PredictRequest) -> str:
        return mock_predict(req.question, req.passages, self.truth)


def write_truth(path: str | Path, truth: GroundTruth) -> int:
    def records():
        for qid in sorted(truth.questions):
            qt = truth.questions[qid]
            yield {
                "question_id": qt.question_id,
                "question": qt.question,
                "gold": qt.gold,
                "distractor": qt.distractor,
                "chains": [
                    {
                        "id": ct.chain_id,
                        "source": ct.source.value,
                        "text": ct.text,
                        "supports": ct.supports,
                    }
                    for _, ct in sorted(qt.chains.items())
                ],
            }

    return write_jsonl(path, records())


def load_truth(path: str | Path) -> GroundTruth:
    questions = {}
    for _, rec in read_jsonl(path):
        chains = {
            c["id"]: ChainTruth(c["id"], Source(c["source"]), c["text"], bool(c["supports"]))
            for c in rec["chains"]
        }
        questions[rec["question_id"]] = QuestionTruth(
            question_id=rec["question_id"],
            question=rec["question"],
            gold=rec["gold"],
            distractor=rec["distractor"],
            chains=chains,
        )
    return GroundTruth(questions=questions)
