"""Silver label mining from prediction flips of a QA model.

Evidentiality labels come from leave-one-out: a retrieved passage is
positive when dropping it flips the reader from correct to incorrect,
negative on the reverse flip. Consistency labels evaluate four input
configurations per (generated, retrieved) pair:

    I   all retrieved passages
    II  all retrieved minus the target retrieved passage
    III all retrieved plus the target generated passage
    IV  all retrieved minus the target retrieved, plus the target generated

A pair is consistent when II is incorrect and I, III, IV are all correct;
conflicting when I is correct and II, III, IV are all incorrect. Both
patterns require (I correct, II incorrect), so III and IV are only ever
evaluated behind that gate; every non-gated pair is undetermined without
issuing the extra calls.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import QAExample, exact_match
from .errors import ContractViolation, PipelineError
from .lineio import write_jsonl
from .providers import PredictRequest

logger = logging.getLogger(__name__)


class Config(Enum):
    I_FULL = "I"
    II_DROP_RP = "II"
    III_ADD_LP = "III"
    IV_SWAP_LP_FOR_RP = "IV"


class Verdict(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNDETERMINED = "undetermined"


class LabelKind(Enum):
    EVIDENTIALITY = "evidentiality"
    CONSISTENCY = "consistency"


@dataclass(frozen=True)
class ConfigOutcome:
    config: Config
    prediction: str
    correct: bool


@dataclass(frozen=True)
class SilverLabel:
    question_id: str
    kind: LabelKind
    rp_index: int
    verdict: Verdict
    outcomes: tuple[ConfigOutcome, ...]
    lp_index: int | None = None
    note: str | None = None

    def __post_init__(self):
        if self.kind is LabelKind.CONSISTENCY and self.lp_index is None:
            raise ContractViolation("consistency label requires lp_index")
        if self.kind is LabelKind.EVIDENTIALITY and self.lp_index is not None:
            raise ContractViolation("evidentiality label must not carry lp_index")


def evidentiality_verdict(full_correct: bool, drop_correct: bool) -> Verdict:
    if full_correct and not drop_correct:
        return Verdict.POSITIVE
    if not full_correct and drop_correct:
        return Verdict.NEGATIVE
    return Verdict.UNDETERMINED


def consistency_verdict(outcomes: Sequence[ConfigOutcome]) -> Verdict:
    """Pure function of the configuration correctness booleans."""
    by_config = {o.config: o.correct for o in outcomes}
    if Config.I_FULL not in by_config or Config.II_DROP_RP not in by_config:
        return Verdict.UNDETERMINED
    gate = by_config[Config.I_FULL] and not by_config[Config.II_DROP_RP]
    if not gate or Config.III_ADD_LP not in by_config or Config.IV_SWAP_LP_FOR_RP not in by_config:
        return Verdict.UNDETERMINED
    iii, iv = by_config[Config.III_ADD_LP], by_config[Config.IV_SWAP_LP_FOR_RP]
    if iii and iv:
        return Verdict.POSITIVE
    if not iii and not iv:
        return Verdict.NEGATIVE
    return Verdict.UNDETERMINED


class _QuestionRun:
    """Shared prediction plumbing for one question's mining pass."""

    def __init__(self, example: QAExample, predictor):
        self.example = example
        self.predictor = predictor
        self.retrieved_blocks = [chain.text() for chain in example.retrieved]

    def predict(self, blocks: Sequence[str]) -> tuple[str, bool]:
        req = PredictRequest(question=self.example.question, passages=tuple(blocks))
        prediction = self.predictor.predict(req)
        verdict = exact_match(prediction, self.example.answers)
        return prediction, verdict.exact_match

    def drop(self, j: int) -> list[str]:
        return self.retrieved_blocks[:j] + self.retrieved_blocks[j + 1 :]


def mine_evidentiality(example: QAExample, predictor) -> list[SilverLabel]:
    """Leave-one-out evidentiality labels for every retrieved passage."""
    if example.n < 2:
        raise ContractViolation(f"{example.question_id}: leave-one-out mining needs N >= 2")
    run = _QuestionRun(example, predictor)
    labels = []
    try:
        full_pred, full_ok = run.predict(run.retrieved_blocks)
    except PipelineError as exc:
        logger.warning("%s: base prediction failed: %s", example.question_id, exc)
        return [
            SilverLabel(
                question_id=example.question_id,
                kind=LabelKind.EVIDENTIALITY,
                rp_index=j,
                verdict=Verdict.UNDETERMINED,
                outcomes=(),
                note=f"predictor error: {exc}",
            )
            for j in range(example.n)
        ]
    full_outcome = ConfigOutcome(Config.I_FULL, full_pred, full_ok)
    for j in range(example.n):
        try:
            drop_pred, drop_ok = run.predict(run.drop(j))
        except PipelineError as exc:
            labels.append(
                SilverLabel(
                    question_id=example.question_id,
                    kind=LabelKind.EVIDENTIALITY,
                    rp_index=j,
                    verdict=Verdict.UNDETERMINED,
                    outcomes=(full_outcome,),
                    note=f"predictor error: {exc}",
                )
            )
            continue
        labels.append(
            SilverLabel(
                question_id=example.question_id,
                kind=LabelKind.EVIDENTIALITY,
                rp_index=j,
                verdict=evidentiality_verdict(full_ok, drop_ok),
                outcomes=(full_outcome, ConfigOutcome(Config.II_DROP_RP, drop_pred, drop_ok)),
            )
        )
    return labels


def mine_consistency(example: QAExample, predictor) -> list[SilverLabel]:
    """Four-configuration consistency labels for every (lp, rp) pair.

    Per question this issues one call for I, one per retrieved passage for
    II, and III/IV calls only for gated pairs, so the total stays within
    N + 1 + 2 * (number of gated pairs) before caching.
    """
    if example.n < 2 or example.m < 1:
        raise ContractViolation(f"{example.question_id}: consistency mining needs N >= 2 and M >= 1")
    run = _QuestionRun(example, predictor)

    def undetermined(i: int, j: int, outcomes: tuple[ConfigOutcome, ...], note: str | None = None):
        return SilverLabel(
            question_id=example.question_id,
            kind=LabelKind.CONSISTENCY,
            rp_index=j,
            lp_index=i,
            verdict=Verdict.UNDETERMINED,
            outcomes=outcomes,
            note=note,
        )

    try:
        full_pred, full_ok = run.predict(run.retrieved_blocks)
    except PipelineError as exc:
        logger.warning("%s: base prediction failed: %s", example.question_id, exc)
        return [
            undetermined(i, j, (), f"predictor error: {exc}")
            for i in range(example.m)
            for j in range(example.n)
        ]
    outcome_i = ConfigOutcome(Config.I_FULL, full_pred, full_ok)

    outcome_ii: list[ConfigOutcome | None] = []
    for j in range(example.n):
        try:
            pred, ok = run.predict(run.drop(j))
            outcome_ii.append(ConfigOutcome(Config.II_DROP_RP, pred, ok))
        except PipelineError as exc:
            logger.warning("%s: config II failed for rp %d: %s", example.question_id, j, exc)
            outcome_ii.append(None)

    labels = []
    for i, lp in enumerate(example.generated):
        lp_block = lp.text()
        outcome_iii: ConfigOutcome | None = None
        iii_failed: str | None = None
        for j in range(example.n):
            o_ii = outcome_ii[j]
            if o_ii is None:
                labels.append(undetermined(i, j, (outcome_i,), "predictor error on config II"))
                continue
            gate = full_ok and not o_ii.correct
            if not gate:
                labels.append(undetermined(i, j, (outcome_i, o_ii)))
                continue
            if outcome_iii is None and iii_failed is None:
                try:
                    pred, ok = run.predict(run.retrieved_blocks + [lp_block])
                    outcome_iii = ConfigOutcome(Config.III_ADD_LP, pred, ok)
                except PipelineError as exc:
                    iii_failed = str(exc)
            if outcome_iii is None:
                labels.append(undetermined(i, j, (outcome_i, o_ii), f"predictor error: {iii_failed}"))
                continue
            try:
                pred, ok = run.predict(run.drop(j) + [lp_block])
                outcome_iv = ConfigOutcome(Config.IV_SWAP_LP_FOR_RP, pred, ok)
            except PipelineError as exc:
                labels.append(undetermined(i, j, (outcome_i, o_ii, outcome_iii), f"predictor error: {exc}"))
                continue
            outcomes = (outcome_i, o_ii, outcome_iii, outcome_iv)
            labels.append(
                SilverLabel(
                    question_id=example.question_id,
                    kind=LabelKind.CONSISTENCY,
                    rp_index=j,
                    lp_index=i,
                    verdict=consistency_verdict(outcomes),
                    outcomes=outcomes,
                )
            )
    return labels


def label_to_training_record(label: SilverLabel, example: QAExample) -> dict:
    value = 1 if label.verdict is Verdict.POSITIVE else 0
    if label.kind is LabelKind.EVIDENTIALITY:
        return {
            "question": example.question,
            "retrieved": example.retrieved[label.rp_index].text(),
            "label": value,
        }
    return {
        "question": example.question,
        "generated": example.generated[label.lp_index].text(),
        "retrieved": example.retrieved[label.rp_index].text(),
        "label": value,
    }


def emit_training_records(
    labels: Sequence[SilverLabel],
    out: str | Path,
    examples: Iterable[QAExample],
) -> Counter:
    """Write classifier-ready records, dropping undetermined labels.

    With a single label kind the records go to ``out`` itself; when both
    kinds are present, each goes to a sibling file tagged with the kind
    (``labels.jsonl`` -> ``labels.evidentiality.jsonl`` and
    ``labels.consistency.jsonl``). Returns counts per emitted class for
    downstream loss weighting.
    """
    out = Path(out)
    by_id = {ex.question_id: ex for ex in examples}
    decided = [l for l in labels if l.verdict is not Verdict.UNDETERMINED]
    kinds = sorted({l.kind for l in decided}, key=lambda k: k.value)
    counts: Counter = Counter({1: 0, 0: 0})

    def records_for(kind: LabelKind):
        for label in decided:
            if label.kind is not kind:
                continue
            example = by_id.get(label.question_id)
            if example is None:
                raise ContractViolation(f"no example for mined label {label.question_id!r}")
            record = label_to_training_record(label, example)
            counts[record["label"]] += 1
            yield record

    if len(kinds) <= 1:
        kind = kinds[0] if kinds else LabelKind.EVIDENTIALITY
        write_jsonl(out, records_for(kind) if kinds else iter(()))
    else:
        for kind in kinds:
            target = out.with_name(f"{out.stem}.{kind.value}{out.suffix or '.jsonl'}")
            write_jsonl(target, records_for(kind))
    return counts


def audit_records(labels: Sequence[SilverLabel]) -> Iterable[dict]:
    """One record per configuration outcome, for the mining audit log."""
    for label in labels:
        for outcome in label.outcomes:
            yield {
                "question_id": label.question_id,
                "kind": label.kind.value,
                "lp_index": label.lp_index,
                "rp_index": label.rp_index,
                "config": outcome.config.value,
                "prediction": outcome.prediction,
                "correct": outcome.correct,
                "verdict": label.verdict.value,
            }
