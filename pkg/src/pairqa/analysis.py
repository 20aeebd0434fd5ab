"""Conflict diagnostics: conflicting rate, binned EM breakdowns,
pair-type distributions, and label confusion matrices.

The conflicting rate of a question is ``N_A * (M - M_A) / (N * M)``:
the fraction of (generated, retrieved) pairs where the retrieved passage
contains a gold answer string and the generated one does not. Answer
containment, not discriminator output, defines it.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import QAExample, contains_answer, exact_match
from .errors import ContractViolation
from .scoring import CompatibilityMatrix, PairType, classify_pair

logger = logging.getLogger(__name__)

# Left-closed bins; the last bin includes 1.0.
BIN_EDGES = ((0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5), (0.5, 1.0))


@dataclass(frozen=True)
class ConflictStats:
    question_id: str
    n: int
    m: int
    n_a: int
    m_a: int
    conflicting_rate: float

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "n": self.n,
            "m": self.m,
            "n_a": self.n_a,
            "m_a": self.m_a,
            "conflicting_rate": self.conflicting_rate,
        }


@dataclass(frozen=True)
class Bin:
    lower: float
    upper: float
    count: int
    subset_fraction: float
    em_by_method: Mapping[str, float]


@dataclass(frozen=True)
class BinReport:
    bins: tuple[Bin, ...]
    total: int
    excluded: int


def conflicting_rate(example: QAExample) -> ConflictStats:
    if example.n < 1:
        raise ContractViolation(f"{example.question_id}: empty retrieved pool")
    if example.m < 1:
        raise ContractViolation(f"{example.question_id}: empty generated pool")
    n_a = sum(contains_answer(c, example.answers) for c in example.retrieved)
    m_a = sum(contains_answer(c, example.answers) for c in example.generated)
    rate = n_a * (example.m - m_a) / (example.n * example.m)
    return ConflictStats(
        question_id=example.question_id,
        n=example.n,
        m=example.m,
        n_a=n_a,
        m_a=m_a,
        conflicting_rate=rate,
    )


def bin_index(rate: float) -> int:
    """Index into BIN_EDGES; bins are left-closed, the last one closed."""
    if not 0.0 <= rate <= 1.0:
        raise ContractViolation(f"conflicting rate {rate!r} outside [0,1]")
    for idx, (lower, upper) in enumerate(BIN_EDGES):
        if lower <= rate < upper:
            return idx
    return len(BIN_EDGES) - 1


def bin_report(
    stats: Sequence[ConflictStats],
    predictions: Mapping[str, Mapping[str, str]],
    examples: Iterable[QAExample],
) -> BinReport:
    """Per-bin EM for each method in ``predictions`` (method -> qid -> answer).

    Questions missing a prediction for any method are excluded entirely,
    with a warning, so all methods are compared on the same subset.
    """
    answers = {ex.question_id: ex.answers for ex in examples}
    methods = sorted(predictions)
    kept: list[tuple[int, str]] = []
    excluded = 0
    for stat in stats:
        if stat.question_id not in answers:
            raise ContractViolation(f"no example for question {stat.question_id!r}")
        if any(stat.question_id not in predictions[m] for m in methods):
            logger.warning("excluding %s: missing prediction for some method", stat.question_id)
            excluded += 1
            continue
        kept.append((bin_index(stat.conflicting_rate), stat.question_id))
    total = len(kept)
    bins = []
    for idx, (lower, upper) in enumerate(BIN_EDGES):
        qids = [qid for b, qid in kept if b == idx]
        em_by_method = {}
        for method in methods:
            if qids:
                hits = sum(
                    exact_match(predictions[method][qid], answers[qid]).exact_match for qid in qids
                )
                em_by_method[method] = hits / len(qids)
            else:
                em_by_method[method] = 0.0
        bins.append(
            Bin(
                lower=lower,
                upper=upper,
                count=len(qids),
                subset_fraction=(len(qids) / total) if total else 0.0,
                em_by_method=em_by_method,
            )
        )
    return BinReport(bins=tuple(bins), total=total, excluded=excluded)


def pair_type_distribution(matrices: Sequence[CompatibilityMatrix]) -> dict[PairType, float]:
    """Fraction of each pair type over all cells of all complete matrices."""
    counts = {t: 0 for t in PairType}
    total = 0
    for matrix in matrices:
        if not matrix.complete:
            logger.warning("excluding incomplete matrix for %s", matrix.question_id)
            continue
        for row in matrix.scores:
            for cell in row:
                counts[classify_pair(cell)] += 1
                total += 1
    if total == 0:
        raise ContractViolation("no complete matrices to classify")
    return {t: counts[t] / total for t in PairType}


def label_confusion(
    predicted: Sequence[PairType], annotated: Sequence[PairType]
) -> tuple[dict[PairType, dict[PairType, int]], float]:
    """3x3 counts[predicted][annotated] and overall accuracy."""
    if len(predicted) != len(annotated):
        raise ContractViolation("predicted and annotated lists differ in length")
    if not predicted:
        raise ContractViolation("cannot build a confusion matrix from empty lists")
    counts = {p: {a: 0 for a in PairType} for p in PairType}
    agree = 0
    for p, a in zip(predicted, annotated):
        counts[p][a] += 1
        agree += p is a
    return counts, agree / len(predicted)


def bin_report_rows(report: BinReport) -> Iterable[dict]:
    for b in report.bins:
        for method, em in sorted(b.em_by_method.items()):
            yield {
                "bin_lower": b.lower,
                "bin_upper": b.upper,
                "fraction": b.subset_fraction,
                "method": method,
                "em": em,
            }


def write_bin_report_csv(path: str | Path, report: BinReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["bin_lower", "bin_upper", "fraction", "method", "em"])
        writer.writeheader()
        for row in bin_report_rows(report):
            writer.writerow(row)


def format_bin_report(report: BinReport) -> str:
    methods = sorted(report.bins[0].em_by_method) if report.bins else []
    header = ["bin", "subset%"] + [f"EM({m})" for m in methods]
    lines = ["  ".join(f"{h:>14}" for h in header)]
    for b in report.bins:
        row = [f"{b.lower:.1f} - {b.upper:.1f}", f"{100 * b.subset_fraction:13.1f}%"]
        row += [f"{100 * b.em_by_method[m]:14.1f}" for m in methods]
        lines.append("  ".join(f"{c:>14}" for c in row))
    lines.append(f"questions: {report.total} (excluded: {report.excluded})")
    return "\n".join(lines)
