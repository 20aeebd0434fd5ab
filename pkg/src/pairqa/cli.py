"""Pipeline orchestration: one subcommand per stage, file handoffs between
stages, a single nested config file with dotted-name flag overrides.

    pairqa score  --config run.json --dataset data/dev.jsonl --out runs/a
    pairqa match  --strategy optimal --out runs/a
    pairqa serialize --variant pairwise --budget 400 --out runs/a

Every field of the config document can be overridden on the command line
with a flag of the same dotted name, e.g. ``--scorer.backend remote``.
Endpoint URLs and auth tokens can also come from the environment
(PAIRQA_SCORER_URL, PAIRQA_SCORER_TOKEN, and likewise for PREDICTOR and
GENERATOR; PAIRQA_TOKEN is the shared fallback).

Per-item failures are collected into the stage report and never abort the
run unless ``--strict`` is set. Given identical config, seeds, and cached
provider responses, every stage writes byte-identical outputs.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from . import analysis, matching, mining, readerio, scoring, sim
from .corpus import HopType, Passage, PassageChain, QAExample, read_examples, write_examples
from .errors import ContractViolation, PipelineError
from .lineio import read_jsonl, write_jsonl
from .providers import (
    CachingBackend,
    FileScoreStore,
    GenerationMode,
    GenerationRequest,
    LexicalMockScorer,
    RemoteGenerator,
    RemotePredictor,
    RemoteScorer,
    ResponseCache,
)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: dict[str, Any] = {
    "dataset": None,
    "out": "out",
    "workers": 1,
    "seed": 0,
    "strict": False,
    "cache_dir": None,
    "scorer": {"backend": "lexical", "url": None, "token": None, "store": None},
    "predictor": {"backend": "sim", "url": None, "token": None, "truth": None},
    "generator": {"url": None, "token": None, "n": 10, "mode": "single_hop_background"},
    "scoring": {"mode": "cutoff"},
    "matching": {"strategy": "optimal", "matrices": None},
    "serialize": {"variant": "pairwise", "budget": None, "matchings": None},
    "mine": {"kinds": ["evidentiality", "consistency"]},
    "analyze": {"predictions": {}, "annotations": None, "matrices": None},
    "simulate": {
        "num_questions": 100,
        "n": 10,
        "m": 10,
        "p_retrieved_evidential": 0.5,
        "p_llm_hallucinated": 0.5,
        "single_pivot": True,
        "hop_type": "single",
        "check_questions": 50,
        "sweep": [0.0, 0.25, 0.5, 0.75, 1.0],
    },
}

_ENV_PREFIX = "PAIRQA"


@dataclass
class PipelineConfig:
    """Validated view over the merged config document."""

    raw: dict
    dataset: str | None
    out: Path
    workers: int
    seed: int
    strict: bool
    cache: ResponseCache | None
    scoring_mode: scoring.CombineMode
    strategy: matching.Strategy
    variant: readerio.Variant
    budget: int | None

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        try:
            mode = scoring.CombineMode(raw["scoring"]["mode"])
            strategy = matching.Strategy(raw["matching"]["strategy"])
            variant = readerio.Variant(raw["serialize"]["variant"])
        except ValueError as exc:
            raise ContractViolation(f"bad config enum value: {exc}") from None
        workers = int(raw["workers"])
        if workers < 1:
            raise ContractViolation("workers must be >= 1")
        dataset = raw["dataset"]
        if dataset is not None and not Path(dataset).exists():
            raise ContractViolation(f"dataset file does not exist: {dataset}")
        cache_dir = raw.get("cache_dir")
        cache = ResponseCache(cache_dir) if cache_dir else None
        budget = raw["serialize"]["budget"]
        return cls(
            raw=raw,
            dataset=dataset,
            out=Path(raw["out"]),
            workers=workers,
            seed=int(raw["seed"]),
            strict=bool(raw["strict"]),
            cache=cache,
            scoring_mode=mode,
            strategy=strategy,
            variant=variant,
            budget=int(budget) if budget is not None else None,
        )


def derive_seed(base: int, item_key: str) -> int:
    """Stable per-item seed so parallel workers never share RNG streams."""
    digest = hashlib.sha256(f"{base}:{item_key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _coerce_like(current: Any, text: str) -> Any:
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ContractViolation(f"expected a boolean, got {text!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, (dict, list)):
        return json.loads(text)
    if text == "null":
        return None
    return text


def apply_dotted_overrides(config: dict, pairs: Sequence[tuple[str, str]]) -> dict:
    for dotted, text in pairs:
        node = config
        parts = dotted.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                raise ContractViolation(f"unknown config section {part!r} in --{dotted}")
            node = nxt
        leaf = parts[-1]
        if leaf not in node:
            raise ContractViolation(f"unknown config field --{dotted}")
        node[leaf] = _coerce_like(node[leaf], text)
    return config


def _parse_extra_flags(extras: Sequence[str]) -> list[tuple[str, str]]:
    pairs = []
    i = 0
    while i < len(extras):
        arg = extras[i]
        if not arg.startswith("--"):
            raise ContractViolation(f"unexpected argument {arg!r}")
        name = arg[2:]
        if "=" in name:
            name, value = name.split("=", 1)
        else:
            i += 1
            if i >= len(extras):
                raise ContractViolation(f"flag --{name} is missing a value")
            value = extras[i]
        pairs.append((name, value))
        i += 1
    return pairs


def _env(name: str) -> str | None:
    return os.environ.get(f"{_ENV_PREFIX}_{name}")


def _backend_url(spec: dict, service: str) -> str:
    url = spec.get("url") or _env(f"{service.upper()}_URL")
    if not url:
        raise ContractViolation(
            f"{service} backend 'remote' needs a url (config or {_ENV_PREFIX}_{service.upper()}_URL)"
        )
    return url


def _backend_token(spec: dict, service: str) -> str | None:
    return spec.get("token") or _env(f"{service.upper()}_TOKEN") or _env("TOKEN")


def build_scorer(cfg: PipelineConfig, examples: Sequence[QAExample]):
    spec = cfg.raw["scorer"]
    backend = spec["backend"]
    if backend == "lexical":
        scorer = LexicalMockScorer.from_examples(examples)
    elif backend == "file":
        store = spec.get("store")
        if not store:
            raise ContractViolation("scorer backend 'file' needs scorer.store (a matrix dump path)")
        scorer = FileScoreStore.from_matrix_dump(store, examples)
    elif backend == "remote":
        return RemoteScorer(
            _backend_url(spec, "scorer"), _backend_token(spec, "scorer"), cache=cfg.cache
        )
    else:
        raise ContractViolation(f"unknown scorer backend {backend!r}")
    if cfg.cache is not None:
        return CachingBackend(scorer, cfg.cache)
    return scorer


def build_predictor(cfg: PipelineConfig):
    spec = cfg.raw["predictor"]
    backend = spec["backend"]
    if backend == "sim":
        truth_path = spec.get("truth")
        if not truth_path:
            raise ContractViolation("predictor backend 'sim' needs predictor.truth (a truth file)")
        predictor = sim.SimPredictor(sim.load_truth(truth_path))
        if cfg.cache is not None:
            return CachingBackend(predictor, cfg.cache)
        return predictor
    if backend == "remote":
        return RemotePredictor(
            _backend_url(spec, "predictor"), _backend_token(spec, "predictor"), cache=cfg.cache
        )
    raise ContractViolation(f"unknown predictor backend {backend!r}")


def _map_items(
    items: Sequence,
    fn: Callable,
    cfg: PipelineConfig,
    errors: list[dict],
    label: str,
):
    """Run fn over items (bounded pool), collecting per-item failures."""

    def run(item):
        try:
            return ("ok", fn(item))
        except (PipelineError, ContractViolation) as exc:
            return ("err", (item, exc))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run, items))
    else:
        outcomes = [run(item) for item in items]
    results = []
    for status, payload in outcomes:
        if status == "ok":
            results.append(payload)
        else:
            item, exc = payload
            qid = getattr(item, "question_id", str(item))
            errors.append({"stage": label, "question_id": qid, "error": str(exc)})
            logger.warning("%s: %s failed: %s", label, qid, exc)
            if cfg.strict:
                raise PipelineError(f"{label} failed for {qid}: {exc}") from exc
    return results


def _load_dataset(cfg: PipelineConfig) -> tuple[list[QAExample], list[dict]]:
    if not cfg.dataset:
        raise ContractViolation("this command needs --dataset (or config dataset)")
    examples, report = read_examples(cfg.dataset)
    errors = [{"stage": "ingest", "line": e.line, "error": e.message} for e in report.errors]
    for w in report.warnings:
        logger.warning("ingest line %d: %s", w.line, w.message)
    if cfg.strict and errors:
        raise PipelineError(f"{len(errors)} malformed dataset records")
    return examples, errors


def _write_report(cfg: PipelineConfig, stage: str, payload: dict) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"{stage}_report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_generate(cfg: PipelineConfig) -> int:
    examples, errors = _load_dataset(cfg)
    spec = cfg.raw["generator"]
    mode = GenerationMode(spec["mode"])
    client = RemoteGenerator(_backend_url(spec, "generator"), _backend_token(spec, "generator"))
    num = int(spec["n"])

    def generate(example: QAExample) -> QAExample:
        chains = client.generate(GenerationRequest(example.question, num, mode))
        renamed = []
        for k, chain in enumerate(chains):
            segments = tuple(
                dataclasses.replace(seg, id=f"{example.question_id}-g{k}" + (f".{s}" if len(chain.segments) > 1 else ""))
                for s, seg in enumerate(chain.segments)
            )
            renamed.append(PassageChain(segments=segments, source=chain.source))
        return dataclasses.replace(example, generated=tuple(renamed))

    updated = _map_items(examples, generate, cfg, errors, "generate")
    out_path = cfg.out / "generated.jsonl"
    write_examples(out_path, updated)
    _write_report(cfg, "generate", {"questions": len(examples), "generated": len(updated), "errors": errors})
    print(f"generated passages for {len(updated)}/{len(examples)} questions -> {out_path}")
    return 0


def cmd_score(cfg: PipelineConfig) -> int:
    examples, errors = _load_dataset(cfg)
    scorable = [ex for ex in examples if ex.m >= 1 and ex.n >= 1]
    for ex in examples:
        if ex.m < 1 or ex.n < 1:
            errors.append({"stage": "score", "question_id": ex.question_id, "error": "empty passage pool"})
    scorer = build_scorer(cfg, scorable)

    def score(example: QAExample) -> scoring.CompatibilityMatrix:
        return scoring.build_matrix(example, scorer, cfg.scoring_mode)

    matrices = _map_items(scorable, score, cfg, errors, "score")
    incomplete = [m.question_id for m in matrices if not m.complete]
    for qid in incomplete:
        errors.append({"stage": "score", "question_id": qid, "error": "matrix incomplete"})
    out_path = cfg.out / "matrices.jsonl"
    scoring.write_matrix_dump(out_path, matrices)
    _write_report(
        cfg,
        "score",
        {
            "questions": len(examples),
            "scored": sum(1 for m in matrices if m.complete),
            "incomplete": incomplete,
            "errors": errors,
        },
    )
    print(f"scored {sum(1 for m in matrices if m.complete)}/{len(examples)} questions -> {out_path}")
    return 0


def _matrices_path(cfg: PipelineConfig, key: str) -> Path:
    configured = cfg.raw[key].get("matrices")
    return Path(configured) if configured else cfg.out / "matrices.jsonl"


def cmd_match(cfg: PipelineConfig) -> int:
    errors: list[dict] = []
    strategy = cfg.strategy
    matrices: dict[str, scoring.CompatibilityMatrix] = {}
    matrices_file = _matrices_path(cfg, "matching")
    if matrices_file.exists():
        matrices = {m.question_id: m for m in scoring.load_matrix_dump(matrices_file)}
    elif strategy in (matching.Strategy.OPTIMAL, matching.Strategy.GREEDY):
        raise ContractViolation(f"strategy {strategy.value} needs a matrix dump at {matrices_file}")

    examples: list[QAExample] = []
    if cfg.dataset:
        examples, ingest_errors = _load_dataset(cfg)
        errors.extend(ingest_errors)
    if strategy is matching.Strategy.SAME_ANSWER and not examples:
        raise ContractViolation("same-answer matching needs --dataset for gold answers")

    items: list[tuple[str, QAExample | None, scoring.CompatibilityMatrix | None]] = []
    if examples:
        for ex in examples:
            items.append((ex.question_id, ex, matrices.get(ex.question_id)))
    else:
        items = [(qid, None, matrix) for qid, matrix in matrices.items()]

    def match(item) -> matching.PairMatching:
        qid, example, matrix = item
        item_seed = derive_seed(cfg.seed, qid)
        if strategy is matching.Strategy.OPTIMAL:
            if matrix is None:
                raise PipelineError(f"{qid}: no compatibility matrix")
            return matching.match_optimal(matching.equalize_pools(matrix), qid)
        if strategy is matching.Strategy.GREEDY:
            if matrix is None:
                raise PipelineError(f"{qid}: no compatibility matrix")
            return matching.match_greedy(
                matching.equalize_pools(matrix), matching.equalize_pair_types(matrix), qid
            )
        if strategy is matching.Strategy.RANDOM:
            if matrix is not None:
                m, n = matrix.m, matrix.n
            elif example is not None:
                m, n = example.m, example.n
            else:
                raise PipelineError(f"{qid}: random matching needs a matrix or the dataset")
            result = matching.match_random(m, n, item_seed, qid)
            if matrix is not None:
                result = matching.score_matching(result, matrix.combined_grid())
            return result
        if example is None:
            raise PipelineError(f"{qid}: same-answer matching needs the dataset")
        result = matching.match_same_answer(example, item_seed)
        if matrix is not None:
            result = matching.score_matching(result, matrix.combined_grid(), resort=False)
        return result

    results = _map_items(items, match, cfg, errors, "match")
    out_path = cfg.out / "matchings.jsonl"
    write_jsonl(out_path, (r.to_record() for r in results))
    _write_report(
        cfg,
        "match",
        {"strategy": strategy.value, "matched": len(results), "errors": errors},
    )
    print(f"matched {len(results)} questions ({strategy.value}) -> {out_path}")
    return 0


def load_matchings(path: str | Path) -> list[matching.PairMatching]:
    out = []
    for lineno, rec in read_jsonl(path):
        try:
            out.append(
                matching.PairMatching(
                    question_id=rec["question_id"],
                    strategy=matching.Strategy(rec["strategy"]),
                    pairs=tuple((int(i), int(j), float(s)) for i, j, s in rec["pairs"]),
                    total_weight=float(rec["total_weight"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractViolation(f"line {lineno}: bad matching record: {exc}") from None
    return out


def cmd_mine(cfg: PipelineConfig) -> int:
    examples, errors = _load_dataset(cfg)
    predictor = build_predictor(cfg)
    kinds = set(cfg.raw["mine"]["kinds"])
    unknown = kinds - {"evidentiality", "consistency"}
    if unknown:
        raise ContractViolation(f"unknown mine kinds: {sorted(unknown)}")
    minable = []
    for ex in examples:
        if ex.n < 2:
            errors.append({"stage": "mine", "question_id": ex.question_id, "error": "needs N >= 2"})
        else:
            minable.append(ex)

    def mine_one(example: QAExample) -> list[mining.SilverLabel]:
        labels: list[mining.SilverLabel] = []
        if "evidentiality" in kinds:
            labels.extend(mining.mine_evidentiality(example, predictor))
        if "consistency" in kinds and example.m >= 1:
            labels.extend(mining.mine_consistency(example, predictor))
        return labels

    label_lists = _map_items(minable, mine_one, cfg, errors, "mine")
    labels = [label for batch in label_lists for label in batch]
    counts = {}
    cfg.out.mkdir(parents=True, exist_ok=True)
    for kind in sorted(kinds):
        kind_labels = [l for l in labels if l.kind.value == kind]
        out_path = cfg.out / f"labels.{kind}.jsonl"
        counts[kind] = dict(mining.emit_training_records(kind_labels, out_path, examples))
    audit_path = cfg.out / "mining_audit.jsonl"
    write_jsonl(audit_path, mining.audit_records(labels))
    _write_report(
        cfg,
        "mine",
        {"questions": len(minable), "labels": len(labels), "class_counts": counts, "errors": errors},
    )
    print(f"mined {len(labels)} labels over {len(minable)} questions -> {cfg.out}")
    return 0


def cmd_serialize(cfg: PipelineConfig) -> int:
    examples, errors = _load_dataset(cfg)
    matchings_file = cfg.raw["serialize"].get("matchings")
    matchings_path = Path(matchings_file) if matchings_file else cfg.out / "matchings.jsonl"
    if not matchings_path.exists():
        raise ContractViolation(f"no matchings file at {matchings_path}; run `pairqa match` first")
    matchings = {m.question_id: m for m in load_matchings(matchings_path)}
    by_id = {ex.question_id: ex for ex in examples}

    items = []
    for qid, m in matchings.items():
        example = by_id.get(qid)
        if example is None:
            errors.append({"stage": "serialize", "question_id": qid, "error": "not in dataset"})
        else:
            items.append((example, m))

    def serialize(item) -> readerio.ReaderExample:
        example, m = item
        budget = cfg.budget if cfg.budget is not None else readerio.default_budget(example.hop_type, cfg.variant)
        return readerio.serialize_variant(
            example, m, cfg.variant, budget, seed=derive_seed(cfg.seed, example.question_id)
        )

    reader_examples = _map_items(items, serialize, cfg, errors, "serialize")
    out_path = cfg.out / "reader_inputs.jsonl"
    readerio.write_reader_examples(out_path, reader_examples)
    _write_report(
        cfg,
        "serialize",
        {"variant": cfg.variant.value, "serialized": len(reader_examples), "errors": errors},
    )
    print(f"serialized {len(reader_examples)} questions ({cfg.variant.value}) -> {out_path}")
    return 0


def cmd_analyze(cfg: PipelineConfig) -> int:
    examples, errors = _load_dataset(cfg)
    usable = [ex for ex in examples if ex.m >= 1 and ex.n >= 1]
    for ex in examples:
        if ex.m < 1 or ex.n < 1:
            errors.append({"stage": "analyze", "question_id": ex.question_id, "error": "empty passage pool"})
    stats = [analysis.conflicting_rate(ex) for ex in usable]
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_jsonl(cfg.out / "conflict_stats.jsonl", (s.to_record() for s in stats))
    mean_rate = sum(s.conflicting_rate for s in stats) / len(stats) if stats else 0.0
    print(f"conflicting rate over {len(stats)} questions: mean {mean_rate:.4f}")

    predictions_cfg = cfg.raw["analyze"]["predictions"]
    if predictions_cfg:
        predictions = {
            method: readerio.ingest_predictions(path) for method, path in sorted(predictions_cfg.items())
        }
        report = analysis.bin_report(stats, predictions, usable)
        print(analysis.format_bin_report(report))
        write_jsonl(cfg.out / "bin_report.jsonl", analysis.bin_report_rows(report))
        analysis.write_bin_report_csv(cfg.out / "bin_report.csv", report)

    matrices_file = _matrices_path(cfg, "analyze")
    if matrices_file.exists():
        matrices = scoring.load_matrix_dump(matrices_file)
        distribution = analysis.pair_type_distribution(matrices)
        for pair_type in scoring.PairType:
            print(f"pair type {pair_type.value}: {100 * distribution[pair_type]:.1f}%")
        write_jsonl(
            cfg.out / "pair_types.jsonl",
            [{"type": t.value, "fraction": distribution[t]} for t in scoring.PairType],
        )

    annotations_file = cfg.raw["analyze"]["annotations"]
    if annotations_file:
        predicted, annotated = [], []
        for _, rec in read_jsonl(annotations_file):
            predicted.append(scoring.PairType(rec["predicted"]))
            annotated.append(scoring.PairType(rec["annotated"]))
        counts, accuracy = analysis.label_confusion(predicted, annotated)
        print(f"label confusion accuracy: {accuracy:.3f}")
        write_jsonl(
            cfg.out / "confusion.jsonl",
            [
                {"predicted": p.value, "annotated": a.value, "count": counts[p][a]}
                for p in scoring.PairType
                for a in scoring.PairType
            ],
        )

    _write_report(cfg, "analyze", {"questions": len(stats), "mean_conflicting_rate": mean_rate, "errors": errors})
    return 0


def cmd_simulate(cfg: PipelineConfig) -> int:
    sim_cfg = cfg.raw["simulate"]
    spec = sim.SynthSpec(
        num_questions=int(sim_cfg["num_questions"]),
        n=int(sim_cfg["n"]),
        m=int(sim_cfg["m"]),
        p_retrieved_evidential=float(sim_cfg["p_retrieved_evidential"]),
        p_llm_hallucinated=float(sim_cfg["p_llm_hallucinated"]),
        seed=cfg.seed,
        hop_type=HopType(sim_cfg["hop_type"]),
        single_pivot=bool(sim_cfg["single_pivot"]),
    )
    examples, truth = sim.generate_corpus(spec)
    cfg.out.mkdir(parents=True, exist_ok=True)
    corpus_path = cfg.out / "sim_corpus.jsonl"
    truth_path = cfg.out / "sim_truth.jsonl"
    write_examples(corpus_path, examples)
    sim.write_truth(truth_path, truth)
    print(f"synthesized {len(examples)} questions -> {corpus_path}")

    failures = 0

    examples_again, _ = sim.generate_corpus(spec)
    deterministic = [e1 == e2 for e1, e2 in zip(examples, examples_again)]
    ok = all(deterministic) and len(examples_again) == len(examples)
    print(f"{'PASS' if ok else 'FAIL'} determinism: corpus regenerates identically from seed")
    failures += 0 if ok else 1

    if spec.single_pivot:
        check = min(int(sim_cfg["check_questions"]), len(examples))
        predictor = sim.SimPredictor(truth)
        mismatches = 0
        for example in examples[:check]:
            qt = truth.questions[example.question_id]
            pivots = qt.supporting_ids(source=sim.Source.RETRIEVED)
            labels = mining.mine_consistency(example, predictor)
            for label in labels:
                rp_id = example.retrieved[label.rp_index].id
                lp_id = example.generated[label.lp_index].id
                faithful = qt.chains[lp_id].supports
                if label.verdict is mining.Verdict.POSITIVE:
                    mismatches += not (rp_id in pivots and faithful)
                elif label.verdict is mining.Verdict.NEGATIVE:
                    mismatches += not (rp_id in pivots and not faithful)
                elif rp_id in pivots:
                    mismatches += 1
        ok = mismatches == 0
        print(
            f"{'PASS' if ok else 'FAIL'} mining soundness: labels match ground truth "
            f"on {check} questions ({mismatches} mismatches)"
        )
        failures += 0 if ok else 1

    sweep = [float(p) for p in sim_cfg["sweep"]]
    means = []
    for p in sweep:
        swept_spec = dataclasses.replace(spec, p_llm_hallucinated=p)
        swept, _ = sim.generate_corpus(swept_spec)
        rates = [analysis.conflicting_rate(ex).conflicting_rate for ex in swept]
        means.append(sum(rates) / len(rates))
    ok = all(means[k] <= means[k + 1] for k in range(len(means) - 1))
    trend = ", ".join(f"{p:.2f}->{r:.3f}" for p, r in zip(sweep, means))
    print(f"{'PASS' if ok else 'FAIL'} monotonicity: mean conflicting rate nondecreasing ({trend})")
    failures += 0 if ok else 1

    _write_report(
        cfg,
        "simulate",
        {"questions": len(examples), "sweep": dict(zip(map(str, sweep), means)), "failures": failures},
    )
    return 1 if failures else 0


COMMANDS = {
    "generate": cmd_generate,
    "score": cmd_score,
    "match": cmd_match,
    "mine": cmd_mine,
    "serialize": cmd_serialize,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairqa",
        description="Compatibility-guided pairing of retrieved and generated passages.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file (nested object)")
    parser.add_argument("--dataset", help="dataset file (line-delimited records)")
    parser.add_argument("--strategy", choices=[s.value for s in matching.Strategy])
    parser.add_argument("--scoring-mode", choices=[m.value for m in scoring.CombineMode])
    parser.add_argument("--variant", choices=[v.value for v in readerio.Variant])
    parser.add_argument("--budget", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--strict", action="store_true", default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args: argparse.Namespace, extras: Sequence[str]) -> PipelineConfig:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            document = json.load(fh)
        if not isinstance(document, dict):
            raise ContractViolation("config file must hold one JSON object")
        config = _deep_merge(config, document)
    flag_map = {
        "dataset": args.dataset,
        "out": args.out,
        "seed": args.seed,
        "workers": args.workers,
        "strict": args.strict,
    }
    for key, value in flag_map.items():
        if value is not None:
            config[key] = value
    if args.strategy is not None:
        config["matching"]["strategy"] = args.strategy
    if args.scoring_mode is not None:
        config["scoring"]["mode"] = args.scoring_mode
    if args.variant is not None:
        config["serialize"]["variant"] = args.variant
    if args.budget is not None:
        config["serialize"]["budget"] = args.budget
    apply_dotted_overrides(config, _parse_extra_flags(extras))
    return PipelineConfig.from_dict(config)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args, extras)
        return COMMANDS[args.command](cfg)
    except (ContractViolation, PipelineError, OSError, json.JSONDecodeError) as exc:
        summary = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(summary, ensure_ascii=False, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
