"""Clients and offline substitutes for the three neural services.

Wire schemas (one JSON object per call):

* scorer:    ``{"kind", "question", "retrieved", "generated"}`` ->
  ``{"probability": number}``
* predictor: ``{"question", "passages": [str, ...]}`` -> ``{"answer": str}``
* generator: ``{"question", "n", "mode"}`` ->
  ``{"passages": [[str, ...], ...]}``

Remote calls retry with exponential backoff and go through an on-disk
response cache keyed by a content hash of the request body, so that
re-running a mining or scoring pass replays identical bytes. Backends are
duck-typed: a scorer exposes ``score(req) -> float`` and a predictor
``predict(req) -> str``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import requests

from .corpus import Passage, PassageChain, QAExample, Source, text_contains_answer
from .errors import ContractViolation, MissingScoreError, ProtocolError, TransportError
from .lineio import dumps_canonical, read_jsonl

logger = logging.getLogger(__name__)

SINGLE_HOP_PROMPT = (
    "Provide a background document from Wikipedia to answer the given question. "
    "\n\n {question} \n\n"
)
MULTI_HOP_PROMPT = (
    "You are an assistant designed to provide a chain of two 100-word documents "
    "from Wikipedia that can be combined together to answer the user's question. "
    'Here\'s an example of your output format: Document 1: ""\n\n Document 2: ""\n\n {question}'
)
DOC1_MARKER = "Document 1:"
DOC2_MARKER = "Document 2:"


class GenerationMode(Enum):
    SINGLE_HOP_BACKGROUND = "single_hop_background"
    MULTI_HOP_CHAIN = "multi_hop_chain"


class ScoreKind(Enum):
    EVIDENTIALITY = "evidentiality"
    CONSISTENCY = "consistency"


@dataclass(frozen=True)
class GenerationRequest:
    question: str
    num_passages: int
    mode: GenerationMode = GenerationMode.SINGLE_HOP_BACKGROUND

    def __post_init__(self):
        if self.num_passages < 1:
            raise ContractViolation("num_passages must be >= 1")

    def prompt(self) -> str:
        template = (
            SINGLE_HOP_PROMPT
            if self.mode is GenerationMode.SINGLE_HOP_BACKGROUND
            else MULTI_HOP_PROMPT
        )
        return template.format(question=self.question)

    def wire_body(self) -> dict:
        return {"question": self.question, "n": self.num_passages, "mode": self.mode.value}


@dataclass(frozen=True)
class ScoreRequest:
    """One discriminator query. The id fields are not part of the wire body;
    they key the file-backed store and make cache entries auditable."""

    kind: ScoreKind
    question: str
    retrieved_text: str
    generated_text: str | None = None
    question_id: str | None = None
    retrieved_id: str | None = None
    generated_id: str | None = None

    def __post_init__(self):
        if self.kind is ScoreKind.CONSISTENCY and self.generated_text is None:
            raise ContractViolation("consistency request requires generated_text")
        if self.kind is ScoreKind.EVIDENTIALITY and self.generated_text is not None:
            raise ContractViolation("evidentiality request must not carry generated_text")

    def wire_body(self) -> dict:
        return {
            "kind": self.kind.value,
            "question": self.question,
            "retrieved": self.retrieved_text,
            "generated": self.generated_text,
        }


@dataclass(frozen=True)
class PredictRequest:
    question: str
    passages: tuple[str, ...]

    def __post_init__(self):
        if not self.passages:
            raise ContractViolation("predict request requires at least one passage block")

    def wire_body(self) -> dict:
        return {"question": self.question, "passages": list(self.passages)}


class ResponseCache:
    """Persistent response store, one JSON file per request hash.

    Writes are atomic (temp file + rename) and serialized by a lock, so
    concurrent workers racing on the same key settle on identical bytes.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @staticmethod
    def key(service: str, body: Mapping) -> str:
        payload = dumps_canonical({"service": service, "body": body})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def get(self, service: str, body: Mapping) -> dict | None:
        path = self.root / f"{self.key(service, body)}.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def put(self, service: str, body: Mapping, response: Mapping) -> None:
        path = self.root / f"{self.key(service, body)}.json"
        data = dumps_canonical(dict(response))
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(data)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise


def _post_json(
    url: str,
    body: Mapping,
    token: str | None,
    max_retries: int,
    backoff: float,
    timeout: float,
) -> dict:
    headers = {"Content-Type": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    attempt = 0
    while True:
        attempt += 1
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            if attempt > max_retries:
                raise TransportError(
                    f"POST {url} failed after {attempt} attempts: {exc}", attempts=attempt
                ) from exc
            delay = backoff * (2 ** (attempt - 1))
            logger.warning("POST %s attempt %d failed (%s); retrying in %.2fs", url, attempt, exc, delay)
            time.sleep(delay)
            continue
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"POST {url}: response is not JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ProtocolError(f"POST {url}: response is not an object")
        return payload


def _clamp_probability(value, origin: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ProtocolError(f"{origin}: probability is not a number: {value!r}")
    p = float(value)
    if p < 0.0 or p > 1.0:
        logger.warning("%s: probability %r outside [0,1]; clamping", origin, p)
        p = min(1.0, max(0.0, p))
    return p


class RemoteScorer:
    """HTTP client for the discriminator scoring service."""

    def __init__(
        self,
        url: str,
        token: str | None = None,
        cache: ResponseCache | None = None,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 30.0,
    ):
        self.url = url
        self.token = token
        self.cache = cache
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout

    def score(self, req: ScoreRequest) -> float:
        body = req.wire_body()
        if self.cache is not None:
            cached = self.cache.get("scorer", body)
            if cached is not None:
                return _clamp_probability(cached.get("probability"), "scorer cache")
        payload = _post_json(self.url, body, self.token, self.max_retries, self.backoff, self.timeout)
        if "probability" not in payload:
            raise ProtocolError("scorer response missing 'probability'")
        if self.cache is not None:
            self.cache.put("scorer", body, payload)
        return _clamp_probability(payload["probability"], self.url)


class RemotePredictor:
    """HTTP client for the QA predictor (reader) service."""

    def __init__(
        self,
        url: str,
        token: str | None = None,
        cache: ResponseCache | None = None,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
    ):
        self.url = url
        self.token = token
        self.cache = cache
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout

    def predict(self, req: PredictRequest) -> str:
        body = req.wire_body()
        if self.cache is not None:
            cached = self.cache.get("predictor", body)
            if cached is not None and isinstance(cached.get("answer"), str):
                return cached["answer"]
        payload = _post_json(self.url, body, self.token, self.max_retries, self.backoff, self.timeout)
        answer = payload.get("answer")
        if not isinstance(answer, str):
            raise ProtocolError("predictor response missing string 'answer'")
        if self.cache is not None:
            self.cache.put("predictor", body, payload)
        return answer


class CachingBackend:
    """Wrap any scorer/predictor with a ResponseCache (for offline backends
    the cache doubles as a replay log)."""

    def __init__(self, inner, cache: ResponseCache):
        self.inner = inner
        self.cache = cache

    def score(self, req: ScoreRequest) -> float:
        body = req.wire_body()
        cached = self.cache.get("scorer", body)
        if cached is not None:
            return _clamp_probability(cached.get("probability"), "scorer cache")
        value = self.inner.score(req)
        self.cache.put("scorer", body, {"probability": value})
        return value

    def predict(self, req: PredictRequest) -> str:
        body = req.wire_body()
        cached = self.cache.get("predictor", body)
        if cached is not None and isinstance(cached.get("answer"), str):
            return cached["answer"]
        answer = self.inner.predict(req)
        self.cache.put("predictor", body, {"answer": answer})
        return answer


class FileScoreStore:
    """Offline scorer backed by stored probabilities.

    Keys are ``(question_id, generated_id, retrieved_id)`` with
    ``generated_id=None`` for evidentiality entries. A matrix dump can be
    loaded back as a store, which makes score audits round-trip.
    """

    def __init__(self, scores: Mapping[tuple[str, str | None, str], float]):
        self._scores = dict(scores)

    @classmethod
    def from_matrix_dump(cls, path: str | Path, examples: Iterable[QAExample]) -> "FileScoreStore":
        by_id = {ex.question_id: ex for ex in examples}
        scores: dict[tuple[str, str | None, str], float] = {}
        for lineno, rec in read_jsonl(path):
            qid = rec["question_id"]
            example = by_id.get(qid)
            if example is None:
                raise ContractViolation(f"line {lineno}: unknown question_id {qid!r} in matrix dump")
            i, j = int(rec["i"]), int(rec["j"])
            lp_id = example.generated[i].id
            rp_id = example.retrieved[j].id
            scores[(qid, None, rp_id)] = float(rec["evidentiality"])
            scores[(qid, lp_id, rp_id)] = float(rec["consistency"])
        return cls(scores)

    def score(self, req: ScoreRequest) -> float:
        if req.question_id is None or req.retrieved_id is None:
            raise ContractViolation("file-backed scorer requires question_id and retrieved_id")
        gen_id = req.generated_id if req.kind is ScoreKind.CONSISTENCY else None
        if req.kind is ScoreKind.CONSISTENCY and gen_id is None:
            raise ContractViolation("file-backed scorer requires generated_id for consistency")
        key = (req.question_id, gen_id, req.retrieved_id)
        try:
            return self._scores[key]
        except KeyError:
            raise MissingScoreError(key) from None


class LexicalMockScorer:
    """Answer-string containment in place of trained discriminators.

    Evidentiality is 1 iff the retrieved text contains a gold alias;
    consistency is 1 iff the generated text does. Thresholded at 0.5 this
    reproduces same-answer matching.
    """

    def __init__(self, answers_by_key: Mapping[str, Sequence[str]]):
        self._answers = {k: tuple(v) for k, v in answers_by_key.items()}

    @classmethod
    def from_examples(cls, examples: Iterable[QAExample]) -> "LexicalMockScorer":
        table: dict[str, tuple[str, ...]] = {}
        for ex in examples:
            table[ex.question_id] = ex.answers
            table.setdefault(ex.question, ex.answers)
        return cls(table)

    def score(self, req: ScoreRequest) -> float:
        answers = None
        if req.question_id is not None:
            answers = self._answers.get(req.question_id)
        if answers is None:
            answers = self._answers.get(req.question)
        if answers is None:
            raise ContractViolation(f"lexical scorer has no answers for question {req.question!r}")
        target = req.retrieved_text if req.kind is ScoreKind.EVIDENTIALITY else req.generated_text
        return 1.0 if text_contains_answer(target or "", answers) else 0.0


def split_two_documents(raw: str) -> tuple[str, str]:
    """Parse a two-document generation into its segments.

    Raises ProtocolError when either literal marker is missing or the
    second precedes the first.
    """
    first = raw.find(DOC1_MARKER)
    second = raw.find(DOC2_MARKER)
    if first < 0 or second < 0 or second < first:
        raise ProtocolError("multi-hop generation is missing Document 1/Document 2 markers")
    seg1 = raw[first + len(DOC1_MARKER) : second].strip()
    seg2 = raw[second + len(DOC2_MARKER) :].strip()
    if not seg1 or not seg2:
        raise ProtocolError("multi-hop generation has an empty document segment")
    return seg1, seg2


class RemoteGenerator:
    """HTTP client for the passage generation service."""

    def __init__(
        self,
        url: str,
        token: str | None = None,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
    ):
        self.url = url
        self.token = token
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout

    def generate(self, req: GenerationRequest) -> list[PassageChain]:
        payload = _post_json(
            self.url, req.wire_body(), self.token, self.max_retries, self.backoff, self.timeout
        )
        raw_passages = payload.get("passages")
        if not isinstance(raw_passages, list):
            raise ProtocolError("generator response missing 'passages' array")
        chains: list[PassageChain] = []
        for index, item in enumerate(raw_passages[: req.num_passages]):
            try:
                chains.append(_parse_generated_item(item, req.mode, index))
            except ProtocolError as exc:
                logger.warning("skipping unparseable generated passage %d: %s", index, exc)
        return chains


def _parse_generated_item(item, mode: GenerationMode, index: int) -> PassageChain:
    if isinstance(item, str):
        texts = [item]
    elif isinstance(item, list) and all(isinstance(t, str) for t in item):
        texts = list(item)
    else:
        raise ProtocolError(f"generated passage {index} is neither a string nor a string array")
    if mode is GenerationMode.MULTI_HOP_CHAIN and len(texts) == 1:
        texts = list(split_two_documents(texts[0]))
    if not texts or not all(t.strip() for t in texts):
        raise ProtocolError(f"generated passage {index} has empty text")
    segments = tuple(
        Passage(id=f"g{index}" if len(texts) == 1 else f"g{index}.{k}", text=t, source=Source.LLM_GENERATED)
        for k, t in enumerate(texts)
    )
    return PassageChain(segments=segments, source=Source.LLM_GENERATED)


def generate_passages(req: GenerationRequest, generator: RemoteGenerator) -> list[PassageChain]:
    """Fetch up to ``req.num_passages`` LLM-generated chains."""
    return generator.generate(req)
