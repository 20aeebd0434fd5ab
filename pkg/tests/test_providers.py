from __future__ import annotations

import pytest

from pairqa.errors import ContractViolation, MissingScoreError, ProtocolError, TransportError
from pairqa.providers import (
    CachingBackend,
    FileScoreStore,
    GenerationMode,
    GenerationRequest,
    LexicalMockScorer,
    MULTI_HOP_PROMPT,
    PredictRequest,
    RemoteGenerator,
    RemotePredictor,
    RemoteScorer,
    ResponseCache,
    ScoreKind,
    ScoreRequest,
    SINGLE_HOP_PROMPT,
    split_two_documents,
)

from conftest import make_example


def evid_request(**overrides):
    fields = dict(
        kind=ScoreKind.EVIDENTIALITY,
        question="who won",
        retrieved_text="Don Shula won",
        question_id="q1",
        retrieved_id="r0",
    )
    fields.update(overrides)
    return ScoreRequest(**fields)


class TestRequestContracts:
    def test_consistency_needs_generated_text(self):
        with pytest.raises(ContractViolation):
            ScoreRequest(kind=ScoreKind.CONSISTENCY, question="q", retrieved_text="r")

    def test_evidentiality_forbids_generated_text(self):
        with pytest.raises(ContractViolation):
            ScoreRequest(
                kind=ScoreKind.EVIDENTIALITY, question="q", retrieved_text="r", generated_text="g"
            )

    def test_predict_needs_passages(self):
        with pytest.raises(ContractViolation):
            PredictRequest(question="q", passages=())

    def test_generation_needs_positive_count(self):
        with pytest.raises(ContractViolation):
            GenerationRequest(question="q", num_passages=0)

    def test_wire_bodies(self):
        req = evid_request()
        assert req.wire_body() == {
            "kind": "evidentiality",
            "question": "who won",
            "retrieved": "Don Shula won",
            "generated": None,
        }
        assert PredictRequest(question="q", passages=("a", "b")).wire_body() == {
            "question": "q",
            "passages": ["a", "b"],
        }
        assert GenerationRequest("q", 3, GenerationMode.MULTI_HOP_CHAIN).wire_body() == {
            "question": "q",
            "n": 3,
            "mode": "multi_hop_chain",
        }


class TestPromptTemplates:
    def test_single_hop_template(self):
        prompt = GenerationRequest("who won", 1).prompt()
        assert prompt.startswith("Provide a background document from Wikipedia")
        assert "who won" in prompt
        assert SINGLE_HOP_PROMPT.count("{question}") == 1

    def test_multi_hop_template(self):
        prompt = GenerationRequest("who won", 1, GenerationMode.MULTI_HOP_CHAIN).prompt()
        assert "a chain of two 100-word documents" in prompt
        assert 'Document 1: ""' in prompt and 'Document 2: ""' in prompt
        assert MULTI_HOP_PROMPT.count("{question}") == 1


class TestRemoteScorer:
    def test_scores_and_records_wire_shape(self, http_service):
        http_service.responses["/score"] = {"probability": 0.73}
        scorer = RemoteScorer(http_service.url("/score"), backoff=0.0)
        assert scorer.score(evid_request()) == 0.73
        sent = http_service.requests["/score"][0]
        assert set(sent) == {"kind", "question", "retrieved", "generated"}

    def test_retries_then_succeeds(self, http_service):
        http_service.responses["/score"] = [(500, {}), (500, {}), (200, {"probability": 0.5})]
        scorer = RemoteScorer(http_service.url("/score"), max_retries=3, backoff=0.0)
        assert scorer.score(evid_request()) == 0.5
        assert len(http_service.requests["/score"]) == 3

    def test_retry_budget_exhausted(self, http_service):
        http_service.responses["/score"] = [(500, {})] * 10
        scorer = RemoteScorer(http_service.url("/score"), max_retries=2, backoff=0.0)
        with pytest.raises(TransportError) as err:
            scorer.score(evid_request())
        assert err.value.attempts == 3

    def test_out_of_range_probability_clamped(self, http_service, caplog):
        http_service.responses["/score"] = {"probability": 1.7}
        scorer = RemoteScorer(http_service.url("/score"), backoff=0.0)
        with caplog.at_level("WARNING"):
            assert scorer.score(evid_request()) == 1.0
        assert any("clamping" in r.message for r in caplog.records)

    def test_missing_probability_is_protocol_error(self, http_service):
        http_service.responses["/score"] = {"p": 0.5}
        scorer = RemoteScorer(http_service.url("/score"), backoff=0.0)
        with pytest.raises(ProtocolError):
            scorer.score(evid_request())

    def test_cache_replays_without_calls(self, http_service, tmp_path):
        http_service.responses["/score"] = {"probability": 0.25}
        cache = ResponseCache(tmp_path / "cache")
        scorer = RemoteScorer(http_service.url("/score"), cache=cache, backoff=0.0)
        first = scorer.score(evid_request())
        second = scorer.score(evid_request())
        assert first == second == 0.25
        assert len(http_service.requests["/score"]) == 1
        # a fresh client with the same cache never touches the service
        other = RemoteScorer(http_service.url("/score"), cache=ResponseCache(tmp_path / "cache"), backoff=0.0)
        assert other.score(evid_request()) == 0.25
        assert len(http_service.requests["/score"]) == 1


class TestRemotePredictor:
    def test_fixture_echo(self, http_service):
        http_service.responses["/predict"] = {"answer": "Don Shula"}
        predictor = RemotePredictor(http_service.url("/predict"), backoff=0.0)
        assert predictor.predict(PredictRequest("who won", ("block",))) == "Don Shula"
        assert http_service.requests["/predict"][0] == {"question": "who won", "passages": ["block"]}

    def test_missing_answer_is_protocol_error(self, http_service):
        http_service.responses["/predict"] = {"text": "Don Shula"}
        predictor = RemotePredictor(http_service.url("/predict"), backoff=0.0)
        with pytest.raises(ProtocolError):
            predictor.predict(PredictRequest("who won", ("block",)))

    def test_caching_backend_wraps_any_predictor(self, tmp_path):
        class Flaky:
            def __init__(self):
                self.calls = 0

            def predict(self, req):
                self.calls += 1
                return "yes"

        inner = Flaky()
        cached = CachingBackend(inner, ResponseCache(tmp_path / "cache"))
        req = PredictRequest("q", ("b",))
        assert cached.predict(req) == cached.predict(req) == "yes"
        assert inner.calls == 1


class TestFileScoreStore:
    def test_identity_lookup(self):
        store = FileScoreStore({("q1", None, "r0"): 0.73})
        assert store.score(evid_request()) == 0.73

    def test_missing_key_names_the_key(self):
        store = FileScoreStore({})
        with pytest.raises(MissingScoreError) as err:
            store.score(evid_request())
        assert err.value.key == ("q1", None, "r0")

    def test_requires_ids(self):
        store = FileScoreStore({})
        with pytest.raises(ContractViolation):
            store.score(evid_request(question_id=None))


class TestLexicalMock:
    def test_matches_answer_containment(self):
        example = make_example()
        scorer = LexicalMockScorer.from_examples([example])
        assert scorer.score(evid_request(retrieved_text="head coach Don Shula won")) == 1.0
        assert scorer.score(evid_request(retrieved_text="something else entirely")) == 0.0
        consistency = ScoreRequest(
            kind=ScoreKind.CONSISTENCY,
            question="who wrote it",
            retrieved_text="head coach Don Shula won",
            generated_text="George Halas led the team",
            question_id="q1",
            retrieved_id="r0",
            generated_id="g1",
        )
        assert scorer.score(consistency) == 0.0

    def test_unknown_question_is_a_contract_violation(self):
        scorer = LexicalMockScorer({})
        with pytest.raises(ContractViolation):
            scorer.score(evid_request())


class TestGenerator:
    def test_multi_hop_response_parsed_into_two_segments(self, http_service):
        http_service.responses["/generate"] = {"passages": [["Document 1: A\n\nDocument 2: B"]]}
        client = RemoteGenerator(http_service.url("/generate"), backoff=0.0)
        chains = client.generate(GenerationRequest("q", 1, GenerationMode.MULTI_HOP_CHAIN))
        assert len(chains) == 1
        assert [seg.text for seg in chains[0].segments] == ["A", "B"]

    def test_single_hop_identity_parse(self, http_service):
        http_service.responses["/generate"] = {"passages": [["X"]]}
        client = RemoteGenerator(http_service.url("/generate"), backoff=0.0)
        chains = client.generate(GenerationRequest("q", 1))
        assert len(chains) == 1
        assert chains[0].segments[0].text == "X"
        assert chains[0].source.value == "generated"

    def test_malformed_multi_hop_item_skipped(self, http_service, caplog):
        http_service.responses["/generate"] = {
            "passages": [["Document 1: only the first"], ["Document 1: A\n\nDocument 2: B"]]
        }
        client = RemoteGenerator(http_service.url("/generate"), backoff=0.0)
        with caplog.at_level("WARNING"):
            chains = client.generate(GenerationRequest("q", 5, GenerationMode.MULTI_HOP_CHAIN))
        assert len(chains) == 1
        assert any("skipping unparseable" in r.message for r in caplog.records)

    def test_returns_at_most_n(self, http_service):
        http_service.responses["/generate"] = {"passages": [["a"], ["b"], ["c"]]}
        client = RemoteGenerator(http_service.url("/generate"), backoff=0.0)
        chains = client.generate(GenerationRequest("q", 2))
        assert len(chains) == 2

    def test_split_two_documents_errors(self):
        with pytest.raises(ProtocolError):
            split_two_documents("Document 1: A only")
        with pytest.raises(ProtocolError):
            split_two_documents("Document 2: B Document 1: A")
        assert split_two_documents("Document 1: A\n\nDocument 2: B") == ("A", "B")


class TestResponseCache:
    def test_key_is_stable_and_content_based(self, tmp_path):
        cache = ResponseCache(tmp_path)
        a = cache.key("scorer", {"x": 1, "y": 2})
        b = cache.key("scorer", {"y": 2, "x": 1})
        assert a == b
        assert cache.key("predictor", {"x": 1, "y": 2}) != a

    def test_round_trip(self, tmp_path):
        cache = ResponseCache(tmp_path)
        assert cache.get("scorer", {"q": 1}) is None
        cache.put("scorer", {"q": 1}, {"probability": 0.5})
        assert cache.get("scorer", {"q": 1}) == {"probability": 0.5}
