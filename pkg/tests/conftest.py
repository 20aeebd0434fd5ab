from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from pairqa.corpus import Passage, PassageChain, QAExample, Source


def make_chain(text: str, source: Source, cid: str, title: str | None = None) -> PassageChain:
    return PassageChain(
        segments=(Passage(id=cid, text=text, title=title, source=source),),
        source=source,
    )


def make_example(
    question_id: str = "q1",
    question: str = "who wrote it",
    answers=("Don Shula",),
    retrieved_texts=("head coach Don Shula won", "something else entirely"),
    generated_texts=("Don Shula led the team", "George Halas led the team"),
) -> QAExample:
    retrieved = tuple(
        make_chain(t, Source.RETRIEVED, f"r{j}") for j, t in enumerate(retrieved_texts)
    )
    generated = tuple(
        make_chain(t, Source.LLM_GENERATED, f"g{i}") for i, t in enumerate(generated_texts)
    )
    return QAExample(
        question_id=question_id,
        question=question,
        answers=tuple(answers),
        retrieved=retrieved,
        generated=generated,
    )


class FixtureService:
    """In-process HTTP service implementing the three wire protocols.

    ``responses`` maps a path to either a dict (static body), a callable
    ``body -> dict``, or a list of (status, dict) consumed per request.
    Every request body is appended to ``requests[path]``.
    """

    def __init__(self):
        self.responses: dict[str, object] = {}
        self.requests: dict[str, list[dict]] = {}
        self._lock = threading.Lock()

        service = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with service._lock:
                    service.requests.setdefault(self.path, []).append(body)
                    spec = service.responses.get(self.path)
                    if isinstance(spec, list):
                        status, payload = spec.pop(0) if spec else (500, {})
                    elif callable(spec):
                        status, payload = 200, spec(body)
                    elif spec is None:
                        status, payload = 404, {}
                    else:
                        status, payload = 200, spec
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def url(self, path: str) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}{path}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def http_service():
    service = FixtureService()
    yield service
    service.close()
