"""Generation/translation backend contracts, an HTTP client, and test mocks.

Every generation backend implements generate(GenerationRequest) ->
GenerationResponse and every translation backend implements
translate(TranslationRequest) -> TranslationResponse. Decoding is always
greedy (temperature zero); the response carries only the continuation, cut at
the first stop sequence when one occurs.

Wire format of the HTTP backend:
    POST {base_url}/v1/generate   {"prompt", "max_tokens", "temperature": 0, "stop": [...]}  -> {"text"}
    POST {base_url}/v1/translate  {"text", "source", "target"}                               -> {"text"}
The base URL comes from the constructor or the QAM_BACKEND_URL environment
variable; an optional bearer token from the constructor or QAM_BACKEND_TOKEN.
Transport failures and 5xx responses are retried up to 3 attempts with
exponential backoff; 4xx and malformed payloads fail immediately.
"""

from __future__ import annotations

import hashlib
import os
import random
import re
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import requests

DEFAULT_TIMEOUT = 60.0
MAX_ATTEMPTS = 3

_DIGIT_RUN = re.compile(r"\d+")


class BackendError(Exception):
    """A backend failure. retryable marks transient faults (transport, 5xx)."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_tokens: int
    decoding: str = "greedy"
    stop_sequences: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_tokens < 1:
            raise BackendError("max_tokens must be >= 1")
        if self.decoding != "greedy":
            raise BackendError(f"unsupported decoding {self.decoding!r}; only greedy")
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    backend_id: str


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    source: str
    target: str

    def __post_init__(self):
        if self.source == self.target:
            raise BackendError(
                f"source and target language are both {self.source!r}"
            )


@dataclass(frozen=True)
class TranslationResponse:
    text: str
    backend_id: str


def apply_stop_sequences(text: str, stop_sequences: Sequence[str]) -> str:
    """Truncate text at the earliest occurrence of any stop sequence."""
    cut = len(text)
    for stop in stop_sequences:
        idx = text.find(stop)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]


class GenerationBackend:
    """Contract for text continuation backends."""

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        raise NotImplementedError


class TranslationBackend:
    """Contract for translation backends."""

    def translate(self, request: TranslationRequest) -> TranslationResponse:
        raise NotImplementedError


class HttpBackend(GenerationBackend, TranslationBackend):
    """Client for the documented JSON-over-HTTP backend protocol.

    retry_base_delay exists so tests can shrink the backoff; production
    callers keep the default (0.5s, 1s between the three attempts).
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT,
        token: Optional[str] = None,
        retry_base_delay: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        url = base_url or os.environ.get("QAM_BACKEND_URL")
        if not url:
            raise BackendError(
                "no backend URL: pass base_url or set QAM_BACKEND_URL"
            )
        self.base_url = url.rstrip("/")
        self.timeout = timeout
        self.token = token or os.environ.get("QAM_BACKEND_TOKEN")
        self.retry_base_delay = retry_base_delay
        self._session = session or requests.Session()

    @property
    def backend_id(self) -> str:
        return f"http:{self.base_url}"

    def _post(self, path: str, payload: dict) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error: Optional[BackendError] = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt > 0:
                time.sleep(self.retry_base_delay * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(
                    f"{self.base_url}{path}",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as e:
                last_error = BackendError(f"transport failure: {e}", retryable=True)
                continue
            if 500 <= resp.status_code < 600:
                last_error = BackendError(
                    f"server error {resp.status_code} from {path}", retryable=True
                )
                continue
            if resp.status_code != 200:
                raise BackendError(
                    f"unexpected status {resp.status_code} from {path}",
                    retryable=False,
                )
            try:
                body = resp.json()
            except ValueError as e:
                raise BackendError(
                    f"malformed JSON from {path}: {e}", retryable=False
                )
            if not isinstance(body, dict) or "text" not in body or not isinstance(body["text"], str):
                raise BackendError(
                    f"malformed payload from {path}: expected {{'text': str}}",
                    retryable=False,
                )
            return body
        assert last_error is not None
        raise last_error

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        body = self._post(
            "/v1/generate",
            {
                "prompt": request.prompt,
                "max_tokens": request.max_tokens,
                "temperature": 0,
                "stop": list(request.stop_sequences),
            },
        )
        text = apply_stop_sequences(body["text"], request.stop_sequences)
        return GenerationResponse(text=text, backend_id=self.backend_id)

    def translate(self, request: TranslationRequest) -> TranslationResponse:
        if not request.text:
            raise BackendError("empty input", retryable=False)
        body = self._post(
            "/v1/translate",
            {
                "text": request.text,
                "source": request.source,
                "target": request.target,
            },
        )
        return TranslationResponse(text=body["text"], backend_id=self.backend_id)


class TaggingTranslator(TranslationBackend):
    """Deterministic mock translator: prefixes the target-language tag.

    translate("hello", en->fi) == "[fi] hello". Tags stack on round trips
    ("[en] [fi] hello"), which makes every translation visibly identifiable
    in rendered prompts and exemplar tests.
    """

    backend_id = "mock:tagging-translator"

    def translate(self, request: TranslationRequest) -> TranslationResponse:
        if not request.text:
            raise BackendError("empty input", retryable=False)
        return TranslationResponse(
            text=f"[{request.target}] {request.text}",
            backend_id=self.backend_id,
        )


def _span_of(passage_text: str) -> str:
    """The deterministic answer span: first maximal digit run, else first
    token starting with an uppercase letter, else the first token."""
    m = _DIGIT_RUN.search(passage_text)
    if m:
        return m.group(0)
    tokens = passage_text.split()
    for tok in tokens:
        if tok and tok[0].isupper():
            return tok
    return tokens[0] if tokens else ""


_CORRUPT_ALPHABET = "bcdfghjkmpqvwxz"


def _corrupt(span: str, passage_text: str, rng: random.Random) -> str:
    """A replacement span absent from the passage and free of the original.

    Both conditions matter: a corrupted answer must fail the in-context
    check, and a corrupted question must not smuggle the true answer back
    in, or the trivial-question filter could never be exercised.
    """
    while True:
        candidate = "".join(rng.choice(_CORRUPT_ALPHABET) for _ in range(10))
        if candidate not in passage_text and span not in candidate:
            return candidate


def mock_qa_generate(
    passage_text: str,
    stage: str,
    noise_rate: float = 0.0,
    seed: int = 0,
) -> str:
    """Deterministic stand-in for the generating model, for tests and dry runs.

    Answer stage: the span (first maximal digit run, else first capitalized
    token, else first token). Question stage: "What is mentioned about
    <span>?". With probability noise_rate the span is replaced by a corrupted
    string guaranteed not to occur in the passage; the draw is a pure
    function of (passage_text, stage, seed), so different stages corrupt
    independently.
    """
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError("noise_rate must be within [0, 1]")
    if stage not in ("answer", "question"):
        raise ValueError(f"unknown stage {stage!r}")
    if not passage_text.strip():
        return ""
    span = _span_of(passage_text)
    digest = hashlib.sha256(
        f"{seed}|{stage}|{passage_text}".encode("utf-8")
    ).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    if noise_rate > 0.0 and rng.random() < noise_rate:
        span = _corrupt(span, passage_text, rng)
    if stage == "answer":
        return span
    return f"What is mentioned about {span}?"


class MockQABackend(GenerationBackend):
    """Generation mock that understands the rendered prompt layouts.

    For two-stage prompts it finds the target passage (last "  Passage: "
    line), detects the stage from the trailing cue, and completes with
    mock_qa_generate plus a continuation tail that exercises stop-sequence
    truncation. For language-prefixed tuned-model prompts ("[fi] <passage>")
    it returns "answer\\nquestion".
    """

    def __init__(self, noise_rate: float = 0.0, seed: int = 0):
        if not 0.0 <= noise_rate <= 1.0:
            raise ValueError("noise_rate must be within [0, 1]")
        self.noise_rate = noise_rate
        self.seed = seed

    @property
    def backend_id(self) -> str:
        return f"mock:qa-generate(noise={self.noise_rate},seed={self.seed})"

    # Cue literals mirror the prompt templates; a test pins them together.
    _ANSWER_CUE = "Answer in the original language:"
    _QUESTION_CUE = "Question in the original language:"
    _PASSAGE_LABEL = "  Passage: "

    def _target_passage(self, prompt: str) -> str:
        idx = prompt.rfind(self._PASSAGE_LABEL)
        if idx == -1:
            raise BackendError(
                "prompt has no passage line; cannot mock a completion",
                retryable=False,
            )
        line_end = prompt.find("\n", idx)
        if line_end == -1:
            line_end = len(prompt)
        return prompt[idx + len(self._PASSAGE_LABEL) : line_end]

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        prompt = request.prompt
        stripped = prompt.rstrip()
        if stripped.endswith(self._QUESTION_CUE):
            stage = "question"
        elif stripped.endswith(self._ANSWER_CUE):
            stage = "answer"
        elif prompt.startswith("[") and "]" in prompt.split("\n", 1)[0]:
            return self._generate_tuned(request)
        else:
            raise BackendError(
                "prompt does not end at a known cue", retryable=False
            )
        passage = self._target_passage(prompt)
        completion = mock_qa_generate(passage, stage, self.noise_rate, self.seed)
        raw = f" {completion}\nPassage: unrelated follow-on text"
        text = apply_stop_sequences(raw, request.stop_sequences)
        return GenerationResponse(text=text, backend_id=self.backend_id)

    def _generate_tuned(self, request: GenerationRequest) -> GenerationResponse:
        # "[l] passage" prompts come from the tuned-model synthesis path; the
        # reply convention there is answer, newline, question.
        close = request.prompt.index("]")
        passage = request.prompt[close + 1 :].lstrip()
        answer = mock_qa_generate(passage, "answer", self.noise_rate, self.seed)
        question = mock_qa_generate(passage, "question", self.noise_rate, self.seed)
        raw = f"{answer}\n{question}"
        text = apply_stop_sequences(raw, request.stop_sequences)
        return GenerationResponse(text=text, backend_id=self.backend_id)


class StaticGenerationBackend(GenerationBackend):
    """Replays canned completions in order; for plumbing tests."""

    def __init__(self, completions: Sequence[str]):
        self._completions = list(completions)
        self._calls = 0

    backend_id = "mock:static"

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        if self._calls >= len(self._completions):
            raise BackendError("static backend exhausted", retryable=False)
        text = self._completions[self._calls]
        self._calls += 1
        return GenerationResponse(
            text=apply_stop_sequences(text, request.stop_sequences),
            backend_id=self.backend_id,
        )
