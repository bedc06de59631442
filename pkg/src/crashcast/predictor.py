"""Produce next-crash answers from interchangeable backends.

Three backend kinds share one calling convention (prompt text in, answer
text out): a remote model served over a chat-style HTTP protocol, a
deterministic per-type Poisson baseline with closed-form minimum-Bayes-risk
answers, and a scripted double for tests. The baseline renders its answers
through the same sentence template the prompts teach, so everything
downstream is backend-agnostic.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .errors import (
    ConfigError,
    HistoryTooShort,
    ProtocolError,
    RateLimited,
    ScriptExhausted,
    Timeout,
    TransportError,
    ZeroRate,
)
from .prompt import render_answer_sentence, render_date
from .sequencer import EventSequence, SeqEvent

BACKEND_KINDS = ("remote-llm", "baseline", "scripted")

# Span shorter than one aggregation day would blow the rates up.
MIN_SPAN_DAYS = 1.0

SYSTEM_MESSAGE = "Answer with a single sentence in the format shown by the examples."


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "baseline"
    endpoint: str | None = None
    model_name: str | None = None
    timeout: float = 30.0
    max_in_flight: int = 4
    retry_limit: int = 2
    backoff_base: float = 0.5
    max_output_tokens: int = 64
    script_path: str | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be at least 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must not be negative")
        if self.kind == "remote-llm" and not self.endpoint:
            raise ConfigError("remote-llm backend requires an endpoint")


@dataclass(frozen=True)
class PredictionRaw:
    time_answer: str
    cause_answer: str
    backend_id: str
    latency: float = 0.0  # milliseconds


class Backend(Protocol):
    backend_id: str

    def complete(self, prompt: str) -> str: ...


# --- per-type Poisson baseline ------------------------------------------------

@dataclass(frozen=True)
class BaselineModel:
    """Per-cause event rates fitted on one history, plus where it ended."""

    rates: dict[str, float]
    total_rate: float
    t_last: datetime
    observation_span: float  # days

    def __post_init__(self):
        if self.observation_span <= 0:
            raise ValueError("observation span must be positive")
        if any(rate < 0 for rate in self.rates.values()):
            raise ValueError("rates must not be negative")
        checksum = sum(self.rates.values())
        if abs(checksum - self.total_rate) > 1e-12 * max(abs(checksum), 1.0):
            raise ValueError("total_rate does not match the sum of rates")


def fit_baseline(history: Sequence[SeqEvent] | EventSequence) -> BaselineModel:
    """Per-cause maximum-likelihood rates: count over observed span in days."""
    events = history.events if isinstance(history, EventSequence) else tuple(history)
    if len(events) < 2:
        raise HistoryTooShort(f"need at least 2 events to fit a span, got {len(events)}")
    span_days = (events[-1].time - events[0].time) / timedelta(days=1)
    span_days = max(span_days, MIN_SPAN_DAYS)
    counts: dict[str, int] = {}
    for event in events:
        counts[event.kind] = counts.get(event.kind, 0) + 1
    rates = {kind: count / span_days for kind, count in counts.items()}
    return BaselineModel(
        rates=rates,
        total_rate=sum(rates.values()),
        t_last=events[-1].time,
        observation_span=span_days,
    )


def mbr_next_time(model: BaselineModel) -> datetime:
    """Mean of the exponential waiting time: t_last plus 1/Λ days."""
    if model.total_rate <= 0:
        raise ZeroRate("total rate is zero, waiting time undefined")
    return model.t_last + timedelta(days=1.0 / model.total_rate)


def mbr_next_type(model: BaselineModel) -> str:
    """Most probable next cause: argmax of the rates, ties broken by label."""
    if model.total_rate <= 0:
        raise ZeroRate("total rate is zero, type distribution undefined")
    return min(model.rates, key=lambda kind: (-model.rates[kind], kind))


def baseline_answer(history: Sequence[SeqEvent] | EventSequence) -> PredictionRaw:
    """Render the MBR (time, type) through the canonical sentence template.

    Both stages get the full sentence, so extraction treats baseline output
    exactly like model output.
    """
    started = time.perf_counter()
    model = fit_baseline(history)
    sentence = render_answer_sentence(
        render_date(mbr_next_time(model)), mbr_next_type(model)
    )
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return PredictionRaw(
        time_answer=sentence,
        cause_answer=sentence,
        backend_id="baseline",
        latency=elapsed_ms,
    )


# --- scripted test double -----------------------------------------------------

class ScriptedBackend:
    """Replays canned completions in order and records every prompt."""

    def __init__(self, completions: Iterable[str]):
        self.backend_id = "scripted"
        self._completions = list(completions)
        self._cursor = 0
        self.transcript: list[str] = []

    def complete(self, prompt: str) -> str:
        self.transcript.append(prompt)
        if self._cursor >= len(self._completions):
            raise ScriptExhausted(
                f"script exhausted after {len(self._completions)} completions"
            )
        answer = self._completions[self._cursor]
        self._cursor += 1
        return answer

    @property
    def remaining(self) -> int:
        return len(self._completions) - self._cursor


def scripted_answer(prompt: str, script: ScriptedBackend) -> str:
    return script.complete(prompt)


# --- remote chat-completion backend -------------------------------------------

class RemoteBackend:
    """Chat-style completion client with retry on transient failures.

    Timeouts, connection drops, 5xx responses, and 429s are retried up to
    retry_limit times with exponential backoff; anything that indicates the
    request itself is wrong (other 4xx, malformed body) is raised at once.
    Safe to call from several threads.
    """

    def __init__(self, config: BackendConfig, sleep: Callable[[float], None] = time.sleep):
        if config.kind != "remote-llm":
            raise ConfigError(f"RemoteBackend needs a remote-llm config, got {config.kind!r}")
        self.config = config
        self.backend_id = f"remote:{config.model_name or 'default'}"
        self._sleep = sleep
        self._lock = threading.Lock()
        self.total_calls = 0
        self.total_retries = 0

    def complete(self, prompt: str) -> str:
        attempts = self.config.retry_limit + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                text = self._request_once(prompt)
            except (Timeout, TransportError, RateLimited) as err:
                last_error = err
                continue
            with self._lock:
                self.total_calls += 1
                self.total_retries += attempt
            return text
        with self._lock:
            self.total_calls += 1
            self.total_retries += attempts - 1
        assert last_error is not None
        raise last_error

    def _request_once(self, prompt: str) -> str:
        body = {
            "model": self.config.model_name or "default",
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": prompt},
            ],
            "temperature": 0,
            "max_tokens": self.config.max_output_tokens,
        }
        try:
            response = requests.post(
                self.config.endpoint, json=body, timeout=self.config.timeout
            )
        except requests.Timeout as err:
            raise Timeout(f"no response within {self.config.timeout}s") from err
        except requests.RequestException as err:
            raise TransportError(str(err)) from err

        if response.status_code == 429:
            raise RateLimited("server answered 429")
        if response.status_code >= 500:
            raise TransportError(f"server answered {response.status_code}")
        if response.status_code >= 400:
            raise ProtocolError(f"server rejected the request: {response.status_code}")

        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise ProtocolError(f"malformed response body: {err}") from err
        if not isinstance(content, str):
            raise ProtocolError("completion content is not text")
        return content


def remote_answer(prompt: str, config: BackendConfig) -> str:
    return RemoteBackend(config).complete(prompt)


def make_backend(config: BackendConfig) -> Backend:
    """Build the completion backend for a config; baseline has no prompt side."""
    if config.kind == "remote-llm":
        return RemoteBackend(config)
    if config.kind == "scripted":
        if not config.script_path:
            raise ConfigError("scripted backend requires script_path")
        completions = []
        with open(config.script_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    completions.append(json.loads(line))
        for item in completions:
            if not isinstance(item, str):
                raise ConfigError("script file must hold one JSON string per line")
        return ScriptedBackend(completions)
    raise ConfigError(f"backend kind {config.kind!r} does not complete prompts")
