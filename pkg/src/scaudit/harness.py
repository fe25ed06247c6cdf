"""Querying protocol and strict scoring for the benchmarking harness.

Each request is a stateless, freshly seeded completion: no conversation
state is ever reused between requests, so repeated runs of one sample are
independent. Scoring is strict per category: a vulnerable sample counts as
a true positive only when the parsed category equals its own label; any
other detection (including a different valid category) is a false negative,
and any detection on a safe sample is a false positive. Counts are pooled
over all repetitions before metrics are computed.
"""
from __future__ import annotations

import fnmatch
import os
import re
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .corpus.manifest import LLM_SOURCE, CorpusManifest, MissingRenderingError, Sample
from .metrics import ConfusionMatrix
from .taxonomy import Platform, parse_category_label

BASELINE = "baseline"
ROLE_BASED = "role_based"

BASELINE_USER_TEMPLATE = (
    "Can you check if the following smart contract written in [Programming Language] "
    "contains a vulnerability? --[Source Code]--"
)
ROLE_SYSTEM_TEMPLATE = (
    "You are a smart contract security analyzer. You receive smart contract written in "
    "[Programming Language] as input and answer with the vulnerability identified if exist. "
    "The vulnerabilities are classified according to OWASP Top 10."
)

LANGUAGE_NAMES = {Platform.ALGORAND.value: "PyTeal", Platform.SOLANA.value: "Rust"}

# Responses that explicitly call the contract clean short-circuit to "no
# category" before alias matching runs.
_NEGATIVE_PHRASES = (
    "no vulnerability", "no vulnerabilities", "not vulnerable", "no security issue",
    "no security issues", "no issue found", "no issues found", "appears safe",
    "looks safe", "is safe", "seems safe", "none",
)
_NEGATIVE_RE = re.compile(
    "|".join(r"(?<![\w])" + re.escape(p) + r"(?![\w])" for p in _NEGATIVE_PHRASES),
    re.IGNORECASE,
)

_ERROR_MARKER = "[transport-error]"


class HarnessError(Exception):
    pass


class TransportFailure(HarnessError):
    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(message)


class HTTPStatusFailure(HarnessError):
    def __init__(self, status: int, body: str):
        self.status = status
        super().__init__(f"endpoint returned status {status}: {body[:200]}")


@dataclass(frozen=True)
class PromptSpec:
    mode: str = BASELINE
    language_name: str | None = None  # None: derive from the sample's platform
    system_text: str = ""
    user_template: str = BASELINE_USER_TEMPLATE

    def __post_init__(self):
        if self.mode not in (BASELINE, ROLE_BASED):
            raise HarnessError(f"unknown prompt mode {self.mode!r}")
        if self.mode == BASELINE and self.system_text:
            raise HarnessError("baseline mode must not carry a system message")
        for placeholder in ("[Programming Language]", "[Source Code]"):
            if placeholder not in self.user_template:
                raise HarnessError(f"user template must contain {placeholder}")


def baseline_spec(language_name: str | None = None) -> PromptSpec:
    return PromptSpec(mode=BASELINE, language_name=language_name)


def role_based_spec(language_name: str | None = None) -> PromptSpec:
    return PromptSpec(
        mode=ROLE_BASED,
        language_name=language_name,
        system_text=ROLE_SYSTEM_TEMPLATE,
        user_template=BASELINE_USER_TEMPLATE,
    )


def spec_for_mode(mode: str) -> PromptSpec:
    return baseline_spec() if mode == BASELINE else role_based_spec()


def build_prompt(spec: PromptSpec, sample: Sample) -> list[dict[str, str]]:
    """Message sequence for one request; source text is inserted verbatim."""
    source = sample.rendering(LLM_SOURCE)  # raises MissingRenderingError
    language = spec.language_name or LANGUAGE_NAMES[sample.platform]
    user = spec.user_template.replace("[Programming Language]", language).replace("[Source Code]", source)
    messages = []
    if spec.mode == ROLE_BASED:
        messages.append({"role": "system", "content": spec.system_text.replace("[Programming Language]", language)})
    messages.append({"role": "user", "content": user})
    return messages


@dataclass
class ModelEndpoint:
    base_url: str
    model_name: str = "model"
    temperature: float = 0.7
    max_new_tokens: int = 512
    timeout: float = 60.0
    auth_source: str = "SCAUDIT_API_TOKEN"  # environment variable holding the bearer token
    retries: int = 2
    backoff_s: float = 0.25
    _responder: "MockResponder | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.temperature < 0:
            raise HarnessError("temperature must be >= 0")
        if self.retries < 0:
            raise HarnessError("retries must be >= 0")
        if self.base_url.startswith("mock:") and self._responder is None:
            self._responder = MockResponder.from_script(Path(self.base_url[len("mock:"):]))

    @property
    def is_mock(self) -> bool:
        return self._responder is not None


class MockScriptError(Exception):
    pass


@dataclass
class _MockRule:
    pattern: str
    response: str
    failures_left: int = 0


class MockResponder:
    """In-process scripted responder.

    Script lines: `pattern|response[|fail=N]`. The pattern is matched with
    fnmatch against `sample_id#run` first, then `sample_id`; the first
    matching line wins. `fail=N` makes the rule raise a transport error for
    its first N uses. Escapes in responses: \\n, \\|, \\\\.
    """

    def __init__(self, rules: list[_MockRule]):
        self.rules = rules
        self.calls: list[tuple[str, str]] = []  # (matched key, outcome)
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path: Path) -> "MockResponder":
        rules = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = _split_escaped(line)
            if len(parts) < 2:
                raise MockScriptError(f"{path}:{lineno}: expected pattern|response")
            failures = 0
            if len(parts) >= 3 and parts[2].startswith("fail="):
                failures = int(parts[2][5:])
            rules.append(_MockRule(pattern=parts[0], response=_unescape(parts[1]), failures_left=failures))
        return cls(rules)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]]) -> "MockResponder":
        return cls([_MockRule(pattern=p, response=r) for p, r in pairs])

    def respond(self, sample_id: str, run_index: int) -> str:
        keys = (f"{sample_id}#{run_index}", sample_id)
        with self._lock:
            for rule in self.rules:
                for key in keys:
                    if fnmatch.fnmatchcase(key, rule.pattern):
                        if rule.failures_left > 0:
                            rule.failures_left -= 1
                            self.calls.append((key, "failure"))
                            raise requests.ConnectionError(f"scripted failure for {key}")
                        self.calls.append((key, "ok"))
                        return rule.response
            self.calls.append((sample_id, "unmatched"))
            return ""


def _split_escaped(line: str) -> list[str]:
    parts, buf, escape = [], [], False
    for ch in line:
        if escape:
            buf.append("\\" + ch)
            escape = False
        elif ch == "\\":
            escape = True
        elif ch == "|":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


def _unescape(text: str) -> str:
    return text.replace("\\n", "\n").replace("\\|", "|").replace("\\\\", "\\")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r").replace("|", "\\|")


def _unescape_field(text: str) -> str:
    out, escape = [], False
    for ch in text:
        if escape:
            out.append({"n": "\n", "r": "\r", "\\": "\\", "|": "|"}.get(ch, ch))
            escape = False
        elif ch == "\\":
            escape = True
        else:
            out.append(ch)
    return "".join(out)


def query(
    endpoint: ModelEndpoint,
    messages: list[dict[str, str]],
    *,
    seed: int | None = None,
    context: dict | None = None,
) -> str:
    """One independent completion. Retries transport failures up to
    endpoint.retries times (so at most retries+1 attempts) with exponential
    backoff; non-success HTTP statuses are surfaced without retry."""
    attempts = endpoint.retries + 1
    last_error: Exception | None = None
    for attempt in range(1, attempts + 1):
        try:
            if endpoint.is_mock:
                ctx = context or {}
                return endpoint._responder.respond(ctx.get("sample_id", ""), ctx.get("run_index", 0))
            return _http_query(endpoint, messages, seed)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_error = exc
            if attempt < attempts:
                time.sleep(endpoint.backoff_s * (2 ** (attempt - 1)))
    raise TransportFailure(f"transport failure after {attempts} attempts: {last_error}", attempts)


def _http_query(endpoint: ModelEndpoint, messages: list[dict[str, str]], seed: int | None) -> str:
    payload: dict = {
        "model": endpoint.model_name,
        "messages": messages,
        "temperature": endpoint.temperature,
        "max_tokens": endpoint.max_new_tokens,
    }
    if seed is not None:
        payload["seed"] = seed
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(endpoint.auth_source, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    response = requests.post(endpoint.base_url, json=payload, headers=headers, timeout=endpoint.timeout)
    if response.status_code != 200:
        raise HTTPStatusFailure(response.status_code, response.text)
    body = response.json()
    choice = body["choices"][0]
    if "message" in choice:
        return choice["message"]["content"]
    return choice.get("text", "")


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    run_index: int
    prompt_mode: str
    raw_response: str
    parsed_category: str | None
    predicted_vulnerable: bool
    latency_ms: int
    error: str | None = None


def parse_response(text: str, platform: Platform | str) -> str | None:
    """Map raw model output to a category key, honoring explicit negatives."""
    if _NEGATIVE_RE.search(text):
        return None
    category = parse_category_label(text, platform)
    return category.key if category else None


def run_eval(
    endpoint: ModelEndpoint,
    manifest: CorpusManifest,
    spec: PromptSpec,
    repetitions: int = 3,
    seed: int | None = None,
    concurrency: int = 4,
) -> list[PredictionRecord]:
    """repetitions x |samples| records in deterministic (sample_id, run)
    order. Request failures become error records, never dropped."""
    if repetitions < 1:
        raise HarnessError("repetitions must be >= 1")
    jobs = [
        (sample, run)
        for sample in sorted(manifest.samples, key=lambda s: s.id)
        for run in range(1, repetitions + 1)
    ]

    def one(job: tuple[Sample, int]) -> PredictionRecord:
        sample, run = job
        messages = build_prompt(spec, sample)
        request_seed = None if seed is None else seed * 1000 + (zlib.crc32(f"{sample.id}#{run}".encode()) % 997)
        started = time.monotonic()
        try:
            raw = query(endpoint, messages, seed=request_seed,
                        context={"sample_id": sample.id, "run_index": run})
            error = None
        except HarnessError as exc:
            raw = f"{_ERROR_MARKER} {exc}"
            error = str(exc)
        latency_ms = int((time.monotonic() - started) * 1000)
        parsed = None if error else parse_response(raw, sample.platform)
        return PredictionRecord(
            sample_id=sample.id,
            run_index=run,
            prompt_mode=spec.mode,
            raw_response=raw,
            parsed_category=parsed,
            predicted_vulnerable=parsed is not None,
            latency_ms=latency_ms,
            error=error,
        )

    if concurrency <= 1:
        records = [one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(pool.map(one, jobs))
    records.sort(key=lambda r: (r.sample_id, r.run_index))
    return records


def score(records: list[PredictionRecord], manifest: CorpusManifest) -> dict[str, ConfusionMatrix]:
    """Pooled confusion matrices per category over all repetitions."""
    samples = {s.id: s for s in manifest.samples}
    counts: dict[str, dict[str, int]] = {}
    for record in records:
        sample = samples.get(record.sample_id)
        if sample is None:
            raise HarnessError(f"unknown sample id {record.sample_id!r}")
        cell = counts.setdefault(sample.category, {"tp": 0, "fp": 0, "fn": 0, "tn": 0})
        if sample.is_vulnerable:
            if record.parsed_category == sample.category:
                cell["tp"] += 1
            else:
                cell["fn"] += 1
        else:
            if record.parsed_category is None:
                cell["tn"] += 1
            else:
                cell["fp"] += 1
    return {cat: ConfusionMatrix(**cells) for cat, cells in sorted(counts.items())}


# ---------------------------------------------------------------------------
# records file: header + pipe-delimited lines
# ---------------------------------------------------------------------------

_RECORDS_HEADER = "#predictions-v1"


class RecordsFormatError(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def write_records(records: list[PredictionRecord], path: str | Path) -> None:
    lines = [_RECORDS_HEADER]
    for r in records:
        lines.append("|".join([
            r.sample_id,
            str(r.run_index),
            r.prompt_mode,
            r.parsed_category or "",
            "true" if r.predicted_vulnerable else "false",
            str(r.latency_ms),
            _escape(r.raw_response),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_records(path: str | Path) -> list[PredictionRecord]:
    # split on "\n" only: escaped responses may legitimately carry other
    # control characters that str.splitlines would treat as line breaks
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if not lines or lines[0].strip() != _RECORDS_HEADER:
        raise RecordsFormatError(1, f"missing {_RECORDS_HEADER} header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = _split_escaped(line)
        if len(parts) != 7:
            raise RecordsFormatError(lineno, f"expected 7 fields, got {len(parts)}")
        sample_id, run, mode, parsed, predicted, latency, raw = parts
        raw_text = _unescape_field(raw)
        error = raw_text[len(_ERROR_MARKER):].strip() if raw_text.startswith(_ERROR_MARKER) else None
        try:
            records.append(PredictionRecord(
                sample_id=sample_id,
                run_index=int(run),
                prompt_mode=mode,
                raw_response=raw_text,
                parsed_category=parsed or None,
                predicted_vulnerable=predicted == "true",
                latency_ms=int(latency),
                error=error,
            ))
        except ValueError as exc:
            raise RecordsFormatError(lineno, str(exc)) from None
    return records
