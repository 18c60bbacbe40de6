"""Chat-completion adapter: vulnerability analysis and secure rewriting.

Providers are pluggable; the deterministic mock never touches the network.
Prompts are pure functions of their inputs (temperature pinned to 0.0), so a
fixed code/type set always produces byte-identical requests.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import httpx

from .vulntypes import VulnType

TEMPLATE_VERSION = 1
DEFAULT_MODEL = "gpt-3.5-turbo"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
API_KEY_ENV = "LLM_API_KEY"
DEFAULT_CONTEXT_BUDGET = 24_000
ANALYSIS_TYPE_NAMES = tuple(v.value for v in VulnType) + ("other",)


class LlmError(Exception):
    pass


class MissingCredentials(LlmError):
    pass


class ProviderError(LlmError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned status {status}: {body[:200]}")
        self.status = status
        self.body = body


class ProviderTimeout(LlmError):
    pass


class NoCodeInResponse(LlmError):
    pass


@dataclass(frozen=True)
class LlmRequest:
    system_prompt: str
    user_prompt: str
    model_name: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_tokens: int = 2048


@dataclass(frozen=True)
class LlmFinding:
    vuln_type: str  # one of the seven wire names, or "other"
    line_start: int
    line_end: int
    explanation: str

    def to_dict(self) -> dict:
        return {"vuln_type": self.vuln_type, "line_start": self.line_start,
                "line_end": self.line_end, "explanation": self.explanation}


@dataclass
class LlmAnalysis:
    findings: list[LlmFinding]
    raw_response: str
    warnings: list[str] = field(default_factory=list)


@dataclass
class RewriteResult:
    secure_code: str
    change_summary: str
    raw_response: str


class Provider(Protocol):
    def complete(self, request: LlmRequest) -> str: ...


class MockProvider:
    """Canned responses for offline tests; records every request it sees."""

    def __init__(self, responses: Sequence[str] | Callable[[LlmRequest], str]):
        self._responses = responses
        self._cursor = 0
        self.requests: list[LlmRequest] = []

    def complete(self, request: LlmRequest) -> str:
        self.requests.append(request)
        if callable(self._responses):
            return self._responses(request)
        if not self._responses:
            raise ProviderError(500, "mock provider has no responses")
        reply = self._responses[min(self._cursor, len(self._responses) - 1)]
        self._cursor += 1
        return reply


class HttpProvider:
    """Vendor chat-completions protocol over HTTP+JSON."""

    def __init__(self, endpoint: str = DEFAULT_ENDPOINT,
                 model: str = DEFAULT_MODEL,
                 api_key: str | None = None,
                 timeout_seconds: float = 30.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self.timeout_seconds = timeout_seconds
        self._transport = transport

    def complete(self, request: LlmRequest) -> str:
        key = self._api_key or os.environ.get(API_KEY_ENV)
        if not key:
            raise MissingCredentials(
                f"no API key configured (set {API_KEY_ENV} or llm.api_key)")
        payload = {
            "model": request.model_name or self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            with httpx.Client(transport=self._transport,
                              timeout=self.timeout_seconds) as client:
                response = client.post(
                    self.endpoint, json=payload,
                    headers={"Authorization": f"Bearer {key}"})
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(0, str(exc)) from exc
        if response.status_code // 100 != 2:
            raise ProviderError(response.status_code, response.text)
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(response.status_code,
                                f"malformed completion body: {response.text[:200]}"
                                ) from exc


def analysis_request(code: str, types: Sequence[VulnType] | None = None,
                     model_name: str = DEFAULT_MODEL) -> LlmRequest:
    wanted = [t.value for t in types] if types else [v.value for v in VulnType]
    system = (
        "You are a security reviewer for Python source code "
        f"(analysis template v{TEMPLATE_VERSION}). "
        "Report only genuine vulnerabilities of the requested types. "
        "Respond with a single JSON object and nothing else, shaped as "
        '{"findings": [{"vuln_type": "<type>", "line_start": <int>, '
        '"line_end": <int>, "explanation": "<short reason>"}]}. '
        f"Allowed vuln_type values: {', '.join(ANALYSIS_TYPE_NAMES)}. "
        "Line numbers are 1-based and refer to the submitted code."
    )
    user = (
        f"Requested types: {', '.join(wanted)}\n"
        "Analyze this Python code:\n"
        f"```python\n{code}\n```"
    )
    return LlmRequest(system_prompt=system, user_prompt=user,
                      model_name=model_name)


def rewrite_request(code: str, findings: Sequence[LlmFinding | dict],
                    model_name: str = DEFAULT_MODEL) -> LlmRequest:
    items = [f.to_dict() if isinstance(f, LlmFinding) else f for f in findings]
    system = (
        "You are a security engineer producing hardened Python code "
        f"(rewrite template v{TEMPLATE_VERSION}). "
        "Rewrite the submitted code to eliminate the listed vulnerabilities "
        "while preserving behavior. Reply with a short summary of the "
        "changes, then the full rewritten file in one fenced code block."
    )
    user = (
        "Known findings:\n"
        f"{json.dumps(items, indent=2)}\n"
        "Code to rewrite:\n"
        f"```python\n{code}\n```"
    )
    return LlmRequest(system_prompt=system, user_prompt=user,
                      model_name=model_name)


def _split_top_level(code: str, budget: int) -> list[tuple[int, str]]:
    """(start_line, chunk) pieces cut at top-level def/class/decorator
    boundaries, each within the character budget where possible."""
    lines = code.splitlines(keepends=True)
    blocks: list[tuple[int, list[str]]] = []
    current_start = 1
    current: list[str] = []
    for i, line in enumerate(lines, start=1):
        boundary = line.startswith(("def ", "class ", "@"))
        if boundary and current:
            blocks.append((current_start, current))
            current = []
            current_start = i
        current.append(line)
    if current:
        blocks.append((current_start, current))

    chunks: list[tuple[int, str]] = []
    acc_start = None
    acc: list[str] = []
    acc_len = 0
    for start, block in blocks:
        block_text = "".join(block)
        if acc and acc_len + len(block_text) > budget:
            chunks.append((acc_start, "".join(acc)))
            acc, acc_len, acc_start = [], 0, None
        if acc_start is None:
            acc_start = start
        acc.append(block_text)
        acc_len += len(block_text)
    if acc:
        chunks.append((acc_start, "".join(acc)))
    return chunks


def _extract_json(text: str) -> dict | None:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        return None
    try:
        obj = json.loads(text[start:end + 1])
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


def parse_analysis(raw: str, total_lines: int, line_offset: int = 0
                   ) -> tuple[list[LlmFinding], list[str]]:
    """Tolerant parse: anything unusable degrades to warnings, never raises."""
    warnings: list[str] = []
    obj = _extract_json(raw)
    if obj is None:
        return [], ["response was not valid JSON; no findings parsed"]
    items = obj.get("findings")
    if not isinstance(items, list):
        return [], ['response JSON lacks a "findings" list']
    findings: list[LlmFinding] = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            warnings.append(f"finding {i}: not an object, skipped")
            continue
        vt = item.get("vuln_type")
        ls, le = item.get("line_start"), item.get("line_end")
        if vt not in ANALYSIS_TYPE_NAMES:
            warnings.append(f"finding {i}: unknown vuln_type {vt!r}, skipped")
            continue
        if not (isinstance(ls, int) and isinstance(le, int)
                and 1 <= ls <= le <= total_lines):
            warnings.append(
                f"finding {i}: line range {ls!r}..{le!r} outside code, skipped")
            continue
        findings.append(LlmFinding(
            vuln_type=vt, line_start=ls + line_offset, line_end=le + line_offset,
            explanation=str(item.get("explanation", ""))))
    return findings, warnings


def analyze_code(provider: Provider, code: str,
                 types: Sequence[VulnType] | None = None,
                 context_budget_chars: int = DEFAULT_CONTEXT_BUDGET,
                 model_name: str = DEFAULT_MODEL) -> LlmAnalysis:
    """One analysis request per chunk; findings carry original line numbers."""
    if len(code) <= context_budget_chars:
        chunks = [(1, code)]
    else:
        chunks = _split_top_level(code, context_budget_chars)
    findings: list[LlmFinding] = []
    warnings: list[str] = []
    raw_parts: list[str] = []
    for start_line, chunk in chunks:
        request = analysis_request(chunk, types, model_name)
        raw = provider.complete(request)
        raw_parts.append(raw)
        chunk_findings, chunk_warnings = parse_analysis(
            raw, total_lines=max(1, chunk.count("\n") + 1),
            line_offset=start_line - 1)
        findings.extend(chunk_findings)
        warnings.extend(chunk_warnings)
    return LlmAnalysis(findings=findings, raw_response="\n".join(raw_parts),
                       warnings=warnings)


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)


def secure_rewrite(provider: Provider, code: str,
                   findings: Sequence[LlmFinding | dict] = (),
                   model_name: str = DEFAULT_MODEL) -> RewriteResult:
    """Ask for a hardened rewrite; the first fenced block is the new code."""
    if not code:
        raise ValueError("code must be non-empty")
    request = rewrite_request(code, findings, model_name)
    raw = provider.complete(request)
    match = _FENCE_RE.search(raw)
    if not match or not match.group(1).strip():
        raise NoCodeInResponse("reply contains no fenced code block")
    secure_code = match.group(1)
    summary = raw[:match.start()].strip()
    return RewriteResult(secure_code=secure_code, change_summary=summary,
                         raw_response=raw)
