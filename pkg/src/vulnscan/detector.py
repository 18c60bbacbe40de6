"""Sliding-window scanning: per-type window scores -> merged findings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embedding import EmbeddingModel, embed
from .nn import BiLstmModel, forward_batch
from .tokenizer import TokenStream, tokenize
from .vulntypes import VulnType

SNIPPET_LIMIT = 2000


class ModelMissing(Exception):
    def __init__(self, vuln_type: VulnType):
        super().__init__(f"no model available for {vuln_type.value}")
        self.vuln_type = vuln_type


@dataclass
class WindowSpec:
    length: int = 40
    stride: int = 5
    threshold: float = 0.5

    def validate(self) -> None:
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if not 1 <= self.stride <= self.length:
            raise ValueError("stride must be in [1, length]")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class Finding:
    vuln_type: VulnType
    file_path: str
    byte_start: int
    byte_end: int
    line_start: int
    line_end: int
    score: float
    snippet: str
    origin: str = "bilstm"

    def to_dict(self) -> dict:
        return {
            "vuln_type": self.vuln_type.value,
            "file_path": self.file_path,
            "byte_start": self.byte_start,
            "byte_end": self.byte_end,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "score": self.score,
            "snippet": self.snippet,
            "origin": self.origin,
        }


@dataclass
class ScanSummary:
    by_type: dict[str, int] = field(default_factory=dict)
    by_file: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"by_type": self.by_type, "by_file": self.by_file}


@dataclass
class ScanResult:
    findings: list[Finding]
    summary: ScanSummary
    scanned_files: list[str]
    skipped_files: list[str]
    degraded_files: list[str]

    def to_dict(self) -> dict:
        return {
            "findings": [f.to_dict() for f in self.findings],
            "summary": self.summary.to_dict(),
            "scanned_files": self.scanned_files,
            "skipped_files": self.skipped_files,
            "degraded_files": self.degraded_files,
        }


def windows(stream: TokenStream, spec: WindowSpec | None = None
            ) -> list[tuple[int, int]]:
    """Token-index windows tiling the stream; every token is covered.

    Regular starts at multiples of the stride; streams shorter than the
    window length get a single all-covering window; a final window anchored
    at the end is added when the stride pattern leaves a tail uncovered.
    """
    spec = spec or WindowSpec()
    spec.validate()
    n = len(stream.tokens)
    if n == 0:
        return []
    if n <= spec.length:
        return [(0, n)]
    out = []
    start = 0
    while start + spec.length <= n:
        out.append((start, start + spec.length))
        start += spec.stride
    if out[-1][1] < n:
        out.append((n - spec.length, n))
    return out


def _merge_positive(windows_pos: list[tuple[int, int, float]]
                    ) -> list[tuple[int, int, float]]:
    """Union of overlapping-or-adjacent token spans, keeping the max score."""
    merged: list[tuple[int, int, float]] = []
    for start, end, score in sorted(windows_pos):
        if merged and start <= merged[-1][1]:
            prev = merged[-1]
            merged[-1] = (prev[0], max(prev[1], end), max(prev[2], score))
        else:
            merged.append((start, end, score))
    return merged


def _finding_from_span(stream: TokenStream, source: bytes, vuln_type: VulnType,
                       tok_start: int, tok_end: int, score: float) -> Finding:
    toks = stream.tokens[tok_start:tok_end]
    byte_start = min(t.byte_start for t in toks)
    byte_end = max(t.byte_end for t in toks)
    if byte_end <= byte_start:
        byte_end = byte_start + 1  # all-zero-width span cannot happen in practice
    snippet = source[byte_start:byte_end][:SNIPPET_LIMIT].decode(
        "utf-8", "replace")
    return Finding(
        vuln_type=vuln_type,
        file_path=stream.file_path,
        byte_start=byte_start,
        byte_end=byte_end,
        line_start=min(t.line for t in toks),
        line_end=max(t.line for t in toks),
        score=score,
        snippet=snippet,
    )


def scan_stream(models: Mapping[VulnType, BiLstmModel], emb: EmbeddingModel,
                stream: TokenStream, source: bytes,
                spec: WindowSpec | None = None,
                types: Iterable[VulnType] | None = None) -> list[Finding]:
    """Score every window for every requested type and merge positives."""
    spec = spec or WindowSpec()
    requested = list(types) if types is not None else sorted(models)
    for vt in requested:
        if vt not in models:
            raise ModelMissing(vt)
    spans = windows(stream, spec)
    if not spans:
        return []
    vectors = embed(emb, stream)
    findings: list[Finding] = []
    # Group equal-length windows so each group scores as one batch.
    by_len: dict[int, list[tuple[int, int]]] = {}
    for s, e in spans:
        by_len.setdefault(e - s, []).append((s, e))
    for vt in requested:
        model = models[vt]
        positive: list[tuple[int, int, float]] = []
        for length in sorted(by_len):
            group = by_len[length]
            batch = np.stack([vectors[s:e] for s, e in group])
            scores, _ = forward_batch(model, batch, training=False)
            for (s, e), score in zip(group, scores):
                if score >= spec.threshold:
                    positive.append((s, e, float(score)))
        for s, e, score in _merge_positive(positive):
            findings.append(_finding_from_span(stream, source, vt, s, e, score))
    findings.sort(key=lambda f: (f.file_path, f.byte_start, f.vuln_type.value))
    return findings


def scan_tree(models: Mapping[VulnType, BiLstmModel], emb: EmbeddingModel,
              files: Sequence[tuple[str, bytes]],
              spec: WindowSpec | None = None,
              types: Iterable[VulnType] | None = None) -> ScanResult:
    """Scan every .py file in a tree; other files are skipped and counted."""
    spec = spec or WindowSpec()
    findings: list[Finding] = []
    scanned: list[str] = []
    skipped: list[str] = []
    degraded: list[str] = []
    for path, content in sorted(files, key=lambda item: item[0]):
        if not path.endswith(".py"):
            skipped.append(path)
            continue
        stream = tokenize(content, file_path=path)
        scanned.append(path)
        if any(t.text == "ERR" for t in stream.tokens):
            degraded.append(path)
        findings.extend(scan_stream(models, emb, stream, content, spec, types))
    findings.sort(key=lambda f: (f.file_path, f.byte_start, f.vuln_type.value))
    summary = ScanSummary()
    for f in findings:
        summary.by_type[f.vuln_type.value] = \
            summary.by_type.get(f.vuln_type.value, 0) + 1
        summary.by_file[f.file_path] = summary.by_file.get(f.file_path, 0) + 1
    return ScanResult(findings=findings, summary=summary, scanned_files=scanned,
                      skipped_files=skipped, degraded_files=degraded)
