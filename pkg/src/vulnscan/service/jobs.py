"""Background scan execution: FIFO queue, worker threads, report writing."""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .. import llm as llm_mod
from ..detector import SNIPPET_LIMIT, WindowSpec, scan_tree
from ..embedding import EmbeddingModel, load_embeddings
from ..nn import BiLstmModel, load_model
from ..store import JobStatus, ScanJob, Store
from ..vulntypes import VulnType

log = logging.getLogger("vulnscan.jobs")

EMBEDDINGS_FILE = "embeddings.json"


@dataclass
class ScanAssets:
    embeddings: EmbeddingModel | None = None
    models: dict[VulnType, BiLstmModel] = field(default_factory=dict)


def model_filename(vuln_type: VulnType) -> str:
    return f"bilstm_{vuln_type.value}.json"


def load_assets(model_dir: str | Path) -> ScanAssets:
    """Load embeddings plus every per-type classifier present in the dir."""
    assets = ScanAssets()
    model_dir = Path(model_dir)
    emb_path = model_dir / EMBEDDINGS_FILE
    if emb_path.exists():
        assets.embeddings = load_embeddings(emb_path)
    for vt in VulnType:
        path = model_dir / model_filename(vt)
        if path.exists():
            assets.models[vt] = load_model(path)
    return assets


def _line_offsets(text: str) -> list[int]:
    offsets = [0]
    for line in text.splitlines(keepends=True):
        offsets.append(offsets[-1] + len(line.encode("utf-8")))
    return offsets


def build_summary(findings: list[dict]) -> dict:
    by_type: dict[str, int] = {}
    by_file: dict[str, int] = {}
    for f in findings:
        by_type[f["vuln_type"]] = by_type.get(f["vuln_type"], 0) + 1
        by_file[f["file_path"]] = by_file.get(f["file_path"], 0) + 1
    return {"by_type": by_type, "by_file": by_file}


def run_bilstm_scan(assets: ScanAssets, files: list[tuple[str, bytes]],
                    types: tuple[VulnType, ...], spec: WindowSpec) -> dict:
    if assets.embeddings is None:
        raise RuntimeError("no embedding model loaded (models dir incomplete)")
    result = scan_tree(assets.models, assets.embeddings, files, spec,
                       types or None)
    body = result.to_dict()
    for i, finding in enumerate(body["findings"], start=1):
        finding["id"] = i
    return body


def run_llm_scan(provider: llm_mod.Provider, files: list[tuple[str, bytes]],
                 types: tuple[VulnType, ...],
                 context_budget_chars: int, model_name: str) -> dict:
    findings: list[dict] = []
    warnings: list[str] = []
    scanned: list[str] = []
    skipped: list[str] = []
    for path, content in sorted(files, key=lambda item: item[0]):
        if not path.endswith(".py"):
            skipped.append(path)
            continue
        scanned.append(path)
        code = content.decode("utf-8", "replace")
        analysis = llm_mod.analyze_code(
            provider, code, list(types) or None,
            context_budget_chars=context_budget_chars, model_name=model_name)
        warnings.extend(f"{path}: {w}" for w in analysis.warnings)
        offsets = _line_offsets(code)
        lines = code.splitlines(keepends=True)
        for f in analysis.findings:
            start = min(f.line_start, len(lines)) - 1
            end = min(f.line_end, len(lines))
            snippet = "".join(lines[start:end])
            findings.append({
                "vuln_type": f.vuln_type,
                "file_path": path,
                "byte_start": offsets[start],
                "byte_end": offsets[end],
                "line_start": f.line_start,
                "line_end": f.line_end,
                "score": 1.0,
                "snippet": snippet[:SNIPPET_LIMIT],
                "origin": "llm",
                "explanation": f.explanation,
            })
    findings.sort(key=lambda f: (f["file_path"], f["byte_start"],
                                 f["vuln_type"]))
    for i, finding in enumerate(findings, start=1):
        finding["id"] = i
    return {
        "findings": findings,
        "summary": build_summary(findings),
        "scanned_files": scanned,
        "skipped_files": skipped,
        "degraded_files": [],
        "warnings": warnings,
    }


class JobRunner:
    """FIFO scan executor; worker count is configurable, default one."""

    def __init__(self, store: Store, assets: ScanAssets,
                 provider: llm_mod.Provider, window: WindowSpec,
                 workers: int = 1,
                 llm_context_budget: int = llm_mod.DEFAULT_CONTEXT_BUDGET,
                 llm_model_name: str = llm_mod.DEFAULT_MODEL):
        self.store = store
        self.assets = assets
        self.provider = provider
        self.window = window
        self.llm_context_budget = llm_context_budget
        self.llm_model_name = llm_model_name
        self._queue: queue.Queue[int | None] = queue.Queue()
        self._threads = [
            threading.Thread(target=self._work, daemon=True,
                             name=f"scan-worker-{i}")
            for i in range(max(1, workers))
        ]
        self._started = False

    def start(self) -> None:
        if not self._started:
            self._started = True
            for t in self._threads:
                t.start()

    def stop(self) -> None:
        if self._started:
            for _ in self._threads:
                self._queue.put(None)
            for t in self._threads:
                t.join(timeout=5)
            self._started = False

    def submit(self, scan_id: int) -> None:
        self._queue.put(scan_id)

    def _work(self) -> None:
        while True:
            scan_id = self._queue.get()
            if scan_id is None:
                return
            try:
                self.execute(scan_id)
            except Exception:
                log.exception("scan %s crashed outside job handling", scan_id)

    def execute(self, scan_id: int) -> None:
        job = self.store.get_scan(scan_id)
        self.store.update_job_status(scan_id, JobStatus.RUNNING)
        try:
            body = self._run_engine(job)
            report = self.store.create_report(scan_id, body, job.engine)
            self.store.update_job_status(scan_id, JobStatus.DONE,
                                         report_id=report.id)
        except Exception as exc:
            log.warning("scan %s failed: %s", scan_id, exc)
            self.store.update_job_status(scan_id, JobStatus.FAILED,
                                         error=str(exc))

    def _run_engine(self, job: ScanJob) -> dict:
        files = self.store.get_files(job.project_id)
        if job.engine == "bilstm":
            return run_bilstm_scan(self.assets, files, job.types, self.window)
        return run_llm_scan(self.provider, files, job.types,
                            self.llm_context_budget, self.llm_model_name)
