"""Service configuration (YAML file, documented key set)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..detector import WindowSpec


@dataclass
class LlmSettings:
    provider: str = "mock"  # "mock" | "http"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    timeout_seconds: float = 30.0
    context_budget_chars: int = 24_000
    api_key: str | None = None  # falls back to $LLM_API_KEY


@dataclass
class IngestSettings:
    allowlist: list[str] = field(default_factory=lambda: [r"https://.*"])
    allow_insecure_transport: bool = False
    max_archive_bytes: int = 32 * 1024 * 1024


@dataclass
class AppConfig:
    listen: str = "127.0.0.1:8200"
    store_path: str = "vulnscan.db"
    model_dir: str = "models"
    static_dir: str | None = None
    job_workers: int = 1
    llm: LlmSettings = field(default_factory=LlmSettings)
    ingest: IngestSettings = field(default_factory=IngestSettings)
    window: WindowSpec = field(default_factory=WindowSpec)

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_config(path: str | Path) -> AppConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    cfg = AppConfig()
    cfg.listen = raw.get("listen", cfg.listen)
    store = raw.get("store", {})
    cfg.store_path = store.get("path", cfg.store_path)
    models = raw.get("models", {})
    cfg.model_dir = models.get("dir", cfg.model_dir)
    cfg.static_dir = raw.get("static_dir", cfg.static_dir)
    jobs = raw.get("jobs", {})
    cfg.job_workers = int(jobs.get("workers", cfg.job_workers))
    llm = raw.get("llm", {})
    cfg.llm = LlmSettings(
        provider=llm.get("provider", cfg.llm.provider),
        endpoint=llm.get("endpoint", cfg.llm.endpoint),
        model=llm.get("model", cfg.llm.model),
        timeout_seconds=float(llm.get("timeout_seconds",
                                      cfg.llm.timeout_seconds)),
        context_budget_chars=int(llm.get("context_budget_chars",
                                         cfg.llm.context_budget_chars)),
        api_key=llm.get("api_key"),
    )
    ingest = raw.get("ingest", {})
    cfg.ingest = IngestSettings(
        allowlist=list(ingest.get("allowlist", cfg.ingest.allowlist)),
        allow_insecure_transport=bool(ingest.get("allow_insecure_transport",
                                                 False)),
        max_archive_bytes=int(ingest.get("max_archive_bytes",
                                         cfg.ingest.max_archive_bytes)),
    )
    window = raw.get("scan", {})
    cfg.window = WindowSpec(
        length=int(window.get("window_length", cfg.window.length)),
        stride=int(window.get("window_stride", cfg.window.stride)),
        threshold=float(window.get("threshold", cfg.window.threshold)),
    )
    return cfg
