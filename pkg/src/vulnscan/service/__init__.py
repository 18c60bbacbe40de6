from .app import ApiError, create_app, make_provider, serve
from .config import AppConfig, IngestSettings, LlmSettings, load_config
from .jobs import JobRunner, ScanAssets, load_assets, model_filename

__all__ = [
    "ApiError",
    "AppConfig",
    "IngestSettings",
    "JobRunner",
    "LlmSettings",
    "ScanAssets",
    "create_app",
    "load_assets",
    "load_config",
    "make_provider",
    "model_filename",
    "serve",
]
