"""HTTP API: auth, projects, source ingestion, scans, reports, rewriting,
feedback. All bodies are JSON; errors are {"code", "message"}."""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import Depends, FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import llm as llm_mod
from ..store import (AuthFailed, DuplicateUsername, JobStatus, NotFound,
                     Session, Store)
from ..vulntypes import VulnType
from . import ingest
from .config import AppConfig
from .jobs import JobRunner, ScanAssets, load_assets
from .reports import render_html
from .schemas import (FeedbackRequest, LoginRequest, ProjectCreate,
                      RegisterRequest, RepositoryRequest, RewriteRequest,
                      ScanRequest)

log = logging.getLogger("vulnscan.service")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def make_provider(config: AppConfig) -> llm_mod.Provider:
    if config.llm.provider == "mock":
        return llm_mod.MockProvider(['{"findings": []}'])
    return llm_mod.HttpProvider(endpoint=config.llm.endpoint,
                                model=config.llm.model,
                                api_key=config.llm.api_key,
                                timeout_seconds=config.llm.timeout_seconds)


def create_app(config: AppConfig | None = None, store: Store | None = None,
               assets: ScanAssets | None = None,
               provider: llm_mod.Provider | None = None) -> FastAPI:
    config = config or AppConfig()
    store = store or Store(config.store_path)
    if assets is None:
        assets = (load_assets(config.model_dir)
                  if Path(config.model_dir).is_dir() else ScanAssets())
    provider = provider or make_provider(config)
    runner = JobRunner(store, assets, provider, config.window,
                       workers=config.job_workers,
                       llm_context_budget=config.llm.context_budget_chars,
                       llm_model_name=config.llm.model)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        runner.start()
        yield
        runner.stop()

    app = FastAPI(title="vulnscan", lifespan=lifespan)
    app.state.config = config
    app.state.store = store
    app.state.assets = assets
    app.state.provider = provider
    app.state.runner = runner

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_: Request,
                                exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=422,
                            content={"code": "validation", "message": str(exc)})

    @app.exception_handler(Exception)
    async def handle_unexpected(_: Request, exc: Exception) -> JSONResponse:
        log.exception("unhandled error", exc_info=exc)
        return JSONResponse(status_code=500,
                            content={"code": "internal",
                                     "message": "internal server error"})

    def require_session(request: Request) -> Session:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError(401, "unauthenticated",
                           "missing or malformed Authorization header")
        session = store.get_session(header[7:].strip())
        if session is None:
            raise ApiError(401, "unauthenticated",
                           "invalid or expired session token")
        return session

    def owned_project(project_id: int, session: Session):
        try:
            project = store.get_project(project_id)
        except NotFound:
            raise ApiError(404, "not_found", f"project {project_id} not found")
        if project.owner_id != session.user_id:
            raise ApiError(403, "forbidden", "project belongs to another user")
        return project

    def owned_scan(scan_id: int, session: Session):
        try:
            job = store.get_scan(scan_id)
        except NotFound:
            raise ApiError(404, "not_found", f"scan {scan_id} not found")
        owned_project(job.project_id, session)
        return job

    def parse_types(names: list[str]) -> list[VulnType]:
        try:
            return [VulnType(n) for n in names]
        except ValueError as exc:
            raise ApiError(422, "validation", str(exc)) from exc

    def scan_view(job) -> dict:
        return {
            "id": job.id,
            "project_id": job.project_id,
            "engine": job.engine,
            "types": [t.value for t in job.types],
            "status": job.status.value,
            "error": job.error,
            "created_at": job.created_at,
            "finished_at": job.finished_at,
            "report_id": job.report_id,
        }

    def project_view(project) -> dict:
        return {
            "id": project.id,
            "name": project.name,
            "source_kind": project.source_kind,
            "source_ref": project.source_ref,
            "created_at": project.created_at,
        }

    # -- public ---------------------------------------------------------------

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/api/register", status_code=201)
    def register(body: RegisterRequest) -> dict:
        try:
            user = store.create_user(body.username, body.password)
        except DuplicateUsername:
            raise ApiError(409, "duplicate_username",
                           f"username {body.username!r} is taken")
        except ValueError as exc:
            raise ApiError(422, "validation", str(exc))
        return {"id": user.id, "username": user.username}

    @app.post("/api/login")
    def login(body: LoginRequest) -> dict:
        try:
            session = store.verify_login(body.username, body.password)
        except AuthFailed as exc:
            raise ApiError(401, "auth_failed", str(exc))
        return {"token": session.token, "expires_at": session.expires_at}

    # -- authenticated ----------------------------------------------------------

    @app.post("/api/logout")
    def logout(session: Session = Depends(require_session)) -> dict:
        store.delete_session(session.token)
        return {"ok": True}

    @app.post("/api/projects", status_code=201)
    def create_project(body: ProjectCreate,
                       session: Session = Depends(require_session)) -> dict:
        try:
            project = store.create_project(session.user_id, body.name)
        except ValueError as exc:
            raise ApiError(422, "validation", str(exc))
        return project_view(project)

    @app.get("/api/projects")
    def list_projects(session: Session = Depends(require_session)) -> list:
        return [project_view(p) for p in store.list_projects(session.user_id)]

    @app.get("/api/projects/{project_id}")
    def get_project(project_id: int,
                    session: Session = Depends(require_session)) -> dict:
        return project_view(owned_project(project_id, session))

    @app.post("/api/projects/{project_id}/sources")
    def upload_sources(project_id: int, file: UploadFile,
                       session: Session = Depends(require_session)) -> dict:
        owned_project(project_id, session)
        data = file.file.read()
        try:
            files = ingest.extract_archive(
                data, max_bytes=config.ingest.max_archive_bytes)
        except ingest.ArchiveTooLarge as exc:
            raise ApiError(422, "archive_too_large", str(exc))
        except ingest.UnsafePath as exc:
            raise ApiError(422, "unsafe_path", str(exc))
        except ingest.BadArchive as exc:
            raise ApiError(422, "bad_archive", str(exc))
        manifest = store.put_files(project_id, files)
        store.set_project_source(project_id, "upload",
                                 f"upload:{len(manifest)} files")
        return {"files": manifest}

    @app.post("/api/projects/{project_id}/repository")
    def fetch_repository(project_id: int, body: RepositoryRequest,
                         session: Session = Depends(require_session)) -> dict:
        owned_project(project_id, session)
        try:
            files = ingest.fetch_repository(
                body.url, config.ingest.allowlist,
                config.ingest.allow_insecure_transport)
        except ingest.UrlNotAllowed as exc:
            raise ApiError(422, "url_not_allowed", str(exc))
        except ingest.FetchFailed as exc:
            raise ApiError(502, "fetch_failed", str(exc))
        manifest = store.put_files(project_id, files)
        store.set_project_source(project_id, "repository", body.url)
        return {"files": manifest}

    @app.post("/api/projects/{project_id}/scans", status_code=202)
    def create_scan(project_id: int, body: ScanRequest,
                    session: Session = Depends(require_session)) -> dict:
        owned_project(project_id, session)
        types = parse_types(body.types)
        job = store.create_scan(project_id, body.engine, types)
        runner.submit(job.id)
        return {"scan_id": job.id}

    @app.get("/api/scans/{scan_id}")
    def get_scan(scan_id: int,
                 session: Session = Depends(require_session)) -> dict:
        return scan_view(owned_scan(scan_id, session))

    @app.get("/api/scans/{scan_id}/report")
    def get_report(scan_id: int, format: str = "json",
                   session: Session = Depends(require_session)):
        job = owned_scan(scan_id, session)
        if job.status is not JobStatus.DONE or job.report_id is None:
            raise ApiError(404, "not_found",
                           f"scan {scan_id} has no report (status "
                           f"{job.status.value})")
        report = store.get_report(job.report_id)
        if format == "html":
            return HTMLResponse(render_html(report.id, report.engine,
                                            report.generated_at, report.body))
        if format != "json":
            raise ApiError(422, "validation",
                           "format must be 'json' or 'html'")
        return {
            "id": report.id,
            "scan_id": report.scan_id,
            "engine": report.engine,
            "generated_at": report.generated_at,
            **report.body,
        }

    @app.post("/api/scans/{scan_id}/rewrite")
    def rewrite(scan_id: int, body: RewriteRequest,
                session: Session = Depends(require_session)) -> dict:
        job = owned_scan(scan_id, session)
        if job.status is not JobStatus.DONE or job.report_id is None:
            raise ApiError(422, "validation",
                           "scan has no report to rewrite from")
        report = store.get_report(job.report_id)
        by_id = {f.get("id"): f for f in report.findings}
        try:
            selected = [by_id[i] for i in body.finding_ids]
        except KeyError as exc:
            raise ApiError(422, "validation",
                           f"unknown finding id {exc.args[0]!r}")
        paths = {f["file_path"] for f in selected}
        if len(paths) != 1:
            raise ApiError(422, "validation",
                           "rewrite works on findings from a single file")
        path = paths.pop()
        content = dict(store.get_files(job.project_id)).get(path)
        if content is None:
            raise ApiError(404, "not_found", f"source file {path} missing")
        code = content.decode("utf-8", "replace")
        llm_findings = [
            {"vuln_type": f["vuln_type"], "line_start": f["line_start"],
             "line_end": f["line_end"],
             "explanation": f.get("explanation", "")}
            for f in selected
        ]
        try:
            result = llm_mod.secure_rewrite(provider, code, llm_findings,
                                            model_name=config.llm.model)
        except llm_mod.MissingCredentials as exc:
            raise ApiError(502, "provider_error", str(exc))
        except llm_mod.NoCodeInResponse as exc:
            raise ApiError(502, "provider_error", str(exc))
        except llm_mod.ProviderTimeout as exc:
            raise ApiError(502, "provider_error", str(exc))
        except llm_mod.ProviderError as exc:
            raise ApiError(502, "provider_error", str(exc))
        return {"secure_code": result.secure_code,
                "change_summary": result.change_summary,
                "raw_response": result.raw_response}

    @app.post("/api/feedback", status_code=201)
    def feedback(body: FeedbackRequest,
                 session: Session = Depends(require_session)) -> dict:
        try:
            entry = store.add_feedback(session.user_id, body.text)
        except ValueError as exc:
            raise ApiError(422, "validation", str(exc))
        return {"id": entry.id}

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="webui")

    return app


def serve(config: AppConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
