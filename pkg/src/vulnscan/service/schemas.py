"""Request/response models for the JSON API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class RegisterRequest(BaseModel):
    username: str = Field(min_length=3, max_length=64)
    password: str = Field(min_length=1)


class LoginRequest(BaseModel):
    username: str
    password: str


class LoginResponse(BaseModel):
    token: str
    expires_at: str


class UserView(BaseModel):
    id: int
    username: str


class ProjectCreate(BaseModel):
    name: str = Field(min_length=1, max_length=200)


class ProjectView(BaseModel):
    id: int
    name: str
    source_kind: str | None = None
    source_ref: str | None = None
    created_at: str


class RepositoryRequest(BaseModel):
    url: str


class ManifestEntry(BaseModel):
    path: str
    size: int
    digest: str


class ManifestResponse(BaseModel):
    files: list[ManifestEntry]


class ScanRequest(BaseModel):
    engine: Literal["bilstm", "llm"]
    types: list[str] = Field(default_factory=list)


class ScanAccepted(BaseModel):
    scan_id: int


class ScanView(BaseModel):
    id: int
    project_id: int
    engine: str
    types: list[str]
    status: str
    error: str | None = None
    created_at: str
    finished_at: str | None = None
    report_id: int | None = None


class RewriteRequest(BaseModel):
    finding_ids: list[int] = Field(min_length=1)


class RewriteResponse(BaseModel):
    secure_code: str
    change_summary: str
    raw_response: str


class FeedbackRequest(BaseModel):
    text: str = Field(min_length=1, max_length=4000)


class ErrorBody(BaseModel):
    code: str
    message: str
