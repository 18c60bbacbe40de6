"""Single-file transactional store for users, sessions, projects, sources,
scan jobs, reports and feedback (SQLite-backed)."""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Sequence

from .vulntypes import VulnType

PBKDF2_ITERATIONS = 100_000
SESSION_TTL = timedelta(hours=24)
SALT_BYTES = 16
FEEDBACK_MAX_CHARS = 4000


class DuplicateUsername(Exception):
    pass


class NotFound(Exception):
    pass


class IllegalTransition(Exception):
    pass


class AuthFailed(Exception):
    """Same message for unknown user and wrong password (anti-enumeration)."""

    def __init__(self) -> None:
        super().__init__("invalid username or password")


class JobStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


LEGAL_TRANSITIONS = {
    JobStatus.QUEUED: {JobStatus.RUNNING},
    JobStatus.RUNNING: {JobStatus.DONE, JobStatus.FAILED},
    JobStatus.DONE: set(),
    JobStatus.FAILED: set(),
}

ENGINES = ("bilstm", "llm")


@dataclass(frozen=True)
class UserAccount:
    id: int
    username: str
    created_at: str


@dataclass(frozen=True)
class Session:
    token: str
    user_id: int
    expires_at: str


@dataclass(frozen=True)
class Project:
    id: int
    owner_id: int
    name: str
    source_kind: str | None
    source_ref: str | None
    created_at: str


@dataclass(frozen=True)
class ScanJob:
    id: int
    project_id: int
    engine: str
    types: tuple[VulnType, ...]
    status: JobStatus
    error: str | None
    created_at: str
    finished_at: str | None
    report_id: int | None


@dataclass(frozen=True)
class ScanReport:
    id: int
    scan_id: int
    body: dict
    engine: str
    generated_at: str

    @property
    def findings(self) -> list[dict]:
        return self.body.get("findings", [])

    @property
    def summary(self) -> dict:
        return self.body.get("summary", {})

    @property
    def skipped_files(self) -> list[str]:
        return self.body.get("skipped_files", [])


@dataclass(frozen=True)
class Feedback:
    id: int
    user_id: int
    text: str
    created_at: str


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    username TEXT NOT NULL UNIQUE,
    password_salt BLOB NOT NULL,
    password_hash BLOB NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id INTEGER NOT NULL REFERENCES users(id),
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS projects (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    owner_id INTEGER NOT NULL REFERENCES users(id),
    name TEXT NOT NULL,
    source_kind TEXT,
    source_ref TEXT,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS blobs (
    digest TEXT PRIMARY KEY,
    content BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS project_files (
    project_id INTEGER NOT NULL REFERENCES projects(id),
    path TEXT NOT NULL,
    digest TEXT NOT NULL REFERENCES blobs(digest),
    size INTEGER NOT NULL,
    PRIMARY KEY (project_id, path)
);
CREATE TABLE IF NOT EXISTS scan_jobs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    project_id INTEGER NOT NULL REFERENCES projects(id),
    engine TEXT NOT NULL,
    types TEXT NOT NULL,
    status TEXT NOT NULL,
    error TEXT,
    created_at TEXT NOT NULL,
    finished_at TEXT,
    report_id INTEGER
);
CREATE TABLE IF NOT EXISTS reports (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    scan_id INTEGER NOT NULL REFERENCES scan_jobs(id),
    body TEXT NOT NULL,
    engine TEXT NOT NULL,
    generated_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS feedback (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id INTEGER NOT NULL REFERENCES users(id),
    text TEXT NOT NULL,
    created_at TEXT NOT NULL
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def hash_password(password: str, salt: bytes,
                  iterations: int = PBKDF2_ITERATIONS) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt,
                               iterations)


class Store:
    """One handle serializes writes; safe to share between HTTP handlers and
    the job runner."""

    def __init__(self, path: str | Path,
                 pbkdf2_iterations: int = PBKDF2_ITERATIONS):
        self.path = str(path)
        self.pbkdf2_iterations = pbkdf2_iterations
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- users & sessions ---------------------------------------------------

    def create_user(self, username: str, password: str) -> UserAccount:
        if not 3 <= len(username) <= 64:
            raise ValueError("username must be 3-64 characters")
        if not password:
            raise ValueError("password must be non-empty")
        salt = secrets.token_bytes(SALT_BYTES)
        digest = hash_password(password, salt, self.pbkdf2_iterations)
        created = _now()
        with self._lock, self._conn:
            try:
                cur = self._conn.execute(
                    "INSERT INTO users (username, password_salt, password_hash,"
                    " created_at) VALUES (?, ?, ?, ?)",
                    (username, salt, digest, created))
            except sqlite3.IntegrityError:
                raise DuplicateUsername(username) from None
        return UserAccount(id=cur.lastrowid, username=username,
                           created_at=created)

    def verify_login(self, username: str, password: str) -> Session:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM users WHERE username = ?", (username,)
            ).fetchone()
        if row is None:
            # Burn the same hashing cost for unknown users.
            hash_password(password, b"\0" * SALT_BYTES, self.pbkdf2_iterations)
            raise AuthFailed()
        expected = hash_password(password, row["password_salt"],
                                 self.pbkdf2_iterations)
        if not hmac.compare_digest(expected, row["password_hash"]):
            raise AuthFailed()
        token = secrets.token_urlsafe(32)
        expires = (datetime.now(timezone.utc) + SESSION_TTL).isoformat()
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO sessions (token, user_id, expires_at)"
                " VALUES (?, ?, ?)", (token, row["id"], expires))
        return Session(token=token, user_id=row["id"], expires_at=expires)

    def get_session(self, token: str) -> Session | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM sessions WHERE token = ?", (token,)).fetchone()
        if row is None:
            return None
        if datetime.fromisoformat(row["expires_at"]) <= datetime.now(timezone.utc):
            return None
        return Session(token=row["token"], user_id=row["user_id"],
                       expires_at=row["expires_at"])

    def delete_session(self, token: str) -> None:
        with self._lock, self._conn:
            self._conn.execute("DELETE FROM sessions WHERE token = ?", (token,))

    def get_user(self, user_id: int) -> UserAccount:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM users WHERE id = ?", (user_id,)).fetchone()
        if row is None:
            raise NotFound(f"user {user_id}")
        return UserAccount(id=row["id"], username=row["username"],
                           created_at=row["created_at"])

    # -- projects & sources -------------------------------------------------

    def create_project(self, owner_id: int, name: str) -> Project:
        if not name or len(name) > 200:
            raise ValueError("project name must be 1-200 characters")
        created = _now()
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO projects (owner_id, name, created_at)"
                " VALUES (?, ?, ?)", (owner_id, name, created))
        return Project(id=cur.lastrowid, owner_id=owner_id, name=name,
                       source_kind=None, source_ref=None, created_at=created)

    def get_project(self, project_id: int) -> Project:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM projects WHERE id = ?", (project_id,)).fetchone()
        if row is None:
            raise NotFound(f"project {project_id}")
        return self._project(row)

    def list_projects(self, owner_id: int) -> list[Project]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM projects WHERE owner_id = ? ORDER BY id",
                (owner_id,)).fetchall()
        return [self._project(r) for r in rows]

    @staticmethod
    def _project(row: sqlite3.Row) -> Project:
        return Project(id=row["id"], owner_id=row["owner_id"], name=row["name"],
                       source_kind=row["source_kind"],
                       source_ref=row["source_ref"],
                       created_at=row["created_at"])

    def set_project_source(self, project_id: int, kind: str, ref: str) -> None:
        if kind not in ("upload", "repository"):
            raise ValueError(f"unknown source kind {kind!r}")
        with self._lock, self._conn:
            cur = self._conn.execute(
                "UPDATE projects SET source_kind = ?, source_ref = ?"
                " WHERE id = ?", (kind, ref, project_id))
            if cur.rowcount == 0:
                raise NotFound(f"project {project_id}")

    def put_files(self, project_id: int,
                  files: Sequence[tuple[str, bytes]]) -> list[dict]:
        """Store content-addressed files, replacing the project's manifest."""
        self.get_project(project_id)
        manifest = []
        with self._lock, self._conn:
            self._conn.execute(
                "DELETE FROM project_files WHERE project_id = ?", (project_id,))
            for path, content in files:
                digest = hashlib.sha256(content).hexdigest()
                self._conn.execute(
                    "INSERT OR IGNORE INTO blobs (digest, content) VALUES (?, ?)",
                    (digest, content))
                self._conn.execute(
                    "INSERT OR REPLACE INTO project_files"
                    " (project_id, path, digest, size) VALUES (?, ?, ?, ?)",
                    (project_id, path, digest, len(content)))
                manifest.append({"path": path, "size": len(content),
                                 "digest": digest})
        return manifest

    def get_files(self, project_id: int) -> list[tuple[str, bytes]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT pf.path, b.content FROM project_files pf"
                " JOIN blobs b ON b.digest = pf.digest"
                " WHERE pf.project_id = ? ORDER BY pf.path",
                (project_id,)).fetchall()
        return [(r["path"], r["content"]) for r in rows]

    # -- scan jobs ------------------------------------------------------------

    def create_scan(self, project_id: int, engine: str,
                    types: Sequence[VulnType]) -> ScanJob:
        if engine not in ENGINES:
            raise ValueError(f"unknown engine {engine!r}")
        self.get_project(project_id)
        types = tuple(types)
        created = _now()
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO scan_jobs (project_id, engine, types, status,"
                " created_at) VALUES (?, ?, ?, ?, ?)",
                (project_id, engine, json.dumps([t.value for t in types]),
                 JobStatus.QUEUED.value, created))
        return ScanJob(id=cur.lastrowid, project_id=project_id, engine=engine,
                       types=types, status=JobStatus.QUEUED, error=None,
                       created_at=created, finished_at=None, report_id=None)

    def get_scan(self, scan_id: int) -> ScanJob:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM scan_jobs WHERE id = ?", (scan_id,)).fetchone()
        if row is None:
            raise NotFound(f"scan {scan_id}")
        return ScanJob(
            id=row["id"], project_id=row["project_id"], engine=row["engine"],
            types=tuple(VulnType(t) for t in json.loads(row["types"])),
            status=JobStatus(row["status"]), error=row["error"],
            created_at=row["created_at"], finished_at=row["finished_at"],
            report_id=row["report_id"])

    def update_job_status(self, scan_id: int, new_status: JobStatus | str,
                          error: str | None = None,
                          report_id: int | None = None) -> ScanJob:
        new_status = JobStatus(new_status)
        if new_status is JobStatus.DONE and report_id is None:
            raise ValueError("done requires a report_id")
        if new_status is not JobStatus.DONE and report_id is not None:
            raise ValueError("only done carries a report_id")
        with self._lock, self._conn:
            job = self.get_scan(scan_id)
            if new_status not in LEGAL_TRANSITIONS[job.status]:
                raise IllegalTransition(
                    f"{job.status.value} -> {new_status.value}")
            finished = _now() if new_status in (JobStatus.DONE,
                                                JobStatus.FAILED) else None
            self._conn.execute(
                "UPDATE scan_jobs SET status = ?, error = ?, finished_at = ?,"
                " report_id = ? WHERE id = ?",
                (new_status.value, error, finished, report_id, scan_id))
        return self.get_scan(scan_id)

    # -- reports & feedback ---------------------------------------------------

    def create_report(self, scan_id: int, body: dict, engine: str) -> ScanReport:
        generated = _now()
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO reports (scan_id, body, engine, generated_at)"
                " VALUES (?, ?, ?, ?)",
                (scan_id, json.dumps(body, sort_keys=True), engine, generated))
        return ScanReport(id=cur.lastrowid, scan_id=scan_id, body=body,
                          engine=engine, generated_at=generated)

    def get_report(self, report_id: int) -> ScanReport:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM reports WHERE id = ?", (report_id,)).fetchone()
        if row is None:
            raise NotFound(f"report {report_id}")
        return ScanReport(id=row["id"], scan_id=row["scan_id"],
                          body=json.loads(row["body"]), engine=row["engine"],
                          generated_at=row["generated_at"])

    def add_feedback(self, user_id: int, text: str) -> Feedback:
        if not text or len(text) > FEEDBACK_MAX_CHARS:
            raise ValueError(
                f"feedback must be 1-{FEEDBACK_MAX_CHARS} characters")
        created = _now()
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO feedback (user_id, text, created_at)"
                " VALUES (?, ?, ?)", (user_id, text, created))
        return Feedback(id=cur.lastrowid, user_id=user_id, text=text,
                        created_at=created)

    def list_feedback(self, user_id: int) -> list[Feedback]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM feedback WHERE user_id = ? ORDER BY id",
                (user_id,)).fetchall()
        return [Feedback(id=r["id"], user_id=r["user_id"], text=r["text"],
                         created_at=r["created_at"]) for r in rows]
