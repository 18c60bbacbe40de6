"""Source ingestion: zip upload extraction and shallow repository fetch."""

from __future__ import annotations

import io
import re
import stat
import subprocess
import tempfile
import zipfile
from pathlib import Path, PurePosixPath
from urllib.parse import urlparse


class ArchiveTooLarge(Exception):
    pass


class UnsafePath(Exception):
    pass


class BadArchive(Exception):
    pass


class UrlNotAllowed(Exception):
    pass


class FetchFailed(Exception):
    pass


def _entry_is_symlink(info: zipfile.ZipInfo) -> bool:
    return stat.S_ISLNK(info.external_attr >> 16)


def _validate_entry_path(name: str) -> str:
    path = PurePosixPath(name.replace("\\", "/"))
    if path.is_absolute() or (len(name) >= 2 and name[1] == ":"):
        raise UnsafePath(f"absolute path in archive: {name!r}")
    if ".." in path.parts:
        raise UnsafePath(f"path escapes extraction root: {name!r}")
    return str(path)


def extract_archive(data: bytes, max_bytes: int = 32 * 1024 * 1024
                    ) -> list[tuple[str, bytes]]:
    """Validate and unpack a zip upload into (relative path, bytes) pairs."""
    if len(data) > max_bytes:
        raise ArchiveTooLarge(f"archive is {len(data)} bytes, cap {max_bytes}")
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise BadArchive(str(exc)) from exc
    files: list[tuple[str, bytes]] = []
    with archive:
        for info in archive.infolist():
            if info.is_dir():
                continue
            if _entry_is_symlink(info):
                raise UnsafePath(f"symlink in archive: {info.filename!r}")
            clean = _validate_entry_path(info.filename)
            try:
                content = archive.read(info)
            except zipfile.BadZipFile as exc:
                raise BadArchive(str(exc)) from exc
            files.append((clean, content))
    return files


def validate_repo_url(url: str, allowlist: list[str],
                      allow_insecure_transport: bool = False) -> None:
    scheme = urlparse(url).scheme
    if scheme != "https" and not allow_insecure_transport:
        raise UrlNotAllowed(f"only https repository urls are accepted: {url!r}")
    if not any(re.fullmatch(pattern, url) for pattern in allowlist):
        raise UrlNotAllowed(f"url does not match the ingest allowlist: {url!r}")


def fetch_repository(url: str, allowlist: list[str],
                     allow_insecure_transport: bool = False,
                     timeout_seconds: float = 60.0
                     ) -> list[tuple[str, bytes]]:
    """Shallow-clone the default branch and return the working tree files."""
    validate_repo_url(url, allowlist, allow_insecure_transport)
    with tempfile.TemporaryDirectory(prefix="vulnscan-repo-") as tmp:
        target = Path(tmp) / "checkout"
        try:
            proc = subprocess.run(
                ["git", "clone", "--depth", "1", "--single-branch", url,
                 str(target)],
                capture_output=True, text=True, timeout=timeout_seconds)
        except (subprocess.TimeoutExpired, OSError) as exc:
            raise FetchFailed(str(exc)) from exc
        if proc.returncode != 0:
            raise FetchFailed(proc.stderr.strip() or "git clone failed")
        files: list[tuple[str, bytes]] = []
        for path in sorted(target.rglob("*")):
            if path.is_dir() or ".git" in path.relative_to(target).parts:
                continue
            files.append((str(path.relative_to(target)), path.read_bytes()))
        return files
