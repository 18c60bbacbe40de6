"""The seven vulnerability classes the scanner detects."""

from __future__ import annotations

from enum import Enum


class VulnType(str, Enum):
    SQL_INJECTION = "sql_injection"
    XSS = "xss"
    COMMAND_INJECTION = "command_injection"
    XSRF = "xsrf"
    PATH_DISCLOSURE = "path_disclosure"
    REMOTE_CODE_EXECUTION = "remote_code_execution"
    OPEN_REDIRECT = "open_redirect"

    @classmethod
    def parse(cls, name: str) -> "VulnType":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown vulnerability type {name!r}") from None
