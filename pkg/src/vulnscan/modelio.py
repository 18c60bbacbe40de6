"""Shared on-disk model format for embeddings and classifiers.

A model file is a UTF-8 JSON document:

    {
      "format_version": 1,
      "kind": "word2vec" | "bilstm",
      "config": {...},
      "vocab": [...],                      # word2vec only
      "tensors": {name: {"shape": [...], "dtype": "f32", "data": "<base64>"}},
      ...                                  # kind-specific extras (e.g. vuln_type)
    }

Tensor data is base64 of little-endian IEEE-754 float32, row-major, so a
save/load round trip is bitwise exact.
"""

from __future__ import annotations

import base64
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

FORMAT_VERSION = 1
KINDS = ("word2vec", "bilstm")


class FormatError(Exception):
    """Raised when a model file is malformed or inconsistent."""


def encode_tensor(arr: np.ndarray) -> dict[str, Any]:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    data = arr.astype("<f4", copy=False).tobytes()
    return {
        "shape": list(arr.shape),
        "dtype": "f32",
        "data": base64.b64encode(data).decode("ascii"),
    }


def decode_tensor(name: str, obj: Any) -> np.ndarray:
    if not isinstance(obj, dict):
        raise FormatError(f"tensor {name!r}: expected object")
    shape = obj.get("shape")
    if (not isinstance(shape, list) or
            not all(isinstance(d, int) and d >= 0 for d in shape)):
        raise FormatError(f"tensor {name!r}: bad shape")
    if obj.get("dtype") != "f32":
        raise FormatError(f"tensor {name!r}: unsupported dtype {obj.get('dtype')!r}")
    try:
        raw = base64.b64decode(obj.get("data", ""), validate=True)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"tensor {name!r}: bad base64 data") from exc
    expected = math.prod(shape) * 4
    if len(raw) != expected:
        raise FormatError(
            f"tensor {name!r}: data has {len(raw)} bytes, shape needs {expected}")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)


def save_payload(path: str | Path, kind: str, config: dict[str, Any],
                 tensors: dict[str, np.ndarray],
                 vocab: list[str] | None = None,
                 extra: dict[str, Any] | None = None) -> None:
    doc: dict[str, Any] = {"format_version": FORMAT_VERSION, "kind": kind,
                           "config": config}
    if vocab is not None:
        doc["vocab"] = vocab
    doc["tensors"] = {name: encode_tensor(arr) for name, arr in tensors.items()}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_payload(path: str | Path, expect_kind: str | None = None) -> dict[str, Any]:
    """Load and validate a model file; tensors come back as float32 arrays."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not a valid model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("not a valid model file: top level must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise FormatError(f"unknown kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise FormatError(f"expected kind {expect_kind!r}, found {kind!r}")
    if not isinstance(doc.get("config"), dict):
        raise FormatError("missing config object")
    raw_tensors = doc.get("tensors")
    if not isinstance(raw_tensors, dict):
        raise FormatError("missing tensors object")
    doc["tensors"] = {name: decode_tensor(name, obj)
                      for name, obj in raw_tensors.items()}
    return doc
