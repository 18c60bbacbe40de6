import base64
import json

import numpy as np
import pytest

from vulnscan.modelio import (FormatError, decode_tensor, encode_tensor,
                              load_payload, save_payload)


def write_doc(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")


def valid_doc():
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    return {"format_version": 1, "kind": "word2vec", "config": {"dim": 3},
            "vocab": ["UNK", "PAD"], "tensors": {"vectors": encode_tensor(arr)}}


def test_tensor_roundtrip_bitwise():
    arr = np.random.default_rng(0).normal(size=(4, 5)).astype(np.float32)
    back = decode_tensor("t", encode_tensor(arr))
    assert np.array_equal(arr, back)
    assert back.dtype == np.float32


def test_payload_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    arr = np.ones((2, 3), dtype=np.float32)
    save_payload(path, "word2vec", {"dim": 3}, {"vectors": arr},
                 vocab=["UNK", "PAD"])
    doc = load_payload(path, expect_kind="word2vec")
    assert np.array_equal(doc["tensors"]["vectors"], arr)
    assert doc["vocab"] == ["UNK", "PAD"]


def test_truncated_file(tmp_path):
    path = tmp_path / "m.json"
    save_payload(path, "word2vec", {}, {"t": np.zeros(2, dtype=np.float32)})
    text = path.read_text()
    path.write_text(text[:len(text) // 2])
    with pytest.raises(FormatError):
        load_payload(path)


def test_bad_format_version(tmp_path):
    doc = valid_doc()
    doc["format_version"] = 99
    path = tmp_path / "m.json"
    write_doc(path, doc)
    with pytest.raises(FormatError):
        load_payload(path)


def test_unknown_kind(tmp_path):
    doc = valid_doc()
    doc["kind"] = "transformer"
    path = tmp_path / "m.json"
    write_doc(path, doc)
    with pytest.raises(FormatError):
        load_payload(path)


def test_kind_mismatch(tmp_path):
    path = tmp_path / "m.json"
    write_doc(path, valid_doc())
    with pytest.raises(FormatError):
        load_payload(path, expect_kind="bilstm")


def test_shape_data_mismatch(tmp_path):
    doc = valid_doc()
    doc["tensors"]["vectors"]["shape"] = [3, 3]  # 9 floats vs 6 encoded
    path = tmp_path / "m.json"
    write_doc(path, doc)
    with pytest.raises(FormatError):
        load_payload(path)


def test_bad_base64(tmp_path):
    doc = valid_doc()
    doc["tensors"]["vectors"]["data"] = "!!!not-base64!!!"
    path = tmp_path / "m.json"
    write_doc(path, doc)
    with pytest.raises(FormatError):
        load_payload(path)


def test_bad_dtype(tmp_path):
    doc = valid_doc()
    doc["tensors"]["vectors"]["dtype"] = "f64"
    path = tmp_path / "m.json"
    write_doc(path, doc)
    with pytest.raises(FormatError):
        load_payload(path)


def test_missing_config(tmp_path):
    doc = valid_doc()
    del doc["config"]
    path = tmp_path / "m.json"
    write_doc(path, doc)
    with pytest.raises(FormatError):
        load_payload(path)


def test_top_level_not_object(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(FormatError):
        load_payload(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_payload(tmp_path / "nope.json")
