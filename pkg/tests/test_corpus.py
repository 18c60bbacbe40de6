import json

import pytest

from vulnscan.corpus import (InvalidCount, LabeledSample, SchemaError,
                             generate, load_jsonl, save_jsonl)
from vulnscan.tokenizer import tokenize
from vulnscan.vulntypes import VulnType


def test_generation_is_deterministic():
    a = generate(VulnType.SQL_INJECTION, 4, 1)
    b = generate(VulnType.SQL_INJECTION, 4, 1)
    assert a == b
    c = generate(VulnType.SQL_INJECTION, 4, 2)
    assert a != c


def test_balance_exact():
    for vt in VulnType:
        samples = generate(vt, 100, 3)
        labels = [s.label for s in samples]
        assert labels.count(1) == 50
        assert labels.count(0) == 50


def test_invalid_counts():
    with pytest.raises(InvalidCount):
        generate(VulnType.XSS, 3, 0)
    with pytest.raises(InvalidCount):
        generate(VulnType.XSS, 0, 0)
    with pytest.raises(InvalidCount):
        generate(VulnType.XSS, -2, 0)


def test_positive_sql_injection_contains_execute_identifier():
    for seed in (0, 1, 7):
        for sample in generate(VulnType.SQL_INJECTION, 60, seed):
            if sample.label == 1:
                texts = tokenize(sample.code).texts()
                assert "execute" in texts


def test_generated_code_tokenizes_cleanly():
    for vt in VulnType:
        for sample in generate(vt, 20, 5):
            stream = tokenize(sample.code)
            assert len(stream.tokens) > 0
            assert "ERR" not in stream.texts(), sample.code


def test_generated_code_is_valid_python():
    import ast
    for vt in VulnType:
        for sample in generate(vt, 12, 9):
            ast.parse(sample.code)


def test_positive_and_negative_differ():
    for vt in VulnType:
        samples = generate(vt, 30, 4)
        pos = {s.code for s in samples if s.label == 1}
        neg = {s.code for s in samples if s.label == 0}
        assert not pos & neg


def test_jsonl_roundtrip(tmp_path):
    samples = generate(VulnType.OPEN_REDIRECT, 10, 2)
    path = tmp_path / "corpus.jsonl"
    save_jsonl(samples, path)
    assert load_jsonl(path) == samples


def test_jsonl_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_jsonl(path) == []


def test_jsonl_missing_field_reports_line(tmp_path):
    good = json.dumps({"code": "x", "label": 1, "type": "xss",
                       "source": "synthetic"})
    bad = json.dumps({"code": "y", "type": "xss", "source": "synthetic"})
    path = tmp_path / "bad.jsonl"
    path.write_text(good + "\n" + bad + "\n")
    with pytest.raises(SchemaError) as exc:
        load_jsonl(path)
    assert exc.value.line == 2
    assert "label" in str(exc.value)


def test_jsonl_invalid_json_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(SchemaError) as exc:
        load_jsonl(path)
    assert exc.value.line == 1


def test_jsonl_unknown_fields_ignored(tmp_path):
    row = {"code": "x = 1", "label": 0, "type": "xss", "source": "external",
           "extra": "ignored"}
    path = tmp_path / "extra.jsonl"
    path.write_text(json.dumps(row) + "\n")
    samples = load_jsonl(path)
    assert samples == [LabeledSample(code="x = 1", label=0,
                                     vuln_type=VulnType.XSS,
                                     source="external")]


def test_jsonl_bad_values(tmp_path):
    cases = [
        {"code": "", "label": 0, "type": "xss", "source": "synthetic"},
        {"code": "x", "label": 5, "type": "xss", "source": "synthetic"},
        {"code": "x", "label": 0, "type": "nope", "source": "synthetic"},
        {"code": "x", "label": 0, "type": "xss", "source": "vendor"},
    ]
    for row in cases:
        path = tmp_path / "case.jsonl"
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(SchemaError):
            load_jsonl(path)
