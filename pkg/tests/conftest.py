import json
from types import SimpleNamespace

import pytest

from vulnscan.corpus import generate
from vulnscan.embedding import save_embeddings
from vulnscan.nn import TrainingConfig, save_model
from vulnscan.pipeline import train_detector, train_embeddings
from vulnscan.service.jobs import model_filename
from vulnscan.vulntypes import VulnType

SQL = VulnType.SQL_INJECTION


@pytest.fixture(scope="session")
def sql_assets(tmp_path_factory):
    """A real (small) trained embedding + sql_injection classifier pair,
    written to a model dir in the on-disk format. Shared across service,
    CLI and acceptance tests to amortize training cost."""
    samples = generate(SQL, 80, 11)
    emb = train_embeddings(samples)
    config = TrainingConfig(epochs=15, batch_size=16, seed=5)
    model, losses = train_detector(SQL, samples, emb, config)
    model_dir = tmp_path_factory.mktemp("models")
    save_embeddings(emb, model_dir / "embeddings.json")
    save_model(model, model_dir / model_filename(SQL))
    data_path = tmp_path_factory.mktemp("data") / "sql.jsonl"
    from vulnscan.corpus import save_jsonl
    save_jsonl(samples, data_path)
    return SimpleNamespace(vuln_type=SQL, samples=samples, emb=emb,
                           model=model, losses=losses, model_dir=model_dir,
                           data_path=data_path)


@pytest.fixture()
def vulnerable_code():
    return generate(SQL, 2, 99)[0].code


@pytest.fixture()
def clean_code():
    return generate(SQL, 2, 99)[1].code


def make_analysis_response(findings):
    return json.dumps({"findings": findings})
