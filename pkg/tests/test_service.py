import io
import json
import time
import zipfile

import pytest
from fastapi.testclient import TestClient

from vulnscan.corpus import generate
from vulnscan.llm import MockProvider
from vulnscan.service.app import create_app
from vulnscan.service.config import AppConfig, IngestSettings
from vulnscan.service.jobs import load_assets
from vulnscan.store import Store
from vulnscan.vulntypes import VulnType

SQL = VulnType.SQL_INJECTION

# every documented route; (method, path, needs_auth)
ENDPOINT_TABLE = [
    ("POST", "/api/register", False),
    ("POST", "/api/login", False),
    ("GET", "/api/health", False),
    ("POST", "/api/logout", True),
    ("POST", "/api/projects", True),
    ("GET", "/api/projects", True),
    ("GET", "/api/projects/1", True),
    ("POST", "/api/projects/1/sources", True),
    ("POST", "/api/projects/1/repository", True),
    ("POST", "/api/projects/1/scans", True),
    ("GET", "/api/scans/1", True),
    ("GET", "/api/scans/1/report", True),
    ("POST", "/api/scans/1/rewrite", True),
    ("POST", "/api/feedback", True),
]


def make_zip(entries):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, content in entries:
            zf.writestr(name, content)
    return buf.getvalue()


@pytest.fixture()
def service(tmp_path, sql_assets):
    config = AppConfig(store_path=str(tmp_path / "svc.db"),
                       model_dir=str(sql_assets.model_dir),
                       ingest=IngestSettings(allowlist=[r"https://allowed/.*"]))
    store = Store(config.store_path, pbkdf2_iterations=1000)
    provider = MockProvider([json.dumps({"findings": []})])
    app = create_app(config, store=store,
                     assets=load_assets(sql_assets.model_dir),
                     provider=provider)
    with TestClient(app, raise_server_exceptions=False) as client:
        client.provider = provider
        yield client
    store.close()


def register_and_login(client, username="tester", password="pw123"):
    r = client.post("/api/register", json={"username": username,
                                           "password": password})
    assert r.status_code == 201, r.text
    r = client.post("/api/login", json={"username": username,
                                        "password": password})
    assert r.status_code == 200, r.text
    token = r.json()["token"]
    return {"Authorization": f"Bearer {token}"}


def poll_scan(client, headers, scan_id, timeout=30.0):
    statuses = []
    deadline = time.time() + timeout
    while time.time() < deadline:
        r = client.get(f"/api/scans/{scan_id}", headers=headers)
        assert r.status_code == 200, r.text
        body = r.json()
        if not statuses or statuses[-1] != body["status"]:
            statuses.append(body["status"])
        if body["status"] in ("done", "failed"):
            return body, statuses
        time.sleep(0.05)
    raise AssertionError(f"scan {scan_id} never finished; saw {statuses}")


def test_health_is_public(service):
    r = service.get("/api/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_auth_table_all_protected_routes_401(service):
    for method, path, needs_auth in ENDPOINT_TABLE:
        if not needs_auth:
            continue
        r = service.request(method, path)
        assert r.status_code == 401, (method, path, r.status_code)
        assert r.json()["code"] == "unauthenticated", (method, path)


def test_invalid_token_is_401(service):
    r = service.get("/api/projects",
                    headers={"Authorization": "Bearer bogus"})
    assert r.status_code == 401


def test_register_duplicate_409(service):
    service.post("/api/register", json={"username": "dup", "password": "x1"})
    r = service.post("/api/register", json={"username": "dup",
                                            "password": "x2"})
    assert r.status_code == 409
    assert r.json()["code"] == "duplicate_username"


def test_register_validation_422(service):
    r = service.post("/api/register", json={"username": "ab", "password": "x"})
    assert r.status_code == 422
    assert r.json()["code"] == "validation"


def test_login_bad_credentials_401(service):
    service.post("/api/register", json={"username": "carol",
                                        "password": "right"})
    r = service.post("/api/login", json={"username": "carol",
                                         "password": "wrong"})
    assert r.status_code == 401
    assert r.json()["code"] == "auth_failed"


def test_full_bilstm_scan_workflow(service, vulnerable_code, clean_code):
    headers = register_and_login(service)

    r = service.post("/api/projects", json={"name": "demo"}, headers=headers)
    assert r.status_code == 201
    project_id = r.json()["id"]

    archive = make_zip([("src/vulnerable.py", vulnerable_code.encode()),
                        ("src/clean.py", clean_code.encode()),
                        ("docs/readme.md", b"hello")])
    r = service.post(f"/api/projects/{project_id}/sources",
                     files={"file": ("src.zip", archive, "application/zip")},
                     headers=headers)
    assert r.status_code == 200, r.text
    manifest = r.json()["files"]
    assert sorted(e["path"] for e in manifest) == \
        ["docs/readme.md", "src/clean.py", "src/vulnerable.py"]

    r = service.post(f"/api/projects/{project_id}/scans",
                     json={"engine": "bilstm",
                           "types": ["sql_injection"]}, headers=headers)
    assert r.status_code == 202, r.text
    scan_id = r.json()["scan_id"]

    final, statuses = poll_scan(service, headers, scan_id)
    assert final["status"] == "done", final
    assert final["report_id"] is not None
    # status never regresses while polling
    order = {"queued": 0, "running": 1, "done": 2, "failed": 2}
    assert [order[s] for s in statuses] == sorted(order[s] for s in statuses)

    r = service.get(f"/api/scans/{scan_id}/report", headers=headers)
    assert r.status_code == 200
    report = r.json()
    assert report["engine"] == "bilstm"
    assert len(report["findings"]) >= 1
    assert all(f["origin"] == "bilstm" for f in report["findings"])
    assert any(f["file_path"] == "src/vulnerable.py"
               for f in report["findings"])
    # summary counts equal an independent regrouping
    by_type = {}
    by_file = {}
    for f in report["findings"]:
        by_type[f["vuln_type"]] = by_type.get(f["vuln_type"], 0) + 1
        by_file[f["file_path"]] = by_file.get(f["file_path"], 0) + 1
    assert report["summary"]["by_type"] == by_type
    assert report["summary"]["by_file"] == by_file
    assert report["skipped_files"] == ["docs/readme.md"]

    # repeated GET is byte-identical
    a = service.get(f"/api/scans/{scan_id}/report", headers=headers).content
    b = service.get(f"/api/scans/{scan_id}/report", headers=headers).content
    assert a == b

    # HTML rendition is self-contained and mentions the findings
    r = service.get(f"/api/scans/{scan_id}/report?format=html",
                    headers=headers)
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/html")
    assert "sql_injection" in r.text
    assert "<html" in r.text


def test_llm_scan_engine(service, vulnerable_code):
    headers = register_and_login(service, "llmuser")
    r = service.post("/api/projects", json={"name": "p"}, headers=headers)
    project_id = r.json()["id"]
    reply = json.dumps({"findings": [
        {"vuln_type": "sql_injection", "line_start": 1, "line_end": 2,
         "explanation": "concatenated query"}]})
    service.provider._responses = [reply]
    service.provider._cursor = 0

    archive = make_zip([("app.py", vulnerable_code.encode())])
    service.post(f"/api/projects/{project_id}/sources",
                 files={"file": ("s.zip", archive, "application/zip")},
                 headers=headers)
    r = service.post(f"/api/projects/{project_id}/scans",
                     json={"engine": "llm", "types": []}, headers=headers)
    scan_id = r.json()["scan_id"]
    final, _ = poll_scan(service, headers, scan_id)
    assert final["status"] == "done", final
    report = service.get(f"/api/scans/{scan_id}/report",
                         headers=headers).json()
    assert report["engine"] == "llm"
    assert len(report["findings"]) == 1
    assert report["findings"][0]["origin"] == "llm"
    assert report["findings"][0]["line_start"] == 1


def test_scan_unknown_type_422(service):
    headers = register_and_login(service, "oscar")
    r = service.post("/api/projects", json={"name": "p"}, headers=headers)
    project_id = r.json()["id"]
    r = service.post(f"/api/projects/{project_id}/scans",
                     json={"engine": "bilstm", "types": ["made_up"]},
                     headers=headers)
    assert r.status_code == 422
    r = service.post(f"/api/projects/{project_id}/scans",
                     json={"engine": "quantum", "types": []}, headers=headers)
    assert r.status_code == 422


def test_upload_traversal_rejected(service):
    headers = register_and_login(service, "paula")
    r = service.post("/api/projects", json={"name": "p"}, headers=headers)
    project_id = r.json()["id"]
    archive = make_zip([("../../etc/x", b"evil")])
    r = service.post(f"/api/projects/{project_id}/sources",
                     files={"file": ("s.zip", archive, "application/zip")},
                     headers=headers)
    assert r.status_code == 422
    assert r.json()["code"] == "unsafe_path"


def test_repository_url_rejections(service):
    headers = register_and_login(service, "quinn")
    r = service.post("/api/projects", json={"name": "p"}, headers=headers)
    project_id = r.json()["id"]
    r = service.post(f"/api/projects/{project_id}/repository",
                     json={"url": "http://allowed/x.git"}, headers=headers)
    assert r.status_code == 422
    assert r.json()["code"] == "url_not_allowed"
    r = service.post(f"/api/projects/{project_id}/repository",
                     json={"url": "https://elsewhere/x.git"}, headers=headers)
    assert r.status_code == 422


def test_tenant_isolation(service):
    headers_a = register_and_login(service, "owner")
    r = service.post("/api/projects", json={"name": "private"},
                     headers=headers_a)
    project_id = r.json()["id"]
    r = service.post(f"/api/projects/{project_id}/scans",
                     json={"engine": "llm", "types": []}, headers=headers_a)
    scan_id = r.json()["scan_id"]

    headers_b = register_and_login(service, "intruder")
    assert service.get(f"/api/projects/{project_id}",
                       headers=headers_b).status_code == 403
    assert service.get(f"/api/scans/{scan_id}",
                       headers=headers_b).status_code == 403
    assert service.get(f"/api/scans/{scan_id}/report",
                       headers=headers_b).status_code == 403
    assert service.get("/api/projects/424242",
                       headers=headers_b).status_code == 404
    assert service.get("/api/scans/424242",
                       headers=headers_b).status_code == 404
    # B's project list stays empty
    assert service.get("/api/projects", headers=headers_b).json() == []


def test_report_before_done_404(service):
    headers = register_and_login(service, "rita")
    r = service.post("/api/projects", json={"name": "p"}, headers=headers)
    project_id = r.json()["id"]
    # no scan at all yet
    r = service.get("/api/scans/999/report", headers=headers)
    assert r.status_code == 404


def test_rewrite_flow(service, vulnerable_code):
    headers = register_and_login(service, "sam")
    r = service.post("/api/projects", json={"name": "p"}, headers=headers)
    project_id = r.json()["id"]
    analysis = json.dumps({"findings": [
        {"vuln_type": "sql_injection", "line_start": 1, "line_end": 2,
         "explanation": "bad"}]})
    rewrite = "Fixed it.\n```python\nsafe_code = True\n```"
    service.provider._responses = [analysis, rewrite]
    service.provider._cursor = 0

    archive = make_zip([("app.py", vulnerable_code.encode())])
    service.post(f"/api/projects/{project_id}/sources",
                 files={"file": ("s.zip", archive, "application/zip")},
                 headers=headers)
    r = service.post(f"/api/projects/{project_id}/scans",
                     json={"engine": "llm", "types": []}, headers=headers)
    scan_id = r.json()["scan_id"]
    final, _ = poll_scan(service, headers, scan_id)
    assert final["status"] == "done"
    report = service.get(f"/api/scans/{scan_id}/report",
                         headers=headers).json()
    finding_id = report["findings"][0]["id"]

    r = service.post(f"/api/scans/{scan_id}/rewrite",
                     json={"finding_ids": [finding_id]}, headers=headers)
    assert r.status_code == 200, r.text
    assert r.json()["secure_code"] == "safe_code = True\n"
    assert "Fixed" in r.json()["change_summary"]

    # provider returning no fenced block -> 502
    service.provider._responses = ["sorry, no code"]
    service.provider._cursor = 0
    r = service.post(f"/api/scans/{scan_id}/rewrite",
                     json={"finding_ids": [finding_id]}, headers=headers)
    assert r.status_code == 502
    assert r.json()["code"] == "provider_error"

    # unknown finding id -> 422
    r = service.post(f"/api/scans/{scan_id}/rewrite",
                     json={"finding_ids": [999]}, headers=headers)
    assert r.status_code == 422


def test_feedback_endpoint(service):
    headers = register_and_login(service, "tina")
    r = service.post("/api/feedback", json={"text": "great tool"},
                     headers=headers)
    assert r.status_code == 201
    r = service.post("/api/feedback", json={"text": ""}, headers=headers)
    assert r.status_code == 422


def test_logout_invalidates_token(service):
    headers = register_and_login(service, "uma")
    assert service.get("/api/projects", headers=headers).status_code == 200
    assert service.post("/api/logout", headers=headers).status_code == 200
    assert service.get("/api/projects", headers=headers).status_code == 401


def test_error_bodies_never_leak_stack_traces(service):
    headers = register_and_login(service, "vera")
    r = service.get("/api/scans/999", headers=headers)
    assert set(r.json().keys()) == {"code", "message"}
    assert "Traceback" not in r.text
