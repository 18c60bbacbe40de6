import itertools

import pytest
from hypothesis import given, settings, strategies as st

from vulnscan.store import (PBKDF2_ITERATIONS, AuthFailed, DuplicateUsername,
                            IllegalTransition, JobStatus, LEGAL_TRANSITIONS,
                            NotFound, Store)
from vulnscan.vulntypes import VulnType


@pytest.fixture()
def store(tmp_path):
    s = Store(tmp_path / "test.db", pbkdf2_iterations=1000)
    yield s
    s.close()


_job_counter = itertools.count()


def make_job(store, status):
    """Force a fresh job into the given status along legal transitions."""
    user = store.create_user(f"jobuser_{next(_job_counter)}", "pw")
    project = store.create_project(user.id, "p")
    job = store.create_scan(project.id, "bilstm", [VulnType.XSS])
    if status is JobStatus.QUEUED:
        return job
    store.update_job_status(job.id, JobStatus.RUNNING)
    if status is JobStatus.RUNNING:
        return store.get_scan(job.id)
    if status is JobStatus.DONE:
        report = store.create_report(job.id, {"findings": []}, "bilstm")
        return store.update_job_status(job.id, JobStatus.DONE,
                                       report_id=report.id)
    return store.update_job_status(job.id, JobStatus.FAILED, error="x")


def test_default_iteration_count_meets_floor():
    assert PBKDF2_ITERATIONS >= 100_000


def test_user_roundtrip_and_login(store):
    user = store.create_user("alice", "s3cret")
    session = store.verify_login("alice", "s3cret")
    assert session.user_id == user.id
    assert len(session.token) >= 22  # >= 128 bits of randomness, urlsafe
    assert store.get_session(session.token).user_id == user.id


def test_wrong_password_and_unknown_user_indistinguishable(store):
    store.create_user("bob", "correct")
    with pytest.raises(AuthFailed) as wrong_pw:
        store.verify_login("bob", "incorrect")
    with pytest.raises(AuthFailed) as unknown:
        store.verify_login("nobody", "whatever")
    assert str(wrong_pw.value) == str(unknown.value)


def test_duplicate_username_leaves_store_unchanged(store):
    store.create_user("carol", "pw1")
    with pytest.raises(DuplicateUsername):
        store.create_user("carol", "pw2")
    session = store.verify_login("carol", "pw1")
    assert session is not None


def test_username_length_validated(store):
    with pytest.raises(ValueError):
        store.create_user("ab", "pw")
    with pytest.raises(ValueError):
        store.create_user("x" * 65, "pw")


def test_no_plaintext_password_in_database_bytes(tmp_path):
    password = "hunter2-very-distinctive-secret"
    store = Store(tmp_path / "secrets.db", pbkdf2_iterations=1000)
    store.create_user("dave", password)
    store.close()
    raw = (tmp_path / "secrets.db").read_bytes()
    assert password.encode() not in raw
    assert b"dave" in raw  # sanity: data did land in this file


def test_expired_session_rejected(store):
    store.create_user("erin", "pw")
    session = store.verify_login("erin", "pw")
    store._conn.execute("UPDATE sessions SET expires_at = ? WHERE token = ?",
                        ("2000-01-01T00:00:00+00:00", session.token))
    assert store.get_session(session.token) is None


def test_logout_deletes_session(store):
    store.create_user("frank", "pw")
    session = store.verify_login("frank", "pw")
    store.delete_session(session.token)
    assert store.get_session(session.token) is None


def test_project_crud(store):
    user = store.create_user("gina", "pw")
    project = store.create_project(user.id, "scanner-target")
    assert store.get_project(project.id) == project
    assert store.list_projects(user.id) == [project]
    store.set_project_source(project.id, "upload", "upload:2 files")
    assert store.get_project(project.id).source_kind == "upload"
    with pytest.raises(NotFound):
        store.get_project(9999)
    with pytest.raises(ValueError):
        store.set_project_source(project.id, "carrier-pigeon", "x")


def test_files_content_addressed(store):
    user = store.create_user("hank", "pw")
    project = store.create_project(user.id, "p")
    manifest = store.put_files(project.id, [("a.py", b"same"),
                                            ("b.py", b"same"),
                                            ("c.py", b"other")])
    assert len(manifest) == 3
    assert manifest[0]["digest"] == manifest[1]["digest"]
    assert manifest[0]["digest"] != manifest[2]["digest"]
    files = dict(store.get_files(project.id))
    assert files == {"a.py": b"same", "b.py": b"same", "c.py": b"other"}


def test_scan_job_roundtrip(store):
    user = store.create_user("iris", "pw")
    project = store.create_project(user.id, "p")
    job = store.create_scan(project.id, "llm",
                            [VulnType.XSS, VulnType.SQL_INJECTION])
    back = store.get_scan(job.id)
    assert back.types == (VulnType.XSS, VulnType.SQL_INJECTION)
    assert back.status is JobStatus.QUEUED
    assert back.report_id is None
    with pytest.raises(ValueError):
        store.create_scan(project.id, "oracle", [])


def test_all_sixteen_transitions_against_model(store):
    states = list(JobStatus)
    for current, target in itertools.product(states, states):
        job = make_job(store, current)
        legal = target in LEGAL_TRANSITIONS[current]
        kwargs = {}
        if target is JobStatus.DONE:
            report = store.create_report(job.id, {"findings": []}, "bilstm")
            kwargs["report_id"] = report.id
        if legal:
            updated = store.update_job_status(job.id, target, **kwargs)
            assert updated.status is target
        else:
            with pytest.raises(IllegalTransition):
                store.update_job_status(job.id, target, **kwargs)
            assert store.get_scan(job.id).status is current


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(list(JobStatus)), max_size=6))
def test_random_transition_sequences_match_reference_machine(tmp_path_factory,
                                                             seq):
    tmp = tmp_path_factory.mktemp("hyp")
    store = Store(tmp / "t.db", pbkdf2_iterations=1000)
    try:
        user = store.create_user("uuu", "pw")
        project = store.create_project(user.id, "p")
        job = store.create_scan(project.id, "bilstm", [])
        state = JobStatus.QUEUED
        for target in seq:
            kwargs = {}
            if target is JobStatus.DONE:
                report = store.create_report(job.id, {}, "bilstm")
                kwargs["report_id"] = report.id
            if target in LEGAL_TRANSITIONS[state]:
                store.update_job_status(job.id, target, **kwargs)
                state = target
            else:
                with pytest.raises(IllegalTransition):
                    store.update_job_status(job.id, target, **kwargs)
            assert store.get_scan(job.id).status is state
    finally:
        store.close()


def test_done_requires_report_id(store):
    job = make_job(store, JobStatus.RUNNING)
    with pytest.raises(ValueError):
        store.update_job_status(job.id, JobStatus.DONE)
    with pytest.raises(ValueError):
        store.update_job_status(job.id, JobStatus.RUNNING, report_id=5)


def test_report_roundtrip(store):
    job = make_job(store, JobStatus.RUNNING)
    body = {"findings": [{"vuln_type": "xss"}], "summary": {"by_type":
            {"xss": 1}}, "skipped_files": ["m.txt"]}
    report = store.create_report(job.id, body, "bilstm")
    back = store.get_report(report.id)
    assert back.body == body
    assert back.findings == body["findings"]
    assert back.summary == body["summary"]
    assert back.skipped_files == ["m.txt"]
    with pytest.raises(NotFound):
        store.get_report(12345)


def test_feedback_roundtrip_and_limits(store):
    user = store.create_user("kate", "pw")
    entry = store.add_feedback(user.id, "nice scanner")
    assert store.list_feedback(user.id) == [entry]
    with pytest.raises(ValueError):
        store.add_feedback(user.id, "")
    with pytest.raises(ValueError):
        store.add_feedback(user.id, "x" * 4001)


def test_read_after_write_across_instances(tmp_path):
    path = tmp_path / "shared.db"
    a = Store(path, pbkdf2_iterations=1000)
    a.create_user("liam", "pw")
    a.close()
    b = Store(path, pbkdf2_iterations=1000)
    assert b.verify_login("liam", "pw") is not None
    b.close()
