"""Deterministic synthetic labeled corpora, one generator per vulnerability
type: positives embed the characteristic dangerous sink, negatives the safe
counterpart, with identifiers and literals varied by a seeded RNG."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .vulntypes import VulnType


class InvalidCount(Exception):
    pass


class SchemaError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class LabeledSample:
    code: str
    label: int
    vuln_type: VulnType
    source: str = "synthetic"


_FUNC_NAMES = ["fetch_user", "load_entry", "handle_form", "process_item",
               "lookup_record", "update_profile", "show_page", "run_task",
               "get_details", "apply_change", "render_result", "submit_data"]
_VAR_NAMES = ["name", "value", "target", "payload", "item_id", "user_input",
              "param", "entry", "field", "token_arg", "raw", "content"]
_TABLES = ["users", "orders", "accounts", "products", "sessions", "events"]
_COLUMNS = ["id", "email", "title", "status", "owner", "price"]
_QUERY_KEYS = ["next", "q", "page", "ref", "dest", "item"]
_ROUTES = ["submit", "transfer", "update", "delete", "publish", "approve"]
_PAGES = ["index", "home", "profile", "dashboard", "results", "detail"]


def _slots(rng: random.Random) -> dict[str, str]:
    a, b = rng.sample(_VAR_NAMES, 2)
    return {
        "fn": rng.choice(_FUNC_NAMES),
        "a": a,
        "b": b,
        "tbl": rng.choice(_TABLES),
        "col": rng.choice(_COLUMNS),
        "q": rng.choice(_QUERY_KEYS),
        "route": rng.choice(_ROUTES),
        "page": rng.choice(_PAGES),
        "num": str(rng.randint(1, 999)),
    }


_TEMPLATES: dict[VulnType, tuple[list[str], list[str]]] = {
    VulnType.SQL_INJECTION: (
        [
            'def {fn}({a}):\n'
            '    query = "SELECT {col} FROM {tbl} WHERE name = \'" + {a} + "\'"\n'
            '    cursor.execute(query)\n'
            '    return cursor.fetchall()\n',
            'def {fn}({a}):\n'
            '    cursor.execute("DELETE FROM {tbl} WHERE {col} = %s" % {a})\n'
            '    return cursor.rowcount\n',
            'def {fn}({a}, {b}):\n'
            '    sql = "UPDATE {tbl} SET {col} = \'" + {b} + "\' WHERE id = \'" + {a} + "\'"\n'
            '    db.execute(sql)\n'
            '    return True\n',
        ],
        [
            'def {fn}({a}):\n'
            '    query = "SELECT {col} FROM {tbl} WHERE name = %s"\n'
            '    cursor.execute(query, ({a},))\n'
            '    return cursor.fetchall()\n',
            'def {fn}({a}):\n'
            '    cursor.execute("DELETE FROM {tbl} WHERE {col} = ?", [{a}])\n'
            '    return cursor.rowcount\n',
            'def {fn}({a}, {b}):\n'
            '    sql = "UPDATE {tbl} SET {col} = :v WHERE id = :k"\n'
            '    db.execute(sql, {{"v": {b}, "k": {a}}})\n'
            '    return True\n',
        ],
    ),
    VulnType.XSS: (
        [
            'def {fn}({a}):\n'
            '    return render_template_string("<p>" + {a} + "</p>")\n',
            'def {fn}():\n'
            '    {a} = request.args.get("{q}")\n'
            '    html = "<div>" + {a} + "</div>"\n'
            '    return html\n',
            'def {fn}({a}):\n'
            '    body = Markup("<b>" + {a} + "</b>")\n'
            '    return body\n',
        ],
        [
            'def {fn}({a}):\n'
            '    return render_template("{page}.html", value={a})\n',
            'def {fn}():\n'
            '    {a} = request.args.get("{q}")\n'
            '    html = "<div>" + escape({a}) + "</div>"\n'
            '    return html\n',
            'def {fn}({a}):\n'
            '    body = Markup.escape({a})\n'
            '    return body\n',
        ],
    ),
    VulnType.COMMAND_INJECTION: (
        [
            'def {fn}({a}):\n'
            '    os.system("ping -c {num} " + {a})\n'
            '    return True\n',
            'def {fn}({a}):\n'
            '    subprocess.call({a} + " --verbose", shell=True)\n'
            '    return True\n',
            'def {fn}({a}):\n'
            '    out = os.popen("cat /var/log/" + {a}).read()\n'
            '    return out\n',
        ],
        [
            'def {fn}({a}):\n'
            '    subprocess.run(["ping", "-c", "{num}", {a}], check=True)\n'
            '    return True\n',
            'def {fn}({a}):\n'
            '    subprocess.call([{a}, "--verbose"])\n'
            '    return True\n',
            'def {fn}({a}):\n'
            '    out = subprocess.check_output(["cat", os.path.join("/var/log", {a})])\n'
            '    return out\n',
        ],
    ),
    VulnType.XSRF: (
        [
            '@csrf_exempt\n'
            'def {fn}(request):\n'
            '    {a} = request.POST["{q}"]\n'
            '    apply_transfer({a})\n'
            '    return redirect("/{page}")\n',
            '@app.route("/{route}", methods=["POST"])\n'
            'def {fn}():\n'
            '    {a} = request.form["{q}"]\n'
            '    update_account({a})\n'
            '    return "ok"\n',
            'def {fn}(request):\n'
            '    {a} = request.POST.get("{q}")\n'
            '    delete_record({a})\n'
            '    return redirect("/{page}")\n',
        ],
        [
            '@csrf_protect\n'
            'def {fn}(request):\n'
            '    {a} = request.POST["{q}"]\n'
            '    apply_transfer({a})\n'
            '    return redirect("/{page}")\n',
            '@app.route("/{route}", methods=["POST"])\n'
            'def {fn}():\n'
            '    validate_csrf(request.form["csrf_token"])\n'
            '    {a} = request.form["{q}"]\n'
            '    update_account({a})\n'
            '    return "ok"\n',
            'def {fn}(request):\n'
            '    if not check_csrf_token(request.POST.get("csrf_token")):\n'
            '        return abort(403)\n'
            '    {a} = request.POST.get("{q}")\n'
            '    delete_record({a})\n'
            '    return redirect("/{page}")\n',
        ],
    ),
    VulnType.PATH_DISCLOSURE: (
        [
            'def {fn}({a}):\n'
            '    try:\n'
            '        return open({a}).read()\n'
            '    except OSError as exc:\n'
            '        return str(exc)\n',
            'def {fn}({a}):\n'
            '    try:\n'
            '        return load_config({a})\n'
            '    except Exception:\n'
            '        return traceback.format_exc()\n',
            'def {fn}({a}):\n'
            '    try:\n'
            '        return open({a}).read()\n'
            '    except FileNotFoundError as exc:\n'
            '        return "missing file: " + exc.filename\n',
        ],
        [
            'def {fn}({a}):\n'
            '    try:\n'
            '        return open({a}).read()\n'
            '    except OSError:\n'
            '        logger.exception("read failed")\n'
            '        return "internal error"\n',
            'def {fn}({a}):\n'
            '    try:\n'
            '        return load_config({a})\n'
            '    except Exception:\n'
            '        logger.error("config load failed")\n'
            '        return "request failed"\n',
            'def {fn}({a}):\n'
            '    try:\n'
            '        return open({a}).read()\n'
            '    except FileNotFoundError:\n'
            '        return abort(404)\n',
        ],
    ),
    VulnType.REMOTE_CODE_EXECUTION: (
        [
            'def {fn}({a}):\n'
            '    result = eval({a})\n'
            '    return result\n',
            'def {fn}(request):\n'
            '    exec(request.data.decode("utf-8"))\n'
            '    return "done"\n',
            'def {fn}({a}):\n'
            '    obj = pickle.loads({a})\n'
            '    return obj\n',
        ],
        [
            'def {fn}({a}):\n'
            '    result = ast.literal_eval({a})\n'
            '    return result\n',
            'def {fn}(request):\n'
            '    data = json.loads(request.data.decode("utf-8"))\n'
            '    return data\n',
            'def {fn}({a}):\n'
            '    obj = json.loads({a})\n'
            '    return obj\n',
        ],
    ),
    VulnType.OPEN_REDIRECT: (
        [
            'def {fn}():\n'
            '    {a} = request.args.get("{q}")\n'
            '    return redirect({a})\n',
            'def {fn}(request):\n'
            '    return redirect(request.form["{q}"])\n',
            'def {fn}():\n'
            '    {a} = request.args.get("{q}", "/")\n'
            '    return Response(status=302, headers={{"Location": {a}}})\n',
        ],
        [
            'def {fn}():\n'
            '    {a} = request.args.get("{q}")\n'
            '    if is_safe_url({a}):\n'
            '        return redirect({a})\n'
            '    return redirect(url_for("{page}"))\n',
            'def {fn}(request):\n'
            '    return redirect(url_for("{page}"))\n',
            'def {fn}():\n'
            '    {a} = ALLOWED_TARGETS.get(request.args.get("{q}"), "/")\n'
            '    return redirect({a})\n',
        ],
    ),
}


def _seed_int(vuln_type: VulnType, n: int, seed: int) -> int:
    key = f"{vuln_type.value}:{n}:{seed}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def generate(vuln_type: VulnType, n: int, seed: int = 0) -> list[LabeledSample]:
    """Balanced synthetic samples; deterministic per (vuln_type, n, seed)."""
    if n < 2 or n % 2 != 0:
        raise InvalidCount(f"n must be even and >= 2, got {n}")
    rng = random.Random(_seed_int(vuln_type, n, seed))
    pos_templates, neg_templates = _TEMPLATES[vuln_type]
    samples: list[LabeledSample] = []
    for _ in range(n // 2):
        pos = rng.choice(pos_templates).format(**_slots(rng))
        neg = rng.choice(neg_templates).format(**_slots(rng))
        samples.append(LabeledSample(code=pos, label=1, vuln_type=vuln_type))
        samples.append(LabeledSample(code=neg, label=0, vuln_type=vuln_type))
    return samples


def save_jsonl(samples: Iterable[LabeledSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps({"code": s.code, "label": s.label,
                                 "type": s.vuln_type.value,
                                 "source": s.source}) + "\n")


def load_jsonl(path: str | Path) -> list[LabeledSample]:
    """Parse newline-delimited samples; bad lines raise SchemaError with
    their 1-based line number. Unknown fields are ignored."""
    samples: list[LabeledSample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise SchemaError(lineno, "expected a JSON object")
            for field in ("code", "label", "type", "source"):
                if field not in obj:
                    raise SchemaError(lineno, f"missing field {field!r}")
            if not isinstance(obj["code"], str) or not obj["code"]:
                raise SchemaError(lineno, "code must be a non-empty string")
            if obj["label"] not in (0, 1):
                raise SchemaError(lineno, "label must be 0 or 1")
            try:
                vuln_type = VulnType(obj["type"])
            except ValueError:
                raise SchemaError(lineno, f"unknown type {obj['type']!r}") from None
            if obj["source"] not in ("synthetic", "external"):
                raise SchemaError(lineno, f"unknown source {obj['source']!r}")
            samples.append(LabeledSample(code=obj["code"], label=obj["label"],
                                         vuln_type=vuln_type,
                                         source=obj["source"]))
    return samples
