"""Self-contained HTML rendition of a scan report."""

from __future__ import annotations

import html

_PAGE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Scan report #{report_id}</title>
<style>
body {{ font-family: system-ui, sans-serif; margin: 2rem; color: #1b1b1b; }}
h1 {{ font-size: 1.4rem; }}
h2 {{ font-size: 1.1rem; border-bottom: 1px solid #ccc; padding-bottom: .2rem; }}
table {{ border-collapse: collapse; margin-bottom: 1rem; }}
td, th {{ border: 1px solid #ccc; padding: .25rem .6rem; text-align: left; }}
pre {{ background: #f6f6f6; padding: .6rem; overflow-x: auto; border-radius: 4px; }}
.finding {{ margin: 1rem 0; }}
.meta {{ color: #555; font-size: .9rem; }}
</style>
</head>
<body>
<h1>Scan report #{report_id} <span class="meta">(engine: {engine}, generated {generated_at})</span></h1>
<h2>Summary</h2>
<table>
<tr><th>Vulnerability type</th><th>Findings</th></tr>
{summary_rows}
</table>
<p class="meta">Files scanned: {scanned}; skipped: {skipped}.</p>
{sections}
</body>
</html>
"""


def render_html(report_id: int, engine: str, generated_at: str,
                body: dict) -> str:
    findings = body.get("findings", [])
    summary = body.get("summary", {})
    by_type = summary.get("by_type", {})

    summary_rows = "".join(
        f"<tr><td>{html.escape(name)}</td><td>{count}</td></tr>"
        for name, count in sorted(by_type.items())
    ) or '<tr><td colspan="2">no findings</td></tr>'

    grouped: dict[str, list[dict]] = {}
    for f in findings:
        grouped.setdefault(f.get("vuln_type", "unknown"), []).append(f)

    sections = []
    for vuln_type in sorted(grouped):
        items = []
        for f in grouped[vuln_type]:
            anchor = (f"{html.escape(f.get('file_path', ''))}, "
                      f"lines {f.get('line_start')}-{f.get('line_end')}")
            score = f.get("score")
            score_txt = f", score {score:.3f}" if isinstance(score, float) else ""
            items.append(
                '<div class="finding">'
                f"<p><strong>{anchor}</strong>"
                f"<span class=\"meta\"> (origin: "
                f"{html.escape(str(f.get('origin', '')))}{score_txt})</span></p>"
                f"<pre>{html.escape(str(f.get('snippet', '')))}</pre>"
                "</div>")
        sections.append(f"<h2>{html.escape(vuln_type)} "
                        f"({len(grouped[vuln_type])})</h2>" + "".join(items))

    return _PAGE.format(
        report_id=report_id,
        engine=html.escape(engine),
        generated_at=html.escape(generated_at),
        summary_rows=summary_rows,
        scanned=len(body.get("scanned_files", [])),
        skipped=len(body.get("skipped_files", [])),
        sections="".join(sections),
    )
