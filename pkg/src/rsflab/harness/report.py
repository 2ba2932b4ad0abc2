"""CSV and JSON serialization of report rows."""

import csv
import io
import json
from pathlib import Path

from .checks import ReportRow

COLUMNS = ("check_id", "env", "seed", "gamma", "T", "d", "model", "exact", "predicted",
           "mc_mean", "mc_se", "pass", "runtime_ms")
FORMATS = ("csv", "json")


def _num(x):
    """12 significant digits; ``None`` becomes an empty cell."""
    return "" if x is None else f"{x:.12g}"


def row_to_record(row: ReportRow) -> dict:
    return {"check_id": row.check_id, "env": row.env, "seed": row.seed,
            "gamma": row.gamma, "T": row.T, "d": row.d, "model": row.model,
            "exact": row.exact, "predicted": row.predicted, "mc_mean": row.mc_mean,
            "mc_se": row.mc_se, "pass": row.passed, "runtime_ms": row.runtime_ms}


def _csv_cells(row: ReportRow) -> list:
    rec = row_to_record(row)
    out = []
    for key in COLUMNS:
        v = rec[key]
        if key == "pass":
            out.append("true" if v else "false")
        elif key in ("check_id", "env", "model"):
            out.append(v)
        elif key in ("seed", "d"):
            out.append("" if v is None else str(v))
        else:
            out.append(_num(v))
    return out


def format_report(rows, fmt: str = "csv") -> str:
    """Render ``rows``; raises ``ValueError`` on an empty report or unknown format."""
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to emit an empty report")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(_csv_cells(r) for r in rows)
        return buf.getvalue()
    if fmt == "json":
        records = []
        for r in rows:
            rec = row_to_record(r)
            for key, v in rec.items():
                if isinstance(v, float):
                    rec[key] = float(_num(v))
            records.append(rec)
        return json.dumps(records, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def emit_report(rows, fmt: str = "csv", path=None) -> str:
    """Format ``rows`` and write them to ``path`` when given."""
    text = format_report(rows, fmt)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def _parse(value, kind):
    if value in ("", None):
        return None
    return kind(value)


def parse_report(text: str, fmt: str = "csv") -> list:
    if fmt == "json":
        records = json.loads(text)
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError("unexpected report header")
        records = list(reader)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    rows = []
    for rec in records:
        passed = rec["pass"]
        if isinstance(passed, str):
            passed = passed.lower() == "true"
        rows.append(ReportRow(
            rec["check_id"], rec["env"], int(rec["seed"]), _parse(rec["gamma"], float),
            _parse(rec["T"], float), _parse(rec["d"], int), rec["model"] or "",
            float(rec["exact"]), _parse(rec["predicted"], float), _parse(rec["mc_mean"], float),
            _parse(rec["mc_se"], float), bool(passed), _parse(rec["runtime_ms"], float) or 0.0))
    return rows


def load_report(path) -> list:
    path = Path(path)
    fmt = "json" if path.suffix.lower() == ".json" else "csv"
    return parse_report(path.read_text(), fmt)


def summarize(rows) -> str:
    """One line per check id: passed/total."""
    counts = {}
    for r in rows:
        head = r.check_id
        ok, total = counts.get(head, (0, 0))
        counts[head] = (ok + r.passed, total + 1)
    lines = [f"{k}: {ok}/{n} passed" for k, (ok, n) in counts.items()]
    failed = sum(n - ok for ok, n in counts.values())
    lines.append("ALL PASS" if failed == 0 else f"{failed} row(s) failed")
    return "\n".join(lines)
