"""Report bundle: JSON validated against the shipped schema, CSV tables, text summary."""

from __future__ import annotations

import csv
import io
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.txt"
TABLES_DIR = "tables"
MODE_ORDER = ("FULL", "INPUT_ONLY", "OBSERVATION_ONLY", "TDR")


@lru_cache(maxsize=1)
def load_schema() -> dict:
    return json.loads(resources.files("ampdiv").joinpath("schema/report.schema.json").read_text(encoding="utf-8"))


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if the report does not match the schema."""
    jsonschema.Draft202012Validator(load_schema()).validate(report)


def table_columns(table: str) -> list[str]:
    return list(load_schema()["properties"][table]["items"]["required"])


def _csv(rows: list[dict], columns: list[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: "" if row.get(c) is None else row[c] for c in columns})
    return buffer.getvalue()


def _fmt(value: Any) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.3f}".rstrip("0").rstrip(".") if value != int(value) else f"{value:.1f}"
    return str(value)


def summary_text(report: dict) -> str:
    cfg = report["config"]
    lines = [
        f"seed {cfg['seed']}, calibration {cfg['runs']} runs x {cfg['environments']} environments, "
        f"TDR interaction level {cfg['tdr_level']}",
        "",
    ]
    for fx in report["fixtures"]:
        count = len(fx["variants"])
        lines.append(f"{fx['name']}: {count} variant{'s' if count != 1 else ''}")
        if not count:
            lines.append("  no pairs")
        for mode in MODE_ORDER:
            s = fx["summary"].get(mode)
            if s is None or not count:
                continue
            lines.append(f"  {s['detected']}/{s['variants']} detected ({mode}), "
                         f"mean divergence {_fmt(s['mean_divergence'])} over {s['pairs']} pairs")
        for mode, amp in fx["amplification"].items():
            lines.append(
                f"  {mode} suite: {amp['originals']} original tests -> {amp['total']} ({amp['multiplier']}), "
                f"{amp['dropped_nonexecutable']} non-executable, {amp['points_declared']} observation points, "
                f"{amp['discarded_points']} discarded"
            )
        for variant in fx["variants"]:
            verdicts = ", ".join(
                f"{mode} {variant[mode]['count']}" for mode in MODE_ORDER if variant.get(mode) is not None
            )
            truth = {True: "diverse", False: "equivalent", None: "unlabelled"}[variant["ground_truth"]]
            lines.append(f"    {variant['id']} [{truth}]: {verdicts}")
        lines.append("")
    return "\n".join(lines)


def write_bundle(report: dict, out: str | Path) -> list[Path]:
    out = Path(out)
    tables = out / TABLES_DIR
    tables.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / REPORT_FILE
    path.write_text(json.dumps(report, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    written.append(path)
    for table in ("table2", "table3"):
        path = tables / f"{table}.csv"
        path.write_text(_csv(report[table], table_columns(table)), encoding="utf-8")
        written.append(path)
    path = out / SUMMARY_FILE
    path.write_text(summary_text(report), encoding="utf-8")
    written.append(path)
    return written


def report_render(bundle: str | Path) -> str:
    """Re-validate a bundle, refresh its CSV tables and summary, and return the summary."""
    bundle = Path(bundle)
    report = json.loads((bundle / REPORT_FILE).read_text(encoding="utf-8"))
    validate_report(report)
    write_bundle(report, bundle)
    return summary_text(report)
