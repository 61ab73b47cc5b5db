"""Report documents and their CSV / JSON encodings.

Numbers are written with 6 significant digits in both encodings, and
suppressed (small-cell) values are an empty CSV field or JSON ``null``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from payroll_panel import __version__
from payroll_panel.core import IndicatorRow, Quarter
from payroll_panel.indicators import (
    GrowthConfig,
    build_report,
    missing_year_quarters,
    naive_average_wage_growth,
    transition_table,
)
from payroll_panel.ingest import PanelDataset

ROW_COLUMNS = (
    "quarter", "dimension", "bucket", "n_holders", "n_switchers", "n_entrants",
    "turnover_rate", "holder_wage_growth_yoy", "switcher_wage_growth", "holder_hours_growth_yoy",
)
TABLE_COLUMNS = ("industry", "transition", "switcher_wage_growth", "n_switchers")
COMPARISON_COLUMNS = ("measure", "value")
SIGNIFICANT_DIGITS = 6


def fmt_number(value) -> str:
    """Fixed 6-significant-digit text; '' for a suppressed value."""
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    text = f"{value:.{SIGNIFICANT_DIGITS}g}"
    return "0" if text == "-0" else text


def json_number(value):
    if value is None or isinstance(value, (int, str)):
        return value
    return float(fmt_number(value))


@dataclass
class ReportDocument:
    metadata: dict
    rows: list
    transition_table: dict = field(default_factory=dict)
    comparison: dict = field(default_factory=dict)

    def row_records(self) -> list[dict]:
        return [row_record(r) for r in self.rows]

    def table_records(self) -> list[dict]:
        return [
            {"industry": ind, "transition": tt, "switcher_wage_growth": value, "n_switchers": n}
            for (ind, tt), (value, n) in self.transition_table.items()
        ]

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "rows": [{k: json_number(v) for k, v in r.items()} for r in self.row_records()],
            "transition_table": [{k: json_number(v) for k, v in r.items()} for r in self.table_records()],
            "comparison": {k: json_number(v) for k, v in self.comparison.items()},
        }
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        for key, value in self.metadata.items():
            out.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.row_records():
            w.writerow([fmt_number(r[c]) if c not in ("quarter", "dimension", "bucket") else r[c] for c in ROW_COLUMNS])
        out.write("\n")
        w.writerow(TABLE_COLUMNS)
        for r in self.table_records():
            w.writerow([r["industry"], r["transition"], fmt_number(r["switcher_wage_growth"]), r["n_switchers"]])
        out.write("\n")
        w.writerow(COMPARISON_COLUMNS)
        for k, v in self.comparison.items():
            w.writerow([k, fmt_number(v)])
        return out.getvalue()

    def encode(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown report format {fmt!r}")


def row_record(r: IndicatorRow) -> dict:
    return {
        "quarter": str(r.quarter),
        "dimension": r.segment.dimension.value,
        "bucket": r.segment.bucket,
        "n_holders": r.n_holders,
        "n_switchers": r.n_switchers,
        "n_entrants": r.n_entrants,
        "turnover_rate": r.turnover_rate,
        "holder_wage_growth_yoy": r.holder_wage_growth_yoy,
        "switcher_wage_growth": r.switcher_wage_growth,
        "holder_hours_growth_yoy": r.holder_hours_growth_yoy,
    }


def compute_document(panel: PanelDataset, t: Quarter, cfg: GrowthConfig = GrowthConfig(),
                     workers: int = 1) -> ReportDocument:
    """Everything ``compute`` writes: indicator rows, the FT/PT table and the naive comparison."""
    rows = build_report(panel, t, cfg, workers=workers)
    table = transition_table(panel, t, cfg)
    comparison = {}
    if not missing_year_quarters(panel, t):
        all_row = rows[0] if rows else None
        comparison = {
            "naive_average_wage_growth": naive_average_wage_growth(panel, t),
            "holder_wage_growth_yoy": all_row.holder_wage_growth_yoy if all_row else None,
        }
    metadata = {
        "tool_version": __version__,
        "quarter": str(t),
        "config_digest": cfg.digest(),
        "config": {
            "outlier_bounds": list(cfg.outlier_bounds),
            "small_cell_floor": cfg.small_cell_floor,
            "holder_match_mode": cfg.holder_match_mode,
            "switcher_attribution": cfg.switcher_attribution,
        },
        "provenance": panel.provenance.as_dict() if panel.provenance else None,
    }
    return ReportDocument(metadata, rows, table, comparison)


# ----------------------------------------------------------- reading back

def _number(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_report_csv(text: str) -> dict:
    """Decode :meth:`ReportDocument.to_csv` output into the JSON document shape."""
    lines = text.split("\n")
    metadata = {}
    while lines and lines[0].startswith("# "):
        key, _, value = lines.pop(0)[2:].partition(": ")
        metadata[key] = json.loads(value)
    sections, current = [], []
    for line in lines:
        if line == "":
            if current:
                sections.append(current)
            current = []
        else:
            current.append(line)
    if current:
        sections.append(current)
    tables = [list(csv.DictReader(sec)) for sec in sections]
    text_cols = {"quarter", "dimension", "bucket", "industry", "transition", "measure"}

    def convert(rec):
        return {k: (v if k in text_cols else _number(v)) for k, v in rec.items()}

    rows = [convert(r) for r in tables[0]] if tables else []
    table = [convert(r) for r in tables[1]] if len(tables) > 1 else []
    comparison = {r["measure"]: _number(r["value"]) for r in tables[2]} if len(tables) > 2 else {}
    return {"metadata": metadata, "rows": rows, "transition_table": table, "comparison": comparison}
