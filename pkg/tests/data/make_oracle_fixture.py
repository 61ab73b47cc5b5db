"""Rebuild the oracle fixture and its frozen report.

    python tests/data/make_oracle_fixture.py

The panel is a 200-worker, 6-quarter high-churn scenario, roughened with
secondary jobs, wage ties, zero-hour rows, unknown and unclassified firm
attributes and one firm-quarter with conflicting attributes. The report is
written by ``tests/oracle.py`` (floor 1), never by the package.
"""
import random
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracle  # noqa: E402
from payroll_panel.synth import generate_frame, preset  # noqa: E402

PANEL = HERE / "oracle_panel.csv"
REPORT = HERE / "oracle_report.csv"
QUARTER = "2016Q2"


def build_rows():
    cfg = preset("high_churn", n_workers=200, n_quarters=6, seed=2016, pt_share=0.3)
    frame = generate_frame(cfg)
    rows = [{k: str(v) for k, v in rec.items()} for rec in frame.astype(str).to_dict("records")]
    rng = random.Random(7)

    firms = sorted({r["firm_id"] for r in rows})
    for firm in firms[:2]:
        for r in rows:
            if r["firm_id"] == firm:
                r["naics2"] = ""
    for r in rows:
        if r["firm_id"] == firms[2]:
            r["naics2"] = "99"

    extra = []
    for r in rng.sample(rows, 40):
        other = rng.choice([f for f in firms if f != r["firm_id"]])
        attrs = next((x for x in rows if x["firm_id"] == other and x["year"] == r["year"]
                      and x["quarter"] == r["quarter"]), None)
        if attrs is None:
            continue
        wages = float(r["total_wages"]) * rng.choice([0.3, 0.5, 1.0])
        extra.append(dict(r, firm_id=other, total_wages=f"{wages:.2f}",
                          total_hours=f"{rng.uniform(60, 300):.2f}", naics2=attrs["naics2"],
                          state=attrs["state"], firm_size=attrs["firm_size"]))
    for r in rng.sample(rows, 5):
        extra.append(dict(r, firm_id=firms[-1], total_hours="0", total_wages="120.00"))

    # one firm-quarter whose records disagree on state, split evenly (modal tie)
    groups = {}
    for r in rows:
        groups.setdefault((r["firm_id"], r["year"], r["quarter"]), []).append(r)
    key, members = min(groups.items(), key=lambda kv: (len(kv[1]), kv[0]))
    outsiders = [x for x in rows if x["year"] == key[1] and x["quarter"] == key[2] and x["firm_id"] != key[0]]
    for x in rng.sample(outsiders, len(members)):
        extra.append(dict(x, firm_id=key[0], total_wages="50.00", total_hours="10",
                          naics2=members[0]["naics2"], firm_size=members[0]["firm_size"],
                          state="WY" if members[0]["state"] != "WY" else "VT"))

    rows += extra
    rng.shuffle(rows)
    return list(frame.columns), rows


def main():
    import csv

    columns, rows = build_rows()
    with open(PANEL, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    panel = oracle.build_panel(oracle.read_rows(PANEL))
    t = (int(QUARTER[:4]), int(QUARTER[5]))
    REPORT.write_text(oracle.render(*oracle.compute(panel, t, floor=1)))
    print(f"wrote {len(rows)} rows to {PANEL.name} and the report to {REPORT.name}")


if __name__ == "__main__":
    main()
