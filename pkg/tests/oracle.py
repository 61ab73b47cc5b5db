"""Brute-force reference implementation used to freeze golden reports.

Deliberately shares no code with ``payroll_panel``: the taxonomy tables are
retyped here, the CSV is read with the ``csv`` module, and every indicator is
a plain loop over workers. Slow, but small panels only.

Usage::

    python tests/oracle.py PANEL.csv QUARTER [--floor N] [--holder-match strict|endpoints]
"""
import argparse
import calendar
import csv
import datetime as dt
import sys

REGIONS = {
    "Northeast": "CT ME MA NH RI VT NJ NY PA",
    "Midwest": "IL IN MI OH WI IA KS MN MO NE ND SD",
    "West": "AZ CO ID MT NV NM UT WY AK CA HI OR WA",
    "South": "DE DC FL GA MD NC SC VA WV AL KY MS TN AR LA OK TX",
}
STATES = ["NY", "NJ", "PA", "TX", "FL", "CA", "IL", "WA", "MI", "OH"]
INDUSTRIES = [
    ("natural resources and mining", "21"),
    ("construction", "23"),
    ("manufacturing", "31 32 33"),
    ("trade and transportation", "42 44 45 48 49 22"),
    ("information", "51"),
    ("finance/real estate", "52 53"),
    ("professional and business services", "54 55 56"),
    ("education & healthcare", "61 62"),
    ("leisure & hospitality", "71 72"),
    ("other services", "81"),
]
DIMENSIONS = [
    ("all", ["all"]),
    ("region", list(REGIONS) + ["unknown"]),
    ("state", STATES + ["other states", "unknown"]),
    ("industry", [name for name, _ in INDUSTRIES] + ["unclassified", "unknown"]),
    ("firm_size", ["1-49", "50-499", "500-999", "1000+", "unknown"]),
    ("age", ["16-24", "25-34", "35-54", "55+", "unknown"]),
    ("gender", ["male", "female", "unknown"]),
    ("employment_status", ["full-time", "part-time", "unknown"]),
    ("wage_tier", ["<20K", "20K-50K", "50K-75K", "75K+", "unknown"]),
    ("tenure", ["<3 years", "3-5 years", "5-10 years", "10+ years", "unknown"]),
]
TYPES = ["FTtoFT", "PTtoFT", "FTtoPT", "PTtoPT"]


def quarter_end(year, q):
    month = 3 * q
    return dt.date(year, month, calendar.monthrange(year, month)[1])


def step_back(year, q):
    return (year - 1, 4) if q == 1 else (year, q - 1)


def age_in_years(start, end):
    years = end.year - start.year
    if (end.month, end.day) < (start.month, start.day):
        years -= 1
    return years


def is_full_time(obs):
    return obs["total_hours"] / 13 >= 35


def bucket(obs, dim):
    if dim == "all":
        return "all"
    if dim == "region":
        for region, states in REGIONS.items():
            if obs["state"] in states.split():
                return region
        return "unknown"
    if dim == "state":
        if obs["state"] == "":
            return "unknown"
        return obs["state"] if obs["state"] in STATES else "other states"
    if dim == "industry":
        if obs["naics2"] == "":
            return "unknown"
        for name, codes in INDUSTRIES:
            if obs["naics2"] in codes.split():
                return name
        return "unclassified"
    if dim == "firm_size":
        n = obs["firm_size"]
        if n < 50:
            return "1-49"
        if n < 500:
            return "50-499"
        if n < 1000:
            return "500-999"
        return "1000+"
    if dim == "age":
        a = age_in_years(obs["birth_date"], quarter_end(obs["year"], obs["quarter"]))
        if a < 25:
            return "16-24"
        if a < 35:
            return "25-34"
        if a < 55:
            return "35-54"
        return "55+"
    if dim == "gender":
        return {"M": "male", "F": "female"}.get(obs["gender"], "unknown")
    if dim == "employment_status":
        return "full-time" if is_full_time(obs) else "part-time"
    if dim == "wage_tier":
        annual = obs["total_wages"] * 4
        if annual < 20000:
            return "<20K"
        if annual < 50000:
            return "20K-50K"
        if annual < 75000:
            return "50K-75K"
        return "75K+"
    if dim == "tenure":
        y = age_in_years(obs["hire_date"], quarter_end(obs["year"], obs["quarter"]))
        if y < 3:
            return "<3 years"
        if y < 5:
            return "3-5 years"
        if y < 10:
            return "5-10 years"
        return "10+ years"
    raise KeyError(dim)


# ------------------------------------------------------------------ panel

def read_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "worker_id": rec["worker_id"],
                "firm_id": rec["firm_id"],
                "year": int(rec["year"]),
                "quarter": int(rec["quarter"]),
                "total_wages": float(rec["total_wages"]),
                "total_hours": float(rec["total_hours"]),
                "hire_date": dt.date.fromisoformat(rec["hire_date"]),
                "birth_date": dt.date.fromisoformat(rec["birth_date"]),
                "gender": rec["gender"],
                "naics2": rec["naics2"],
                "state": rec["state"],
                "firm_size": int(rec["firm_size"]),
            })
    return rows


def sort_key(r):
    return (r["worker_id"], r["year"], r["quarter"], r["firm_id"], r["total_wages"], r["total_hours"],
            r["hire_date"], r["birth_date"], r["gender"], r["naics2"], r["state"], r["firm_size"])


def build_panel(rows):
    """Map (worker_id, (year, q)) -> primary-job observation."""
    rows = sorted((r for r in rows if r["total_hours"] > 0), key=sort_key)
    # modal firm attribute per (firm, quarter); ties to first in sorted order
    for field in ("naics2", "state", "firm_size"):
        resolved = {}
        for i, r in enumerate(rows):
            group = (r["firm_id"], r["year"], r["quarter"])
            if group in resolved:
                continue
            counts, first_seen = {}, {}
            for j, other in enumerate(rows):
                if (other["firm_id"], other["year"], other["quarter"]) == group:
                    counts[other[field]] = counts.get(other[field], 0) + 1
                    first_seen.setdefault(other[field], j)
            resolved[group] = max(counts, key=lambda v: (counts[v], -first_seen[v]))
        rows = [dict(r, **{field: resolved[(r["firm_id"], r["year"], r["quarter"])]}) for r in rows]
    panel = {}
    for r in rows:
        key = (r["worker_id"], (r["year"], r["quarter"]))
        best = panel.get(key)
        if best is None or r["total_wages"] > best["total_wages"] or (
                r["total_wages"] == best["total_wages"] and r["firm_id"] < best["firm_id"]):
            panel[key] = r
    return panel


def hourly(obs):
    return obs["total_wages"] / obs["total_hours"]


def change(new, old):
    return None if old == 0 else (new - old) / old


def trimmed(values, floor, low=-0.75, high=3.0):
    kept = [v for v in values if v is not None and low <= v <= high]
    if len(kept) < floor or not kept:
        return None
    total = 0.0
    for v in kept:
        total += v
    return total / len(kept)


def compute(panel, t, floor=30, holder_match="strict"):
    prev = step_back(*t)
    workers = sorted({w for (w, _) in panel})
    window = [t]
    for _ in range(4):
        window.insert(0, step_back(*window[0]))
    quarters = {q for (_, q) in panel}
    have_year = all(q in quarters for q in window)

    units, switchers, holders_yoy = [], [], []
    for w in workers:
        old, new = panel.get((w, prev)), panel.get((w, t))
        if new is None:
            continue
        if old is None:
            units.append(("entrant", new))
        elif old["firm_id"] == new["firm_id"]:
            units.append(("holder", new))
        else:
            units.append(("switcher", new))
            switchers.append((old, new))
        if have_year:
            base = panel.get((w, window[0]))
            if base is None or base["firm_id"] != new["firm_id"]:
                continue
            checked = window[1:-1] if holder_match == "strict" else []
            if all(panel.get((w, q)) is not None and panel[(w, q)]["firm_id"] == new["firm_id"] for q in checked):
                holders_yoy.append((base, new))

    rows = []
    for dim, labels in DIMENSIONS:
        for label in labels:
            mine = [kind for kind, obs in units if bucket(obs, dim) == label]
            if not mine:
                continue
            h, s, e = mine.count("holder"), mine.count("switcher"), mine.count("entrant")
            denom = h + s + e
            pairs = [(b, n) for b, n in holders_yoy if bucket(n, dim) == label]
            wage_g = [change(hourly(n), hourly(b)) for b, n in pairs if is_full_time(b) and is_full_time(n)]
            hours_g = [change(n["total_hours"], b["total_hours"]) for b, n in pairs]
            sw_g = [change(hourly(n), hourly(o)) for o, n in switchers if bucket(n, dim) == label]
            rows.append({
                "quarter": f"{t[0]}Q{t[1]}",
                "dimension": dim,
                "bucket": label,
                "n_holders": h,
                "n_switchers": s,
                "n_entrants": e,
                "turnover_rate": s / denom if denom >= floor else None,
                "holder_wage_growth_yoy": trimmed(wage_g, floor) if have_year else None,
                "switcher_wage_growth": trimmed(sw_g, floor),
                "holder_hours_growth_yoy": trimmed(hours_g, floor) if have_year else None,
            })

    table = []
    if switchers:
        landed = {bucket(n, "industry") for _, n in switchers}
        present = [name for name in dict(DIMENSIONS)["industry"] if name in landed]
        for ind in ["ALL"] + present:
            for tt in TYPES:
                cell = []
                for o, n in switchers:
                    kind = ("FT" if is_full_time(o) else "PT") + "to" + ("FT" if is_full_time(n) else "PT")
                    if kind == tt and (ind == "ALL" or bucket(n, "industry") == ind):
                        cell.append(change(hourly(n), hourly(o)))
                kept = [g for g in cell if g is not None and -0.75 <= g <= 3.0]
                table.append((ind, tt, trimmed(cell, floor), len(kept)))

    comparison = None
    if have_year:
        now = [hourly(o) for (w, q), o in panel.items() if q == t]
        then = [hourly(o) for (w, q), o in panel.items() if q == window[0]]
        naive = (sum(now) / len(now)) / (sum(then) / len(then)) - 1 if now and then else None
        comparison = [("naive_average_wage_growth", naive),
                      ("holder_wage_growth_yoy", rows[0]["holder_wage_growth_yoy"] if rows else None)]
    return rows, table, comparison


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    text = "%.6g" % x
    return "0" if text == "-0" else text


def render(rows, table, comparison):
    cols = ["quarter", "dimension", "bucket", "n_holders", "n_switchers", "n_entrants",
            "turnover_rate", "holder_wage_growth_yoy", "switcher_wage_growth", "holder_hours_growth_yoy"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(r[c] if c in ("quarter", "dimension", "bucket") else fmt(r[c]) for c in cols))
    lines.append("")
    lines.append("industry,transition,switcher_wage_growth,n_switchers")
    for ind, tt, value, n in table:
        lines.append(f"{ind},{tt},{fmt(value)},{n}")
    lines.append("")
    lines.append("measure,value")
    for name, value in comparison or []:
        lines.append(f"{name},{fmt(value)}")
    return "\n".join(lines) + "\n"


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("panel")
    ap.add_argument("quarter")
    ap.add_argument("--floor", type=int, default=30)
    ap.add_argument("--holder-match", default="strict")
    args = ap.parse_args(argv)
    t = (int(args.quarter[:4]), int(args.quarter[5]))
    out = compute(build_panel(read_rows(args.panel)), t, args.floor, args.holder_match)
    sys.stdout.write(render(*out))


if __name__ == "__main__":
    main()
