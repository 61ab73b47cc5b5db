"""Deterministic synthetic payroll panels.

Random numbers come from SplitMix64 used as a counter-based generator:
every draw is ``splitmix64(seed, stream, worker, quarter)`` where ``stream``
names the purpose of the draw (switch decision, wage noise, ...). A worker's
trajectory therefore depends only on the seed and its own index, so output
is identical however the workers are batched, and raising one rate leaves
every other draw untouched.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import yaml

from payroll_panel.core import (
    AGE_LABELS,
    FIRM_SIZE_LABELS,
    Quarter,
    US_STATES,
    full_years_between_arrays,
)
from payroll_panel.ingest import PanelDataset, canonicalize_frame

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

_STREAMS = {name: i + 1 for i, name in enumerate((
    "gender", "age_bucket", "age_offset", "wage_z1", "wage_z2", "part_time", "firm", "tenure",
    "hours", "retire", "switch", "new_firm", "status", "switch_z1", "switch_z2", "hire_day",
    "raise_z1", "raise_z2", "hours_z1", "hours_z2", "firm_naics", "firm_state", "firm_size_bucket",
    "firm_size_value", "birth_day",
))}

AGE_RANGES = {"16-24": (16, 25), "25-34": (25, 35), "35-54": (35, 55), "55+": (55, 70)}
FIRM_SIZE_RANGES = {"1-49": (1, 50), "50-499": (50, 500), "500-999": (500, 1000), "1000+": (1000, 5001)}
FT_WEEKLY = (35.0, 45.0)
PT_WEEKLY = (15.0, 34.0)
FT_CLIP = (35.0, 60.0)
PT_CLIP = (8.0, 34.5)
AGE_WAGE_SLOPE = 0.012
PART_TIME_WAGE_FACTOR = 0.8
DAYS_PER_YEAR = 365.2425


class InvalidConfig(ValueError):
    """Scenario configuration problems, one ``(field, message)`` per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.errors))


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, stream: str, worker, quarter: int = 0) -> np.ndarray:
    """Uniform [0, 1) draws, one per entry of ``worker``."""
    worker = np.asarray(worker, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        z = _mix(z + _GOLDEN * np.array([_STREAMS[stream]], dtype=np.uint64))
        z = _mix(z + worker * _GOLDEN)
        z = _mix(z ^ (np.array([quarter + 1], dtype=np.uint64) * _M2))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def normals(seed: int, stream: str, worker, quarter: int = 0) -> np.ndarray:
    """Standard normals by Box-Muller from two uniform streams ``<stream>1``/``<stream>2``."""
    u1 = uniforms(seed, stream + "1", worker, quarter)
    u2 = uniforms(seed, stream + "2", worker, quarter)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def _categorical(u: np.ndarray, weights: dict) -> np.ndarray:
    """Index into ``list(weights)`` by inverse CDF."""
    w = np.array(list(weights.values()), dtype=np.float64)
    cdf = np.cumsum(w / w.sum())
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(w) - 1)


# ------------------------------------------------------------- config

_DEFAULT_STATES = {
    "NY": 6, "NJ": 3, "PA": 4, "TX": 8, "FL": 6, "CA": 12, "IL": 4, "WA": 2.5, "MI": 3, "OH": 3.5,
    "GA": 3, "NC": 3, "MA": 2, "AZ": 2, "CO": 2, "MN": 2, "MO": 2, "TN": 2, "IN": 2, "WI": 2, "": 0.5,
}
_DEFAULT_NAICS = {
    "21": 1, "23": 6, "31": 3, "32": 3, "33": 4, "42": 4, "44": 6, "45": 4, "48": 3, "49": 1,
    "22": 1, "51": 2, "52": 4, "53": 2, "54": 7, "55": 1, "56": 6, "61": 2, "62": 14, "71": 2,
    "72": 10, "81": 4, "11": 1,
}


@dataclass(frozen=True)
class ScenarioConfig:
    n_workers: int = 2000
    n_quarters: int = 6
    seed: int = 0
    start_quarter: str = "2015Q1"
    n_firms: Optional[int] = None
    base_wage_distribution: dict = field(default_factory=lambda: {"median": 22.0, "sigma": 0.5})
    holder_raise_rate: float = 0.03
    switch_propensity: dict = field(default_factory=lambda: {"16-24": 0.12, "25-34": 0.07, "35-54": 0.04, "55+": 0.02})
    switch_premium: float = 0.06
    switch_noise: float = 0.04
    retirement_rate_55plus: float = 0.02
    entrant_rate: float = 0.03
    entrant_wage_discount: float = 0.15
    pt_share: float = 0.2
    status_change_rate: float = 0.2
    pt_to_ft_wage_change: float = 0.02
    wage_noise: float = 0.01
    hours_noise: float = 0.03
    gender_mix: dict = field(default_factory=lambda: {"M": 0.52, "F": 0.46, "U": 0.02})
    age_mix: dict = field(default_factory=lambda: {"16-24": 0.15, "25-34": 0.25, "35-54": 0.42, "55+": 0.18})
    entrant_age_mix: dict = field(default_factory=lambda: {"16-24": 0.6, "25-34": 0.3, "35-54": 0.1, "55+": 0.0})
    state_mix: dict = field(default_factory=lambda: dict(_DEFAULT_STATES))
    naics_mix: dict = field(default_factory=lambda: dict(_DEFAULT_NAICS))
    firm_size_mix: dict = field(default_factory=lambda: {"1-49": 0.3, "50-499": 0.3, "500-999": 0.1, "1000+": 0.3})

    def __post_init__(self):
        if isinstance(self.switch_propensity, (int, float)) and not isinstance(self.switch_propensity, bool):
            object.__setattr__(self, "switch_propensity", dict.fromkeys(AGE_LABELS, float(self.switch_propensity)))
        errors = self.problems()
        if errors:
            raise InvalidConfig(errors)

    @property
    def firms(self) -> int:
        return self.n_firms if self.n_firms is not None else max(2, self.n_workers // 25)

    @property
    def entrants_per_quarter(self) -> int:
        return int(round(self.entrant_rate * self.n_workers))

    def problems(self) -> list:
        errs = []

        def integer(name, low):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < low:
                errs.append((name, f"must be an integer >= {low}, got {v!r}"))

        def fraction(name, value, low=0.0, high=1.0):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not low <= value <= high:
                errs.append((name, f"must be a number in [{low}, {high}], got {value!r}"))

        def mix(name, allowed):
            v = getattr(self, name)
            if not isinstance(v, dict) or not v:
                errs.append((name, "must be a non-empty mapping of category -> weight"))
                return
            bad = [k for k in v if k not in allowed]
            if bad:
                errs.append((name, f"unknown categories {bad}"))
            if any(isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0 for w in v.values()) \
                    or sum(v.values()) <= 0:
                errs.append((name, "weights must be non-negative with a positive sum"))

        integer("n_workers", 1)
        integer("n_quarters", 2)
        integer("seed", 0)
        if isinstance(self.seed, int) and self.seed >= 2 ** 64:
            errs.append(("seed", "must fit in 64 bits"))
        if self.n_firms is not None:
            integer("n_firms", 2)
        try:
            Quarter.parse(str(self.start_quarter))
        except ValueError:
            errs.append(("start_quarter", f"expected YYYYQn, got {self.start_quarter!r}"))
        bw = self.base_wage_distribution
        if not isinstance(bw, dict) or set(bw) != {"median", "sigma"}:
            errs.append(("base_wage_distribution", "must have exactly the keys median and sigma"))
        else:
            if not isinstance(bw["median"], (int, float)) or bw["median"] <= 0:
                errs.append(("base_wage_distribution.median", "must be positive"))
            if not isinstance(bw["sigma"], (int, float)) or not 0 <= bw["sigma"] <= 2:
                errs.append(("base_wage_distribution.sigma", "must be in [0, 2]"))
        for name in ("holder_raise_rate", "switch_premium", "switch_noise", "retirement_rate_55plus",
                     "entrant_rate", "entrant_wage_discount", "pt_share", "status_change_rate",
                     "wage_noise", "hours_noise"):
            fraction(name, getattr(self, name))
        fraction("pt_to_ft_wage_change", self.pt_to_ft_wage_change, -1.0, 1.0)
        sp = self.switch_propensity
        if not isinstance(sp, dict) or set(sp) != set(AGE_LABELS):
            errs.append(("switch_propensity", f"must give a rate for each age bucket {list(AGE_LABELS)}"))
        else:
            for k, v in sp.items():
                fraction(f"switch_propensity.{k}", v)
        mix("gender_mix", {"M", "F", "U"})
        mix("age_mix", set(AGE_LABELS))
        mix("entrant_age_mix", set(AGE_LABELS))
        mix("state_mix", set(US_STATES) | {""})
        mix("naics_mix", {f"{i:02d}" for i in range(100)})
        mix("firm_size_mix", set(FIRM_SIZE_LABELS))
        return errs

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


PRESETS = {
    "baseline": {},
    "high_churn": {
        "switch_propensity": {"16-24": 0.36, "25-34": 0.21, "35-54": 0.12, "55+": 0.06},
    },
    "retirement_wave": {
        "age_mix": {"16-24": 0.1, "25-34": 0.2, "35-54": 0.35, "55+": 0.35},
        "retirement_rate_55plus": 0.12,
        "entrant_rate": 0.04,
        "entrant_wage_discount": 0.5,
        "holder_raise_rate": 0.03,
    },
    "pt_to_ft_penalty": {
        "pt_share": 0.35,
        "status_change_rate": 0.6,
        "switch_premium": 0.06,
        "pt_to_ft_wage_change": -0.08,
        "switch_propensity": {"16-24": 0.15, "25-34": 0.12, "35-54": 0.08, "55+": 0.05},
    },
}


def preset(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise InvalidConfig([("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")])
    return scenario_from_mapping({**PRESETS[name], **overrides})


def scenario_from_mapping(data: dict) -> ScenarioConfig:
    """Build a config from plain data; an optional ``preset`` key supplies defaults."""
    if not isinstance(data, dict):
        raise InvalidConfig([("<root>", "scenario config must be a mapping")])
    data = dict(data)
    name = data.pop("preset", None)
    if name is not None:
        if name not in PRESETS:
            raise InvalidConfig([("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")])
        data = {**PRESETS[name], **data}
    unknown = sorted(set(data) - {f.name for f in dataclasses.fields(ScenarioConfig)})
    if unknown:
        raise InvalidConfig([(k, "unknown field") for k in unknown])
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise InvalidConfig([("<root>", str(exc))]) from None


def load_scenario(path) -> ScenarioConfig:
    """Read a YAML or JSON scenario file (key names as in :class:`ScenarioConfig`)."""
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise InvalidConfig([("<file>", f"cannot parse {path}: {exc}")]) from None
    return scenario_from_mapping(data or {})


# ---------------------------------------------------------- generator

def _ids(prefix: str, n: int) -> pd.Index:
    width = max(6, len(str(max(n - 1, 0))))
    return pd.Index([f"{prefix}{i:0{width}d}" for i in range(n)], dtype=object)


def _uniform_int(u, low, high):
    return low + np.floor(u * (high - low)).astype(np.int64)


def _firms(cfg: ScenarioConfig):
    idx = np.arange(cfg.firms)
    s = cfg.seed
    naics = np.array(list(cfg.naics_mix), dtype=object)[_categorical(uniforms(s, "firm_naics", idx), cfg.naics_mix)]
    state = np.array(list(cfg.state_mix), dtype=object)[_categorical(uniforms(s, "firm_state", idx), cfg.state_mix)]
    bucket = _categorical(uniforms(s, "firm_size_bucket", idx), cfg.firm_size_mix)
    ranges = np.array([FIRM_SIZE_RANGES[k] for k in cfg.firm_size_mix])
    u = uniforms(s, "firm_size_value", idx)
    size = ranges[bucket, 0] + np.floor(u * (ranges[bucket, 1] - ranges[bucket, 0])).astype(np.int64)
    return naics, state, size


def _weekly_hours(u, full_time):
    ft = FT_WEEKLY[0] + u * (FT_WEEKLY[1] - FT_WEEKLY[0])
    pt = PT_WEEKLY[0] + u * (PT_WEEKLY[1] - PT_WEEKLY[0])
    return np.where(full_time, ft, pt)


class _Workforce:
    """Slot arrays for every worker that ever exists in the scenario."""

    def __init__(self, cfg: ScenarioConfig, start: Quarter):
        self.cfg = cfg
        self.start = start
        m = cfg.entrants_per_quarter
        total = cfg.n_workers + (cfg.n_quarters - 1) * m
        self.total = total
        self.active = np.zeros(total, dtype=bool)
        self.gone = np.zeros(total, dtype=bool)
        self.firm = np.zeros(total, dtype=np.int64)
        self.hourly = np.zeros(total)
        self.weekly = np.zeros(total)
        self.full_time = np.zeros(total, dtype=bool)
        self.birth = np.zeros(total, dtype="datetime64[D]")
        self.hire = np.zeros(total, dtype="datetime64[D]")
        self.gender = np.zeros(total, dtype=np.int64)

    def create(self, slots: np.ndarray, k: int, entrants: bool):
        cfg, s = self.cfg, self.cfg.seed
        q = Quarter.from_index(self.start.index + k)
        qend = np.datetime64(q.end_date, "D")
        qstart = np.datetime64(q.start_date, "D")
        self.gender[slots] = _categorical(uniforms(s, "gender", slots), cfg.gender_mix)
        mix = cfg.entrant_age_mix if entrants else cfg.age_mix
        bucket = np.array(list(mix))[_categorical(uniforms(s, "age_bucket", slots), mix)]
        lo = np.array([AGE_RANGES[b][0] for b in bucket], dtype=np.float64)
        hi = np.array([AGE_RANGES[b][1] for b in bucket], dtype=np.float64)
        age = lo + uniforms(s, "age_offset", slots) * (hi - lo)
        self.birth[slots] = qend - np.floor(age * DAYS_PER_YEAR).astype(np.int64).astype("timedelta64[D]")

        z = normals(s, "wage_z", slots)
        part_time = uniforms(s, "part_time", slots) < cfg.pt_share
        bw = cfg.base_wage_distribution
        wage = bw["median"] * np.exp(bw["sigma"] * z) * np.exp(AGE_WAGE_SLOPE * (age - 35.0))
        wage = np.where(part_time, wage * PART_TIME_WAGE_FACTOR, wage)
        if entrants:
            wage = wage * (1.0 - cfg.entrant_wage_discount)
        self.hourly[slots] = np.maximum(wage, 1.0)
        self.full_time[slots] = ~part_time
        self.weekly[slots] = _weekly_hours(uniforms(s, "hours", slots), ~part_time)
        self.firm[slots] = np.floor(uniforms(s, "firm", slots) * cfg.firms).astype(np.int64)
        if entrants:
            span = (qend - qstart).astype(np.int64) + 1
            self.hire[slots] = qstart + np.floor(uniforms(s, "hire_day", slots, k) * span).astype(np.int64).astype("timedelta64[D]")
        else:
            tenure = uniforms(s, "tenure", slots) * np.minimum(age - 16.0, 25.0)
            self.hire[slots] = qend - np.floor(tenure * DAYS_PER_YEAR).astype(np.int64).astype("timedelta64[D]")
        self.active[slots] = True

    def step(self, k: int):
        """Move active workers from quarter k-1 to quarter k."""
        cfg, s = self.cfg, self.cfg.seed
        q = Quarter.from_index(self.start.index + k)
        qend = np.datetime64(q.end_date, "D")
        qstart = np.datetime64(q.start_date, "D")
        idx = np.flatnonzero(self.active)

        age = full_years_between_arrays(self.birth[idx], np.full(len(idx), qend))
        retire = (age >= 55) & (uniforms(s, "retire", idx, k) < cfg.retirement_rate_55plus)
        age_bucket = np.searchsorted((25, 35, 55), age, side="right")
        prop = np.array([cfg.switch_propensity[label] for label in AGE_LABELS])[age_bucket]
        switch = ~retire & (uniforms(s, "switch", idx, k) < prop)
        hold = ~retire & ~switch

        gone = idx[retire]
        self.active[gone] = False
        self.gone[gone] = True

        sw = idx[switch]
        if len(sw):
            hop = 1 + np.floor(uniforms(s, "new_firm", sw, k) * (cfg.firms - 1)).astype(np.int64)
            self.firm[sw] = (self.firm[sw] + hop) % cfg.firms
            was_ft = self.full_time[sw]
            flip = uniforms(s, "status", sw, k) < cfg.status_change_rate
            now_ft = np.where(flip, ~was_ft, was_ft)
            change = np.where(~was_ft & now_ft, cfg.pt_to_ft_wage_change, cfg.switch_premium)
            factor = 1.0 + change + cfg.switch_noise * normals(s, "switch_z", sw, k)
            self.hourly[sw] = self.hourly[sw] * np.maximum(factor, 0.05)
            self.full_time[sw] = now_ft
            self.weekly[sw] = _weekly_hours(uniforms(s, "hours", sw, k), now_ft)
            span = (qend - qstart).astype(np.int64) + 1
            self.hire[sw] = qstart + np.floor(uniforms(s, "hire_day", sw, k) * span).astype(np.int64).astype("timedelta64[D]")

        hd = idx[hold]
        if len(hd):
            quarterly = (1.0 + cfg.holder_raise_rate) ** 0.25
            self.hourly[hd] *= quarterly * np.exp(cfg.wage_noise * normals(s, "raise_z", hd, k))
            weekly = self.weekly[hd] * (1.0 + cfg.hours_noise * normals(s, "hours_z", hd, k))
            ft = self.full_time[hd]
            self.weekly[hd] = np.where(ft, np.clip(weekly, *FT_CLIP), np.clip(weekly, *PT_CLIP))

    def snapshot(self, k: int) -> dict:
        idx = np.flatnonzero(self.active)
        q = Quarter.from_index(self.start.index + k)
        hours = np.round(self.weekly[idx] * 13.0, 2)
        wages = np.round(self.hourly[idx] * hours, 2)
        return {
            "slot": idx,
            "firm": self.firm[idx],
            "year": np.full(len(idx), q.year, dtype=np.int64),
            "quarter": np.full(len(idx), q.q, dtype=np.int64),
            "total_wages": wages,
            "total_hours": hours,
            "hire_date": self.hire[idx],
            "birth_date": self.birth[idx],
            "gender": self.gender[idx],
        }


def generate_frame(cfg: ScenarioConfig) -> pd.DataFrame:
    """Raw payroll rows in the ingest schema (typed columns, ids as categoricals)."""
    start = Quarter.parse(cfg.start_quarter)
    wf = _Workforce(cfg, start)
    m = cfg.entrants_per_quarter
    wf.create(np.arange(cfg.n_workers), 0, entrants=False)
    parts = [wf.snapshot(0)]
    for k in range(1, cfg.n_quarters):
        wf.step(k)
        lo = cfg.n_workers + (k - 1) * m
        if m:
            wf.create(np.arange(lo, lo + m), k, entrants=True)
        parts.append(wf.snapshot(k))
    cols = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}

    naics, state, size = _firms(cfg)
    firm = cols.pop("firm")
    gender_labels = np.array(list(cfg.gender_mix))
    gender_cats = sorted(set(gender_labels))
    return pd.DataFrame({
        "worker_id": pd.Categorical.from_codes(cols.pop("slot"), categories=_ids("w", wf.total)),
        "firm_id": pd.Categorical.from_codes(firm, categories=_ids("f", cfg.firms)),
        "year": cols["year"],
        "quarter": cols["quarter"],
        "total_wages": cols["total_wages"],
        "total_hours": cols["total_hours"],
        "hire_date": cols["hire_date"],
        "birth_date": cols["birth_date"],
        "gender": pd.Categorical(gender_labels[cols["gender"]], categories=gender_cats),
        "naics2": pd.Categorical(naics[firm], categories=sorted(set(naics))),
        "state": pd.Categorical(state[firm], categories=sorted(set(state))),
        "firm_size": size[firm],
    })


def generate_panel(cfg: ScenarioConfig) -> PanelDataset:
    start = Quarter.parse(cfg.start_quarter)
    quarters = [Quarter.from_index(start.index + k) for k in range(cfg.n_quarters)]
    return canonicalize_frame(generate_frame(cfg), quarters=quarters)
