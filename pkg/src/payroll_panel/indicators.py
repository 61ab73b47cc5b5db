"""Turnover, wage-growth and hours-growth indicators.

The functions taking lists of transitions or pairs mirror how one would
compute an indicator by hand. :func:`build_report` computes every
indicator for every segment at once from the columnar panel.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

import numpy as np

from payroll_panel.core import (
    ALL_SEGMENT,
    DIMENSION_ORDER,
    Dimension,
    EmploymentStatus,
    IndicatorRow,
    Observation,
    Quarter,
    SegmentKey,
    Transition,
    TransitionClass,
    assign_bucket,
    bucket_codes,
    bucket_labels,
    hourly_wage,
    segment_matches,
)
from payroll_panel.ingest import PanelDataset
from payroll_panel.panel import (
    ENTRANT,
    HOLDER,
    MATCH_MODES,
    SWITCHER,
    MatchedHolderPair,
    SwitcherPair,
    link_quarter,
    link_year_holders,
    year_window,
)

ATTRIBUTIONS = ("destination", "origin")
TRANSITION_TYPES = ("FTtoFT", "PTtoFT", "FTtoPT", "PTtoPT")
ALL_INDUSTRIES = "ALL"


class InvalidGrowthConfig(ValueError):
    pass


@dataclass(frozen=True)
class GrowthConfig:
    outlier_bounds: tuple = (-0.75, 3.0)
    small_cell_floor: int = 30
    holder_match_mode: str = "strict"
    switcher_attribution: str = "destination"

    def __post_init__(self):
        low, high = (float(b) for b in self.outlier_bounds)
        object.__setattr__(self, "outlier_bounds", (low, high))
        if not low < 0 < high:
            raise InvalidGrowthConfig(f"outlier_bounds: need low < 0 < high, got {self.outlier_bounds}")
        if isinstance(self.small_cell_floor, bool) or int(self.small_cell_floor) != self.small_cell_floor \
                or self.small_cell_floor < 1:
            raise InvalidGrowthConfig(f"small_cell_floor: need an integer >= 1, got {self.small_cell_floor!r}")
        object.__setattr__(self, "small_cell_floor", int(self.small_cell_floor))
        if self.holder_match_mode not in MATCH_MODES:
            raise InvalidGrowthConfig(f"holder_match_mode: must be one of {MATCH_MODES}")
        if self.switcher_attribution not in ATTRIBUTIONS:
            raise InvalidGrowthConfig(f"switcher_attribution: must be one of {ATTRIBUTIONS}")

    @classmethod
    def from_mapping(cls, data: dict) -> "GrowthConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidGrowthConfig("unknown field(s): " + ", ".join(sorted(unknown)))
        return cls(**data)

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ------------------------------------------------------ shared arithmetic

def relative_change(new: float, old: float) -> float:
    if old == 0:
        return math.nan
    return (new - old) / old


def trimmed_mean(values: Iterable[float], cfg: GrowthConfig) -> tuple[Optional[float], int]:
    """Mean of the values inside the closed outlier bounds, gated by the floor.

    Returns ``(mean or None, number of values used)``. NaN values (growth
    from a zero base) never count.
    """
    low, high = cfg.outlier_bounds
    kept = [v for v in values if low <= v <= high]
    if len(kept) < cfg.small_cell_floor or not kept:
        return None, len(kept)
    return sum(kept) / len(kept), len(kept)


def _gate(total: float, n: int, cfg: GrowthConfig) -> Optional[float]:
    if n < cfg.small_cell_floor or n == 0:
        return None
    return float(total / n)


# --------------------------------------------------- list-based indicators

def _switcher_obs(tr_old: Observation, tr_new: Observation, cfg: GrowthConfig) -> Observation:
    return tr_new if cfg.switcher_attribution == "destination" else tr_old


def turnover_rate(transitions: list[Transition], filter: SegmentKey = ALL_SEGMENT,
                  cfg: GrowthConfig = GrowthConfig()) -> Optional[float]:
    """Switchers over everyone employed in the quarter (holders, switchers, entrants)."""
    switchers = denominator = 0
    for tr in transitions:
        if tr.kind is TransitionClass.EXITER:
            continue
        obs = tr.to_obs
        if tr.kind is TransitionClass.SWITCHER:
            obs = _switcher_obs(tr.from_obs, tr.to_obs, cfg)
        if not segment_matches(obs, filter):
            continue
        denominator += 1
        switchers += tr.kind is TransitionClass.SWITCHER
    if denominator < cfg.small_cell_floor or denominator == 0:
        return None
    return switchers / denominator


def holder_wage_growth(pairs: list[MatchedHolderPair], filter: SegmentKey = ALL_SEGMENT,
                       cfg: GrowthConfig = GrowthConfig()) -> Optional[float]:
    full_time = EmploymentStatus.FULL_TIME
    growth = [
        relative_change(hourly_wage(p.end_obs), hourly_wage(p.base_obs))
        for p in pairs
        if segment_matches(p.end_obs, filter)
        and p.base_obs.employment_status is full_time
        and p.end_obs.employment_status is full_time
    ]
    return trimmed_mean(growth, cfg)[0]


def holder_hours_growth(pairs: list[MatchedHolderPair], filter: SegmentKey = ALL_SEGMENT,
                        cfg: GrowthConfig = GrowthConfig()) -> Optional[float]:
    growth = [
        relative_change(p.end_obs.total_hours, p.base_obs.total_hours)
        for p in pairs
        if segment_matches(p.end_obs, filter)
    ]
    return trimmed_mean(growth, cfg)[0]


def switcher_wage_growth(pairs: list[SwitcherPair], filter: SegmentKey = ALL_SEGMENT,
                         cfg: GrowthConfig = GrowthConfig()) -> Optional[float]:
    growth = [
        relative_change(hourly_wage(p.new_obs), hourly_wage(p.old_obs))
        for p in pairs
        if segment_matches(_switcher_obs(p.old_obs, p.new_obs, cfg), filter)
    ]
    return trimmed_mean(growth, cfg)[0]


def transition_type(old_full_time: bool, new_full_time: bool) -> str:
    return ("FT" if old_full_time else "PT") + "to" + ("FT" if new_full_time else "PT")


def _table_cells(industries: list, types: list, growth: list, cfg: GrowthConfig) -> dict:
    present = [ALL_INDUSTRIES] + [b for b in bucket_labels(Dimension.INDUSTRY) if b in set(industries)]
    low, high = cfg.outlier_bounds
    sums = {(ind, tt): 0.0 for ind in present for tt in TRANSITION_TYPES}
    counts = dict.fromkeys(sums, 0)
    for ind, tt, g in zip(industries, types, growth):
        if not low <= g <= high:
            continue
        for key in ((ALL_INDUSTRIES, tt), (ind, tt)):
            sums[key] += g
            counts[key] += 1
    return {key: (_gate(sums[key], counts[key], cfg), counts[key]) for key in sums}


def ft_pt_transition_table(pairs: list[SwitcherPair], cfg: GrowthConfig = GrowthConfig()) -> dict:
    """Switcher hourly-wage growth by industry and full/part-time transition.

    Keys are ``(industry, transition)`` for ``"ALL"`` and every industry with
    at least one switcher; a value of None marks a cell below the floor.
    """
    if not pairs:
        return {}
    industries = [assign_bucket(_switcher_obs(p.old_obs, p.new_obs, cfg), Dimension.INDUSTRY).bucket for p in pairs]
    types = [
        transition_type(p.old_obs.employment_status is EmploymentStatus.FULL_TIME,
                        p.new_obs.employment_status is EmploymentStatus.FULL_TIME)
        for p in pairs
    ]
    growth = [relative_change(hourly_wage(p.new_obs), hourly_wage(p.old_obs)) for p in pairs]
    return {key: value for key, (value, _) in _table_cells(industries, types, growth, cfg).items()}


def naive_average_wage_growth(panel: PanelDataset, t: Quarter) -> Optional[float]:
    """Ratio of cross-section mean hourly wages a year apart, minus one.

    No matching and no trimming: the worker mix at each end is whatever it is.
    """
    base = t.minus_year()
    panel.require([base, t])
    hw = panel.frame["hourly_wage"].to_numpy()
    now, then = hw[panel.rows_at(t)], hw[panel.rows_at(base)]
    if len(now) == 0 or len(then) == 0:
        return None
    return float(now.mean() / then.mean() - 1.0)


# ------------------------------------------------------ columnar engine

@dataclass
class _Units:
    """Everything :func:`build_report` needs, as frame positions and per-unit values."""
    pos_t: np.ndarray            # rows at t, sorted
    pos_prev: np.ndarray         # rows at prev(t), sorted
    unit_pos: np.ndarray         # attribution row of each holder/switcher/entrant
    unit_kind: np.ndarray
    sw_pos: np.ndarray           # attribution row of each switcher
    sw_growth: np.ndarray
    sw_type: np.ndarray
    yoy_pos: np.ndarray          # end row of each year-over-year holder pair
    yoy_wage: np.ndarray         # NaN where the pair is not full-time at both ends
    yoy_hours: np.ndarray
    has_year: bool


def _growth(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (new - old) / old
    g[old == 0] = np.nan
    return g


def _prepare(panel: PanelDataset, t: Quarter, cfg: GrowthConfig) -> _Units:
    link = link_quarter(panel, t)
    f = panel.frame
    hw = f["hourly_wage"].to_numpy()
    hours = f["total_hours"].to_numpy()
    ft = f["full_time"].to_numpy()

    employed = link.kind != 3
    unit_kind = link.kind[employed]
    unit_pos = link.cur_pos[employed].copy()
    old, new = link.positions(SWITCHER)
    attributed = new if cfg.switcher_attribution == "destination" else old
    if cfg.switcher_attribution == "origin":
        unit_pos[unit_kind == SWITCHER] = old

    sw_type = np.array([transition_type(a, b) for a, b in zip(ft[old], ft[new])], dtype=object)

    has_year = set(year_window(t)) <= set(panel.quarters)
    if has_year:
        ym = link_year_holders(panel, t, cfg.holder_match_mode)
        base, end = ym.base_pos, ym.end_pos
    else:
        base = end = np.zeros(0, dtype=np.int64)
    yoy_wage = _growth(hw[end], hw[base])
    yoy_wage[~(ft[base] & ft[end])] = np.nan
    return _Units(
        pos_t=panel.rows_at(t),
        pos_prev=panel.rows_at(t.prev()),
        unit_pos=unit_pos,
        unit_kind=unit_kind,
        sw_pos=attributed,
        sw_growth=_growth(hw[new], hw[old]),
        sw_type=sw_type,
        yoy_pos=end,
        yoy_wage=yoy_wage,
        yoy_hours=_growth(hours[end], hours[base]),
        has_year=has_year,
    )


class _BucketLookup:
    """Bucket code of any row at t (or prev(t)) for one dimension."""

    def __init__(self, panel: PanelDataset, units: _Units, dim: Dimension, need_prev: bool):
        f = panel.frame
        self.pos = units.pos_t
        self.codes = bucket_codes(f.iloc[units.pos_t], dim)
        if need_prev:
            self.pos = np.concatenate([units.pos_t, units.pos_prev])
            codes = np.concatenate([self.codes, bucket_codes(f.iloc[units.pos_prev], dim)])
            order = np.argsort(self.pos, kind="stable")
            self.pos, self.codes = self.pos[order], codes[order]

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        return self.codes[np.searchsorted(self.pos, positions)]


def _in_bounds(values: np.ndarray, cfg: GrowthConfig) -> np.ndarray:
    low, high = cfg.outlier_bounds
    return (values >= low) & (values <= high)


def _bucket_means(codes, values, nb, cfg):
    keep = _in_bounds(values, cfg)
    sums = np.bincount(codes[keep], weights=values[keep], minlength=nb)
    counts = np.bincount(codes[keep], minlength=nb)
    return sums, counts


def _dimension_rows(panel, units, t, dim, cfg) -> list[IndicatorRow]:
    labels = bucket_labels(dim)
    nb = len(labels)
    lookup = _BucketLookup(panel, units, dim, need_prev=cfg.switcher_attribution == "origin")
    unit_codes = lookup(units.unit_pos)
    n_kind = {k: np.bincount(unit_codes[units.unit_kind == k], minlength=nb) for k in (HOLDER, SWITCHER, ENTRANT)}

    sw_codes = lookup(units.sw_pos)
    sw_sum, sw_n = _bucket_means(sw_codes, units.sw_growth, nb, cfg)
    n_sw_pairs = np.bincount(sw_codes, minlength=nb)

    yoy_codes = lookup(units.yoy_pos)
    hw_sum, hw_n = _bucket_means(yoy_codes, units.yoy_wage, nb, cfg)
    hh_sum, hh_n = _bucket_means(yoy_codes, units.yoy_hours, nb, cfg)
    n_pairs = np.bincount(yoy_codes, minlength=nb)

    rows = []
    for b, label in enumerate(labels):
        h, s, e = int(n_kind[HOLDER][b]), int(n_kind[SWITCHER][b]), int(n_kind[ENTRANT][b])
        denom = h + s + e
        if denom == 0:
            continue
        rows.append(IndicatorRow(
            quarter=t,
            segment=SegmentKey(dim, label),
            turnover_rate=_gate(s, denom, cfg),
            holder_wage_growth_yoy=_gate(hw_sum[b], int(hw_n[b]), cfg),
            switcher_wage_growth=_gate(sw_sum[b], int(sw_n[b]), cfg),
            holder_hours_growth_yoy=_gate(hh_sum[b], int(hh_n[b]), cfg),
            n_holders=h,
            n_switchers=s,
            n_entrants=e,
            n_matched_holders_yoy=int(n_pairs[b]),
            n_matched_switchers=int(n_sw_pairs[b]),
        ))
    return rows


def build_report(panel: PanelDataset, t: Quarter, cfg: GrowthConfig = GrowthConfig(),
                 workers: int = 1) -> list[IndicatorRow]:
    """One row per populated segment at ``t``, in canonical dimension/bucket order.

    Needs ``t`` and the quarter before it. Year-over-year holder indicators
    are absent when the four quarters before ``t`` are not all in the panel.
    ``workers`` > 1 computes dimensions on a thread pool; the output does not
    depend on it.
    """
    units = _prepare(panel, t, cfg)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda d: _dimension_rows(panel, units, t, d, cfg), DIMENSION_ORDER))
    else:
        parts = [_dimension_rows(panel, units, t, d, cfg) for d in DIMENSION_ORDER]
    return [row for part in parts for row in part]


def transition_table(panel: PanelDataset, t: Quarter, cfg: GrowthConfig = GrowthConfig()) -> dict:
    """Columnar :func:`ft_pt_transition_table`: ``(industry, transition) -> (value, n)``."""
    units = _prepare(panel, t, cfg)
    if len(units.sw_pos) == 0:
        return {}
    lookup = _BucketLookup(panel, units, Dimension.INDUSTRY, need_prev=cfg.switcher_attribution == "origin")
    labels = bucket_labels(Dimension.INDUSTRY)
    industries = [labels[c] for c in lookup(units.sw_pos)]
    return _table_cells(industries, list(units.sw_type), list(units.sw_growth), cfg)


def missing_year_quarters(panel: PanelDataset, t: Quarter) -> list[Quarter]:
    return [q for q in year_window(t) if q not in set(panel.quarters)]
