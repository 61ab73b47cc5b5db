"""Domain types, bucket taxonomies and quarter arithmetic.

Every bucket rule exists twice: a scalar form used on single
``Observation`` objects and a vectorized form used by the report engine.
Both read the same edge and label tables defined here.
"""
from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd

WEEKS_PER_QUARTER = 13
FULL_TIME_WEEKLY_HOURS = 35.0
MIN_WORKER_AGE = 14
UNKNOWN = "unknown"


class MissingQuarter(LookupError):
    """Raised when an operation needs a quarter the panel does not contain."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing quarters: " + ", ".join(str(q) for q in self.missing))


class UnknownDimension(ValueError):
    pass


_QUARTER_RE = re.compile(r"^(\d{4})[Qq]([1-4])$")
_QUARTER_END = {1: (3, 31), 2: (6, 30), 3: (9, 30), 4: (12, 31)}


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    q: int

    def __post_init__(self):
        if self.q not in (1, 2, 3, 4):
            raise ValueError(f"quarter index must be 1-4, got {self.q}")

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        m = _QUARTER_RE.match(text.strip())
        if not m:
            raise ValueError(f"expected YYYYQn, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_index(cls, index: int) -> "Quarter":
        return cls(index // 4, index % 4 + 1)

    @property
    def index(self) -> int:
        """Consecutive integer label; ``index + 1`` is the next quarter."""
        return self.year * 4 + self.q - 1

    @property
    def end_date(self) -> date:
        month, day = _QUARTER_END[self.q]
        return date(self.year, month, day)

    @property
    def start_date(self) -> date:
        return date(self.year, 3 * self.q - 2, 1)

    def prev(self) -> "Quarter":
        return Quarter.from_index(self.index - 1)

    def next(self) -> "Quarter":
        return Quarter.from_index(self.index + 1)

    def minus_year(self) -> "Quarter":
        return Quarter(self.year - 1, self.q)

    def __str__(self):
        return f"{self.year}Q{self.q}"


def quarter_prev(q: Quarter) -> Quarter:
    return q.prev()


def quarter_minus_year(q: Quarter) -> Quarter:
    return q.minus_year()


class Gender(str, Enum):
    MALE = "M"
    FEMALE = "F"
    UNKNOWN = "U"


class EmploymentStatus(str, Enum):
    FULL_TIME = "full-time"
    PART_TIME = "part-time"


class Dimension(str, Enum):
    ALL = "all"
    REGION = "region"
    STATE = "state"
    INDUSTRY = "industry"
    FIRM_SIZE = "firm_size"
    AGE = "age"
    GENDER = "gender"
    EMPLOYMENT_STATUS = "employment_status"
    WAGE_TIER = "wage_tier"
    TENURE = "tenure"


# Report order: the headline row first, then the published dimension order.
DIMENSION_ORDER = (
    Dimension.ALL,
    Dimension.REGION,
    Dimension.STATE,
    Dimension.INDUSTRY,
    Dimension.FIRM_SIZE,
    Dimension.AGE,
    Dimension.GENDER,
    Dimension.EMPLOYMENT_STATUS,
    Dimension.WAGE_TIER,
    Dimension.TENURE,
)


class TransitionClass(str, Enum):
    HOLDER = "holder"
    SWITCHER = "switcher"
    ENTRANT = "entrant"
    EXITER = "exiter"


# ---------------------------------------------------------------- taxonomy

CENSUS_REGIONS = {
    "Northeast": ("CT", "ME", "MA", "NH", "RI", "VT", "NJ", "NY", "PA"),
    "Midwest": ("IL", "IN", "MI", "OH", "WI", "IA", "KS", "MN", "MO", "NE", "ND", "SD"),
    "West": ("AZ", "CO", "ID", "MT", "NV", "NM", "UT", "WY", "AK", "CA", "HI", "OR", "WA"),
    "South": ("DE", "DC", "FL", "GA", "MD", "NC", "SC", "VA", "WV",
              "AL", "KY", "MS", "TN", "AR", "LA", "OK", "TX"),
}
REGION_OF_STATE = {s: region for region, states in CENSUS_REGIONS.items() for s in states}
US_STATES = tuple(sorted(REGION_OF_STATE))

REPORTED_STATES = ("NY", "NJ", "PA", "TX", "FL", "CA", "IL", "WA", "MI", "OH")
OTHER_STATES = "other states"

INDUSTRY_SECTORS = {
    "natural resources and mining": ("21",),
    "construction": ("23",),
    "manufacturing": ("31", "32", "33"),
    "trade and transportation": ("42", "44", "45", "48", "49", "22"),
    "information": ("51",),
    "finance/real estate": ("52", "53"),
    "professional and business services": ("54", "55", "56"),
    "education & healthcare": ("61", "62"),
    "leisure & hospitality": ("71", "72"),
    "other services": ("81",),
}
INDUSTRY_OF_NAICS = {code: name for name, codes in INDUSTRY_SECTORS.items() for code in codes}
UNCLASSIFIED_INDUSTRY = "unclassified"

FIRM_SIZE_EDGES = (50, 500, 1000)
FIRM_SIZE_LABELS = ("1-49", "50-499", "500-999", "1000+")

# 14 and 15 year olds fall in the youngest bucket ("24 and younger").
AGE_EDGES = (25, 35, 55)
AGE_LABELS = ("16-24", "25-34", "35-54", "55+")

WAGE_TIER_EDGES = (20_000.0, 50_000.0, 75_000.0)
WAGE_TIER_LABELS = ("<20K", "20K-50K", "50K-75K", "75K+")
QUARTERS_PER_YEAR = 4

TENURE_EDGES = (3, 5, 10)
TENURE_LABELS = ("<3 years", "3-5 years", "5-10 years", "10+ years")

GENDER_LABELS = {Gender.MALE: "male", Gender.FEMALE: "female"}

BUCKET_LABELS = {
    Dimension.ALL: ("all",),
    Dimension.REGION: tuple(CENSUS_REGIONS),
    Dimension.STATE: REPORTED_STATES + (OTHER_STATES,),
    Dimension.INDUSTRY: tuple(INDUSTRY_SECTORS) + (UNCLASSIFIED_INDUSTRY,),
    Dimension.FIRM_SIZE: FIRM_SIZE_LABELS,
    Dimension.AGE: AGE_LABELS,
    Dimension.GENDER: ("male", "female"),
    Dimension.EMPLOYMENT_STATUS: (EmploymentStatus.FULL_TIME.value, EmploymentStatus.PART_TIME.value),
    Dimension.WAGE_TIER: WAGE_TIER_LABELS,
    Dimension.TENURE: TENURE_LABELS,
}


def bucket_labels(dim: Dimension) -> tuple:
    """Labels of ``dim`` in report order; ``"unknown"`` is always last."""
    dim = Dimension(dim)
    if dim is Dimension.ALL:
        return BUCKET_LABELS[dim]
    return BUCKET_LABELS[dim] + (UNKNOWN,)


@dataclass(frozen=True)
class SegmentKey:
    dimension: Dimension
    bucket: str

    def __post_init__(self):
        object.__setattr__(self, "dimension", Dimension(self.dimension))
        if self.bucket not in bucket_labels(self.dimension):
            raise ValueError(f"{self.bucket!r} is not a {self.dimension.value} bucket")

    @property
    def order(self) -> tuple:
        return (DIMENSION_ORDER.index(self.dimension), bucket_labels(self.dimension).index(self.bucket))


ALL_SEGMENT = SegmentKey(Dimension.ALL, "all")


# ------------------------------------------------------------ domain types

@dataclass(frozen=True)
class PayrollRecord:
    worker_id: str
    firm_id: str
    quarter: Quarter
    total_wages: float
    total_hours: float
    hire_date: date
    birth_date: date
    gender: Gender
    naics: str
    state: Optional[str]
    firm_size: int


@dataclass(frozen=True)
class Observation(PayrollRecord):
    hourly_wage: float = field(init=False)
    weekly_hours: float = field(init=False)
    employment_status: EmploymentStatus = field(init=False)

    def __post_init__(self):
        if not self.total_hours > 0:
            raise ValueError("observations need positive hours")
        weekly = self.total_hours / WEEKS_PER_QUARTER
        object.__setattr__(self, "hourly_wage", self.total_wages / self.total_hours)
        object.__setattr__(self, "weekly_hours", weekly)
        object.__setattr__(
            self,
            "employment_status",
            EmploymentStatus.FULL_TIME if weekly >= FULL_TIME_WEEKLY_HOURS else EmploymentStatus.PART_TIME,
        )

    @classmethod
    def from_record(cls, rec: PayrollRecord) -> "Observation":
        return cls(**{f: getattr(rec, f) for f in PayrollRecord.__dataclass_fields__})

    def to_record(self) -> PayrollRecord:
        return PayrollRecord(**{f: getattr(self, f) for f in PayrollRecord.__dataclass_fields__})


@dataclass(frozen=True)
class Transition:
    worker_id: str
    to_quarter: Quarter
    kind: TransitionClass
    from_obs: Optional[Observation] = None
    to_obs: Optional[Observation] = None


@dataclass(frozen=True)
class IndicatorRow:
    quarter: Quarter
    segment: SegmentKey
    turnover_rate: Optional[float]
    holder_wage_growth_yoy: Optional[float]
    switcher_wage_growth: Optional[float]
    holder_hours_growth_yoy: Optional[float]
    n_holders: int
    n_switchers: int
    n_entrants: int
    n_matched_holders_yoy: int
    n_matched_switchers: int

    @property
    def turnover_denominator(self) -> int:
        return self.n_holders + self.n_switchers + self.n_entrants


# ------------------------------------------------------- scalar buckets

def full_years_between(start: date, end: date) -> int:
    """Completed years from ``start`` to ``end`` (anniversary counts as a year)."""
    return end.year - start.year - ((end.month, end.day) < (start.month, start.day))


def hourly_wage(obs: Observation) -> float:
    return obs.total_wages / obs.total_hours


def _edge_bucket(value, edges, labels):
    # Upper bounds excluded: a value equal to an edge moves to the next bucket.
    return labels[bisect.bisect_right(edges, value)]


def assign_bucket(obs: Observation, dim: Dimension) -> SegmentKey:
    """Bucket of one observation along ``dim``, evaluated at its quarter end."""
    try:
        dim = Dimension(dim)
    except ValueError:
        raise UnknownDimension(f"unknown dimension {dim!r}") from None
    return SegmentKey(dim, _bucket_label(obs, dim))


def _bucket_label(obs: Observation, dim: Dimension) -> str:
    ref = obs.quarter.end_date
    if dim is Dimension.ALL:
        return "all"
    if dim is Dimension.REGION:
        return REGION_OF_STATE.get(obs.state, UNKNOWN) if obs.state else UNKNOWN
    if dim is Dimension.STATE:
        if not obs.state:
            return UNKNOWN
        return obs.state if obs.state in REPORTED_STATES else OTHER_STATES
    if dim is Dimension.INDUSTRY:
        if not obs.naics:
            return UNKNOWN
        return INDUSTRY_OF_NAICS.get(obs.naics, UNCLASSIFIED_INDUSTRY)
    if dim is Dimension.FIRM_SIZE:
        return _edge_bucket(obs.firm_size, FIRM_SIZE_EDGES, FIRM_SIZE_LABELS)
    if dim is Dimension.AGE:
        return _edge_bucket(full_years_between(obs.birth_date, ref), AGE_EDGES, AGE_LABELS)
    if dim is Dimension.GENDER:
        return GENDER_LABELS.get(Gender(obs.gender), UNKNOWN)
    if dim is Dimension.EMPLOYMENT_STATUS:
        return obs.employment_status.value
    if dim is Dimension.WAGE_TIER:
        annual = obs.total_wages * QUARTERS_PER_YEAR
        return _edge_bucket(annual, WAGE_TIER_EDGES, WAGE_TIER_LABELS)
    if dim is Dimension.TENURE:
        return _edge_bucket(full_years_between(obs.hire_date, ref), TENURE_EDGES, TENURE_LABELS)
    raise UnknownDimension(f"unknown dimension {dim!r}")


def segment_matches(obs: Observation, segment: SegmentKey) -> bool:
    if segment.dimension is Dimension.ALL:
        return True
    return _bucket_label(obs, segment.dimension) == segment.bucket


# --------------------------------------------------- vectorized buckets

def quarter_end_days(qidx: np.ndarray) -> np.ndarray:
    """Quarter-end dates (datetime64[D]) for an array of quarter indices."""
    qidx = np.asarray(qidx, dtype=np.int64)
    year = qidx // 4
    q = qidx % 4
    # first day of the following quarter, minus one day
    months = (year - 1970) * 12 + 3 * (q + 1)
    return months.astype("datetime64[M]").astype("datetime64[D]") - np.timedelta64(1, "D")


def _ymd(days: np.ndarray):
    days = np.asarray(days, dtype="datetime64[D]")
    months = days.astype("datetime64[M]")
    year = months.astype("datetime64[Y]").astype(np.int64) + 1970
    month = months.astype(np.int64) % 12 + 1
    day = (days - months.astype("datetime64[D]")).astype(np.int64) + 1
    return year, month, day


def full_years_between_arrays(start: np.ndarray, end: np.ndarray) -> np.ndarray:
    sy, sm, sd = _ymd(start)
    ey, em, ed = _ymd(end)
    before = (em < sm) | ((em == sm) & (ed < sd))
    return ey - sy - before.astype(np.int64)


def _lookup_codes(column, table: dict, labels: tuple, default: str) -> np.ndarray:
    """Map a string column to label indices through ``table``, one lookup per distinct value."""
    if isinstance(column.dtype, pd.CategoricalDtype):
        uniques = column.cat.categories.astype(str)
        inverse = column.cat.codes.to_numpy()
    else:
        uniques, inverse = np.unique(column.to_numpy(dtype=object).astype(str), return_inverse=True)
    if len(uniques) == 0:
        return np.zeros(len(column), dtype=np.int64)
    codes = np.array([labels.index(table.get(u, default)) for u in uniques], dtype=np.int64)
    return codes[inverse]


def bucket_codes(frame, dim: Dimension) -> np.ndarray:
    """Index into ``bucket_labels(dim)`` for every row of an observation frame.

    ``frame`` needs the canonical panel columns (see ``ingest.PANEL_COLUMNS``).
    """
    try:
        dim = Dimension(dim)
    except ValueError:
        raise UnknownDimension(f"unknown dimension {dim!r}") from None
    labels = bucket_labels(dim)
    n = len(frame)
    if dim is Dimension.ALL:
        return np.zeros(n, dtype=np.int64)
    unknown = labels.index(UNKNOWN)
    if dim is Dimension.REGION:
        table = dict(REGION_OF_STATE)
        table[""] = UNKNOWN
        return _lookup_codes(frame["state"], table, labels, UNKNOWN)
    if dim is Dimension.STATE:
        table = {s: (s if s in REPORTED_STATES else OTHER_STATES) for s in US_STATES}
        table[""] = UNKNOWN
        return _lookup_codes(frame["state"], table, labels, OTHER_STATES)
    if dim is Dimension.INDUSTRY:
        table = dict(INDUSTRY_OF_NAICS)
        table[""] = UNKNOWN
        return _lookup_codes(frame["naics2"], table, labels, UNCLASSIFIED_INDUSTRY)
    if dim is Dimension.FIRM_SIZE:
        return np.searchsorted(FIRM_SIZE_EDGES, frame["firm_size"].to_numpy(), side="right")
    if dim is Dimension.GENDER:
        table = {"M": "male", "F": "female"}
        return _lookup_codes(frame["gender"], table, labels, UNKNOWN)
    if dim is Dimension.EMPLOYMENT_STATUS:
        return np.where(frame["weekly_hours"].to_numpy() >= FULL_TIME_WEEKLY_HOURS, 0, 1)
    if dim is Dimension.WAGE_TIER:
        annual = frame["total_wages"].to_numpy() * QUARTERS_PER_YEAR
        return np.searchsorted(WAGE_TIER_EDGES, annual, side="right")
    ref = quarter_end_days(frame["qidx"].to_numpy())
    if dim is Dimension.AGE:
        years = full_years_between_arrays(frame["birth_date"].to_numpy(), ref)
        return np.searchsorted(AGE_EDGES, years, side="right")
    if dim is Dimension.TENURE:
        years = full_years_between_arrays(frame["hire_date"].to_numpy(), ref)
        return np.searchsorted(TENURE_EDGES, years, side="right")
    return np.full(n, unknown, dtype=np.int64)
