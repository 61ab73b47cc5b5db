"""Reading, validating and canonicalizing payroll files.

Two readers share the same raw-row tokenizers and the same ordered list of
row checks:

* :func:`parse_payroll_file` validates row by row and yields
  ``PayrollRecord`` / ``RecordError`` objects. Good for small files and
  for anything that wants per-row diagnostics.
* :func:`read_payroll_table` validates chunks of rows with vectorized
  pandas operations and returns a typed frame. The CLI uses this one.

Both produce identical accept/reject decisions and reasons.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Iterator, Optional, Union

import numpy as np
import pandas as pd

from payroll_panel.core import (
    MIN_WORKER_AGE,
    WEEKS_PER_QUARTER,
    FULL_TIME_WEEKLY_HOURS,
    Gender,
    MissingQuarter,
    Observation,
    PayrollRecord,
    Quarter,
    US_STATES,
    full_years_between,
    full_years_between_arrays,
    quarter_end_days,
)

CSV_COLUMNS = (
    "worker_id", "firm_id", "year", "quarter", "total_wages", "total_hours",
    "hire_date", "birth_date", "gender", "naics2", "state", "firm_size",
)

MIN_YEAR, MAX_YEAR = 1900, 2199

# written so each string has one parse; the batched check repeats it
_NUMBER_RE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_DATE_RE = re.compile(r"[0-9]{4}-[0-9]{2}-[0-9]{2}")
_YEAR_RE = re.compile(r"[0-9]{4}")
_QUARTER_RE = re.compile(r"[1-4]")
_NAICS_RE = re.compile(r"(?:[0-9]{2})?")  # empty = unknown sector
_INT_RE = re.compile(r"[0-9]+")
_GENDERS = frozenset(("M", "F", "U", ""))
_STATES = frozenset(US_STATES) | {""}


class HeaderMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RecordError:
    row: int
    reason: str


@dataclass(frozen=True)
class Provenance:
    source_digest: Optional[str]
    raw_rows: int
    accepted: int
    rejected: int
    deduplicated: int

    def as_dict(self) -> dict:
        return {
            "source_digest": self.source_digest,
            "raw_rows": self.raw_rows,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "deduplicated": self.deduplicated,
        }


# ------------------------------------------------------------- raw rows

def _detect_format(path, fmt):
    if fmt:
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unsupported format {fmt!r}")
        return fmt
    return "jsonl" if str(path).endswith((".jsonl", ".ndjson")) else "csv"


def _json_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return None
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return None


def _check_header(header):
    if header is None or sorted(header) != sorted(CSV_COLUMNS):
        raise HeaderMismatch(f"expected columns {','.join(CSV_COLUMNS)}, got {header}")
    return header


def iter_raw_rows(path, fmt: Optional[str] = None) -> Iterator[tuple[int, Union[dict, RecordError]]]:
    """Yield ``(row_number, fields)`` with every field as a string.

    Rows are numbered from 1 over non-blank data lines. Structural problems
    (wrong field count, bad JSON) come back as ``RecordError`` in place of
    the field dict. A CSV header that is not exactly the schema columns
    raises ``HeaderMismatch`` before anything is yielded.
    """
    fmt = _detect_format(path, fmt)
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.reader(fh)
            header = _check_header(next(reader, None))
            n = 0
            for values in reader:
                if not values:
                    continue
                n += 1
                if len(values) != len(header):
                    yield n, RecordError(n, f"expected {len(header)} fields, got {len(values)}")
                else:
                    yield n, dict(zip(header, values))
        else:
            n = 0
            for line in fh:
                if not line.strip():
                    continue
                n += 1
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    yield n, RecordError(n, "invalid JSON")
                    continue
                if not isinstance(obj, dict):
                    yield n, RecordError(n, "expected a JSON object")
                    continue
                missing = [c for c in CSV_COLUMNS if c not in obj]
                extra = sorted(set(obj) - set(CSV_COLUMNS))
                if missing:
                    yield n, RecordError(n, "missing field " + ", ".join(missing))
                    continue
                if extra:
                    yield n, RecordError(n, "unexpected field " + ", ".join(extra))
                    continue
                row = {}
                for c in CSV_COLUMNS:
                    v = _json_value(obj[c])
                    if v is None:
                        row = RecordError(n, f"unsupported value type for {c}")
                        break
                    row[c] = v
                yield n, row


# ----------------------------------------------------------- row checks

def _parse_number(text):
    if not _NUMBER_RE.fullmatch(text):
        return None
    value = float(text)
    return value + 0.0 if math.isfinite(value) else None


def _parse_date(text):
    if not _DATE_RE.fullmatch(text):
        return None
    y, m, d = int(text[:4]), int(text[5:7]), int(text[8:])
    if not MIN_YEAR <= y <= MAX_YEAR:
        return None
    try:
        return date(y, m, d)
    except ValueError:
        return None


def validate_row(raw: dict) -> Union[PayrollRecord, str]:
    """Check one raw row; return a record or the reason for rejecting it.

    Checks run in a fixed order and the first failure wins. The vectorized
    reader applies the same checks in the same order.
    """
    if raw["worker_id"] == "":
        return "missing worker_id"
    if raw["firm_id"] == "":
        return "missing firm_id"
    if not _YEAR_RE.fullmatch(raw["year"]) or not MIN_YEAR <= int(raw["year"]) <= MAX_YEAR:
        return "invalid year"
    if not _QUARTER_RE.fullmatch(raw["quarter"]):
        return "invalid quarter"
    wages = _parse_number(raw["total_wages"])
    if wages is None:
        return "invalid total_wages"
    if wages < 0:
        return "negative wages"
    hours = _parse_number(raw["total_hours"])
    if hours is None:
        return "invalid total_hours"
    if hours < 0:
        return "negative hours"
    hire = _parse_date(raw["hire_date"])
    if hire is None:
        return "invalid hire_date"
    birth = _parse_date(raw["birth_date"])
    if birth is None:
        return "invalid birth_date"
    if raw["gender"] not in _GENDERS:
        return "invalid gender"
    if not _NAICS_RE.fullmatch(raw["naics2"]):
        return "invalid naics2"
    if raw["state"] not in _STATES:
        return "invalid state"
    if not _INT_RE.fullmatch(raw["firm_size"]) or int(raw["firm_size"]) < 1:
        return "invalid firm_size"
    quarter = Quarter(int(raw["year"]), int(raw["quarter"]))
    if hire > quarter.end_date:
        return "hire_date after quarter end"
    if full_years_between(birth, quarter.end_date) < MIN_WORKER_AGE:
        return f"worker younger than {MIN_WORKER_AGE} at quarter end"
    return PayrollRecord(
        worker_id=raw["worker_id"],
        firm_id=raw["firm_id"],
        quarter=quarter,
        total_wages=wages,
        total_hours=hours,
        hire_date=hire,
        birth_date=birth,
        gender=Gender(raw["gender"] or "U"),
        naics=raw["naics2"],
        state=raw["state"] or None,
        firm_size=int(raw["firm_size"]),
    )


def parse_payroll_file(path, fmt: Optional[str] = None) -> Iterator[Union[PayrollRecord, RecordError]]:
    """Stream records from a CSV or JSONL payroll file.

    Malformed rows yield ``RecordError`` and parsing continues. I/O errors
    and a bad CSV header are raised.
    """
    for n, raw in iter_raw_rows(path, fmt):
        if isinstance(raw, RecordError):
            yield raw
            continue
        result = validate_row(raw)
        yield RecordError(n, result) if isinstance(result, str) else result


# ---------------------------------------------------- vectorized checks

def _per_unique(s: pd.Series, parse, dtype, missing):
    """Apply a scalar parser once per distinct value and broadcast back.

    Returns ``(ok, values)`` where ``ok`` marks rows the parser accepted and
    rejected rows hold ``missing``.
    """
    codes, uniques = pd.factorize(s, sort=False)
    parsed = [parse(u) for u in uniques]
    ok_u = np.array([v is not None for v in parsed] + [False], dtype=bool)
    val_u = np.array([missing if v is None else v for v in parsed] + [missing], dtype=dtype)
    return ok_u[codes], val_u[codes]


_ALL_NUMBERS_RE = re.compile(rf"(?:{_NUMBER_RE.pattern}\n)*")


def _number_column(s: pd.Series):
    """``_per_unique`` with ``_parse_number``, batched for the common case.

    When every distinct value is a well-formed number, one regex pass over
    the joined values replaces a match per value.
    """
    codes, uniques = pd.factorize(s, sort=False)
    if not _ALL_NUMBERS_RE.fullmatch("\n".join(uniques) + "\n"):
        return _per_unique(s, _parse_number, np.float64, np.nan)
    val_u = np.append(np.asarray(uniques, dtype=object).astype(np.float64), np.nan)
    ok_u = np.isfinite(val_u)
    val_u[~ok_u] = np.nan
    return ok_u[codes], val_u[codes] + 0.0


def _as_int(pattern, low):
    def parse(text):
        return int(text) if pattern.fullmatch(text) and int(text) >= low else None
    return parse


def _parse_year(text):
    if not _YEAR_RE.fullmatch(text):
        return None
    y = int(text)
    return y if MIN_YEAR <= y <= MAX_YEAR else None


def _matches(pattern):
    return lambda text: True if pattern.fullmatch(text) else None


def _validate_chunk(rows, numbers):
    """Vectorized twin of :func:`validate_row`.

    ``rows`` is either a list of raw field dicts or a frame of strings with
    the schema columns. Each column is parsed once per distinct value with
    the same scalar parsers ``validate_row`` uses.
    """
    if isinstance(rows, pd.DataFrame):
        df = rows
    else:
        df = pd.DataFrame(rows, columns=list(CSV_COLUMNS), dtype=object)
    numbers = np.asarray(numbers, dtype=np.int64)
    n = len(df)
    reason = np.full(n, None, dtype=object)
    failed = np.zeros(n, dtype=bool)

    def check(ok, message):
        bad = ~ok & ~failed
        reason[bad] = message
        failed[bad] = True

    worker = df["worker_id"].to_numpy(dtype=object)
    firm = df["firm_id"].to_numpy(dtype=object)
    check(worker != "", "missing worker_id")
    check(firm != "", "missing firm_id")
    year_ok, year = _per_unique(df["year"], _parse_year, np.int64, 0)
    check(year_ok, "invalid year")
    q_ok, quarter = _per_unique(df["quarter"], _as_int(_QUARTER_RE, 1), np.int64, 1)
    check(q_ok, "invalid quarter")
    wages_ok, wages = _number_column(df["total_wages"])
    check(wages_ok, "invalid total_wages")
    check(~(wages < 0), "negative wages")
    hours_ok, hours = _number_column(df["total_hours"])
    check(hours_ok, "invalid total_hours")
    check(~(hours < 0), "negative hours")
    hire_ok, hire = _per_unique(df["hire_date"], _parse_date, "datetime64[D]", None)
    check(hire_ok, "invalid hire_date")
    birth_ok, birth = _per_unique(df["birth_date"], _parse_date, "datetime64[D]", None)
    check(birth_ok, "invalid birth_date")
    check(df["gender"].isin(_GENDERS).to_numpy(), "invalid gender")
    check(_per_unique(df["naics2"], _matches(_NAICS_RE), bool, False)[0], "invalid naics2")
    check(df["state"].isin(_STATES).to_numpy(), "invalid state")
    size_ok, size = _per_unique(df["firm_size"], _as_int(_INT_RE, 1), np.int64, 0)
    check(size_ok, "invalid firm_size")

    qend = quarter_end_days(np.where(failed, MIN_YEAR * 4, year * 4 + quarter - 1))
    pending = ~failed
    hire_late = np.zeros(n, dtype=bool)
    hire_late[pending] = hire[pending] > qend[pending]
    check(~hire_late, "hire_date after quarter end")
    pending = ~failed
    too_young = np.zeros(n, dtype=bool)
    too_young[pending] = full_years_between_arrays(birth[pending], qend[pending]) < MIN_WORKER_AGE
    check(~too_young, f"worker younger than {MIN_WORKER_AGE} at quarter end")

    good = ~failed
    gender = df["gender"].to_numpy(dtype=object)[good]
    frame = pd.DataFrame({
        "worker_id": worker[good],
        "firm_id": firm[good],
        "year": year[good],
        "quarter": quarter[good],
        "total_wages": wages[good] + 0.0,
        "total_hours": hours[good] + 0.0,
        "hire_date": hire[good],
        "birth_date": birth[good],
        "gender": np.where(gender == "", "U", gender),
        "naics2": df["naics2"].to_numpy(dtype=object)[good],
        "state": df["state"].to_numpy(dtype=object)[good],
        "firm_size": size[good],
    })
    errors = [RecordError(int(numbers[i]), reason[i]) for i in np.flatnonzero(failed)]
    return frame, errors


@dataclass
class ParseResult:
    frame: pd.DataFrame
    errors: list
    raw_rows: int
    source_digest: str


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _is_plain_csv(path, block_size: int = 1 << 24) -> bool:
    """True when every line has exactly one field per column and nothing is quoted.

    Files like that tokenize the same under any CSV reader, so the fast
    reader can be used without risk of disagreeing with the csv module.
    Blank lines, short or long rows, quotes, NUL bytes and bare carriage
    returns all fail the check.
    """
    per_line = len(CSV_COLUMNS) - 1  # commas before each newline
    carry = 0  # commas on the unfinished line from the previous block
    tail = 0  # bytes on that line
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(block_size), b""):
            if b'"' in block or b"\0" in block or block.count(b"\r") != block.count(b"\r\n"):
                return False
            if block.endswith(b"\r"):
                return False  # a CRLF split across blocks; not worth the bookkeeping
            buf = np.frombuffer(block, dtype=np.uint8)
            delims = buf[(buf == ord(",")) | (buf == ord("\n"))]
            newlines = np.flatnonzero(delims == ord("\n"))
            if len(newlines):
                first = per_line - carry
                if not np.array_equal(newlines, np.arange(first, first + (per_line + 1) * len(newlines),
                                                          per_line + 1)):
                    return False
                carry = len(delims) - int(newlines[-1]) - 1
                tail = len(block) - block.rindex(b"\n") - 1
            else:
                carry += len(delims)
                tail += len(block)
            if carry > per_line:
                return False
    return tail == 0 or carry == per_line


def _fast_csv_chunks(path, chunk_rows, state):
    """Yield ``(frame_of_strings, row_numbers)`` using pandas' C tokenizer.

    Only called on files that pass :func:`_is_plain_csv`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        header = _check_header(next(csv.reader(fh), None))
    start = 1
    reader = pd.read_csv(path, dtype=str, na_filter=False, chunksize=chunk_rows,
                         encoding="utf-8", engine="c", index_col=False)
    with reader:
        for chunk in reader:
            assert list(chunk.columns) == header
            yield chunk, np.arange(start, start + len(chunk))
            start += len(chunk)
            state["n_rows"] = start - 1


def _streaming_chunks(path, fmt, chunk_rows, state):
    """Group :func:`iter_raw_rows` into chunks; structural errors go to ``state``."""
    rows, numbers = [], []
    for n, raw in iter_raw_rows(path, fmt):
        state["n_rows"] = n
        if isinstance(raw, RecordError):
            state["errors"].append(raw)
            continue
        rows.append(raw)
        numbers.append(n)
        if len(rows) >= chunk_rows:
            yield rows, numbers
            rows, numbers = [], []
    if rows:
        yield rows, numbers


def read_payroll_table(path, fmt: Optional[str] = None, chunk_rows: int = 250_000) -> ParseResult:
    """Parse a payroll file into a typed frame of accepted rows, chunk by chunk.

    Well-formed CSV goes through pandas' C tokenizer; anything structurally
    odd, and all JSONL, goes through :func:`iter_raw_rows`. Both routes give
    the same frame and the same errors.
    """
    state = {"n_rows": 0, "errors": []}
    if _detect_format(path, fmt) == "csv" and _is_plain_csv(path):
        chunks = _fast_csv_chunks(path, chunk_rows, state)
    else:
        chunks = _streaming_chunks(path, fmt, chunk_rows, state)
    frames, errors = [], state["errors"]
    for rows, numbers in chunks:
        frame, errs = _validate_chunk(rows, numbers)
        frames.append(frame)
        errors.extend(errs)
    n_rows = state["n_rows"]
    errors.sort(key=lambda e: e.row)
    frame = pd.concat(frames, ignore_index=True) if frames else _validate_chunk([], [])[0]
    return ParseResult(frame, errors, n_rows, file_digest(path))


def records_to_frame(records: Iterable[PayrollRecord]) -> pd.DataFrame:
    cols = {c: [] for c in CSV_COLUMNS}
    for r in records:
        cols["worker_id"].append(r.worker_id)
        cols["firm_id"].append(r.firm_id)
        cols["year"].append(r.quarter.year)
        cols["quarter"].append(r.quarter.q)
        cols["total_wages"].append(float(r.total_wages))
        cols["total_hours"].append(float(r.total_hours))
        cols["hire_date"].append(np.datetime64(r.hire_date, "D"))
        cols["birth_date"].append(np.datetime64(r.birth_date, "D"))
        cols["gender"].append(Gender(r.gender).value)
        cols["naics2"].append(r.naics)
        cols["state"].append(r.state or "")
        cols["firm_size"].append(int(r.firm_size))
    return pd.DataFrame({
        "worker_id": np.array(cols["worker_id"], dtype=object),
        "firm_id": np.array(cols["firm_id"], dtype=object),
        "year": np.array(cols["year"], dtype=np.int64),
        "quarter": np.array(cols["quarter"], dtype=np.int64),
        "total_wages": np.array(cols["total_wages"], dtype=np.float64),
        "total_hours": np.array(cols["total_hours"], dtype=np.float64),
        "hire_date": np.array(cols["hire_date"], dtype="datetime64[D]"),
        "birth_date": np.array(cols["birth_date"], dtype="datetime64[D]"),
        "gender": np.array(cols["gender"], dtype=object),
        "naics2": np.array(cols["naics2"], dtype=object),
        "state": np.array(cols["state"], dtype=object),
        "firm_size": np.array(cols["firm_size"], dtype=np.int64),
    })


# --------------------------------------------------------- the panel

class PanelDataset:
    """One primary-job observation per (worker, quarter), stored column-wise.

    ``frame`` is sorted by worker id then quarter. ``wcode`` / ``fcode`` are
    integer codes whose order matches the lexicographic order of the ids.
    ``qidx`` is :attr:`Quarter.index`.
    """

    def __init__(self, frame: pd.DataFrame, quarters=None, provenance: Optional[Provenance] = None):
        self.frame = frame
        present = {Quarter.from_index(int(i)) for i in np.unique(frame["qidx"].to_numpy())}
        declared = set(quarters or ())
        self.quarters = tuple(sorted(present | declared))
        self.provenance = provenance
        self._rows_by_quarter = {}

    def __len__(self):
        return len(self.frame)

    def __repr__(self):
        span = f"{self.quarters[0]}..{self.quarters[-1]}" if self.quarters else "empty"
        return f"PanelDataset({len(self)} observations, {span})"

    def require(self, quarters) -> None:
        missing = set(quarters) - set(self.quarters)
        if missing:
            raise MissingQuarter(missing)

    def rows_at(self, quarter: Quarter) -> np.ndarray:
        """Positions of the observations at ``quarter``, in worker-id order."""
        if quarter not in self._rows_by_quarter:
            self._rows_by_quarter[quarter] = np.flatnonzero(self.frame["qidx"].to_numpy() == quarter.index)
        return self._rows_by_quarter[quarter]

    def observation(self, pos: int) -> Observation:
        row = self.frame.iloc[int(pos)]
        state = str(row["state"])
        return Observation(
            worker_id=str(row["worker_id"]),
            firm_id=str(row["firm_id"]),
            quarter=Quarter.from_index(int(row["qidx"])),
            total_wages=float(row["total_wages"]),
            total_hours=float(row["total_hours"]),
            hire_date=pd.Timestamp(row["hire_date"]).date(),
            birth_date=pd.Timestamp(row["birth_date"]).date(),
            gender=Gender(str(row["gender"])),
            naics=str(row["naics2"]),
            state=state or None,
            firm_size=int(row["firm_size"]),
        )

    def iter_observations(self) -> Iterator[Observation]:
        for pos in range(len(self.frame)):
            yield self.observation(pos)

    @property
    def observations(self) -> dict:
        """``(worker_id, quarter) -> Observation``; materializes every row."""
        return {(o.worker_id, o.quarter): o for o in self.iter_observations()}

    def get(self, worker_id: str, quarter: Quarter) -> Optional[Observation]:
        f = self.frame
        cats = f["worker_id"].cat.categories
        code = cats.searchsorted(worker_id)
        if code >= len(cats) or cats[code] != worker_id:
            return None
        lo, hi = np.searchsorted(f["wcode"].to_numpy(), [code, code + 1])
        hits = np.flatnonzero(f["qidx"].to_numpy()[lo:hi] == quarter.index)
        return self.observation(lo + hits[0]) if len(hits) else None

    def to_frame(self) -> pd.DataFrame:
        """The panel as ingest-schema columns (strings for dates)."""
        f = self.frame
        return pd.DataFrame({
            "worker_id": f["worker_id"].astype(str),
            "firm_id": f["firm_id"].astype(str),
            "year": f["year"],
            "quarter": f["quarter"],
            "total_wages": f["total_wages"],
            "total_hours": f["total_hours"],
            "hire_date": pd.Series(f["hire_date"].to_numpy().astype("datetime64[D]").astype(str)),
            "birth_date": pd.Series(f["birth_date"].to_numpy().astype("datetime64[D]").astype(str)),
            "gender": f["gender"].astype(str),
            "naics2": f["naics2"].astype(str),
            "state": f["state"].astype(str),
            "firm_size": f["firm_size"],
        })

    def to_csv(self, path=None) -> Optional[str]:
        """Serialize in the ingest CSV schema; returns the text when ``path`` is None."""
        return self.to_frame().to_csv(path, index=False, lineterminator="\n")

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()


# ------------------------------------------------------- canonicalize

def _compact(codes: np.ndarray, n_codes: int) -> tuple[np.ndarray, np.ndarray]:
    """Renumber codes densely, keeping their order; returns (new codes, used old codes)."""
    present = np.bincount(codes, minlength=n_codes) > 0
    remap = np.cumsum(present) - 1
    return remap[codes], np.flatnonzero(present)


def _sorted_codes(values) -> tuple[np.ndarray, np.ndarray]:
    """Integer codes that sort like the string values, plus the uniques."""
    if isinstance(getattr(values, "dtype", None), pd.CategoricalDtype):
        cats = np.asarray(values.cat.categories, dtype=object).astype(str)
        order = np.argsort(cats, kind="stable")
        rank = np.empty(len(cats), dtype=np.int64)
        rank[order] = np.arange(len(cats))
        codes, used = _compact(rank[values.cat.codes.to_numpy()], len(cats))
        return codes, cats[order][used]
    codes, uniques = pd.factorize(np.asarray(values, dtype=object), sort=True)
    return codes.astype(np.int64), np.asarray(uniques, dtype=object).astype(str)


def _first_in_group(*keys) -> np.ndarray:
    """Mask of the first row of each run of equal keys (keys already sorted)."""
    n = len(keys[0])
    first = np.ones(n, dtype=bool)
    if n > 1:
        same = np.ones(n - 1, dtype=bool)
        for k in keys:
            same &= k[1:] == k[:-1]
        first[1:] = ~same
    return first


def _resolve_firm_attribute(group: np.ndarray, by_group: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Modal value per group; ties go to the value seen first (rows in sorted record order).

    ``by_group`` is a stable argsort of ``group``.
    """
    g, v = group[by_group], values[by_group]
    if not np.any((g[1:] == g[:-1]) & (v[1:] != v[:-1])):
        return values
    stats = (
        pd.DataFrame({"g": group, "v": values, "pos": np.arange(len(group))})
        .groupby(["g", "v"], sort=False)["pos"]
        .agg(["size", "min"])
        .reset_index()
        .sort_values(["g", "size", "min"], ascending=[True, False, True], kind="mergesort")
        .drop_duplicates("g")
    )
    winner = pd.Series(stats["v"].to_numpy(), index=stats["g"].to_numpy())
    return winner.reindex(group).to_numpy(dtype=values.dtype)


def canonicalize_frame(raw: pd.DataFrame, *, quarters=None, parse_rejected: int = 0,
                       source_digest: Optional[str] = None) -> PanelDataset:
    """Collapse validated rows into a :class:`PanelDataset`.

    Zero-hour rows are dropped and counted as rejected. Conflicting firm
    attributes within a quarter are replaced by their modal value. For each
    (worker, quarter) the job with the highest wages is kept, ties going to
    the smallest firm id.
    """
    n_in = len(raw)
    raw = raw[raw["total_hours"].to_numpy() > 0]
    zero_hours = n_in - len(raw)
    n = len(raw)

    wcode, wuniq = _sorted_codes(raw["worker_id"])
    fcode, funiq = _sorted_codes(raw["firm_id"])
    qidx = raw["year"].to_numpy(dtype=np.int64) * 4 + raw["quarter"].to_numpy(dtype=np.int64) - 1
    cols = {
        "total_wages": raw["total_wages"].to_numpy(dtype=np.float64),
        "total_hours": raw["total_hours"].to_numpy(dtype=np.float64),
        "hire_date": raw["hire_date"].to_numpy().astype("datetime64[D]"),
        "birth_date": raw["birth_date"].to_numpy().astype("datetime64[D]"),
        "firm_size": raw["firm_size"].to_numpy(dtype=np.int64),
    }
    uniq = {}
    for c in ("gender", "naics2", "state"):
        cols[c], uniq[c] = _sorted_codes(raw[c])
    del raw

    # Sorted record order. (worker, quarter, firm) fixes it unless a worker
    # reports the same firm twice in a quarter; then every field is a key.
    q0 = int(qidx.min()) if n else 0
    nq = int(qidx.max()) - q0 + 1 if n else 1
    wq = wcode * nq + (qidx - q0)
    wqf = wq * max(len(funiq), 1) + fcode
    order = np.argsort(wqf, kind="stable")
    if np.any(np.diff(wqf[order]) == 0):
        c = cols
        order = np.lexsort((c["firm_size"], c["state"], c["naics2"], c["gender"],
                            c["birth_date"].astype(np.int64), c["hire_date"].astype(np.int64),
                            c["total_hours"], c["total_wages"], fcode, qidx, wcode))
    wcode, fcode, qidx, wq = wcode[order], fcode[order], qidx[order], wq[order]
    cols = {k: v[order] for k, v in cols.items()}
    del order, wqf

    if n:
        firm_quarter = fcode * nq + (qidx - q0)
        by_group = np.argsort(firm_quarter, kind="stable")
        for c in ("naics2", "state", "firm_size"):
            cols[c] = _resolve_firm_attribute(firm_quarter, by_group, cols[c])
        del firm_quarter, by_group

    first = _first_in_group(wq)
    if first.all():
        keep = np.arange(n)
    else:
        pick = np.lexsort((np.arange(n), fcode, -cols["total_wages"], wq))
        keep = pick[_first_in_group(wq[pick])]
    deduplicated = n - len(keep)

    fcode_k, fused = _compact(fcode[keep], len(funiq))
    wages, hours = cols["total_wages"][keep], cols["total_hours"][keep]
    weekly = hours / WEEKS_PER_QUARTER

    def cat(codes, uniques):
        codes, used = _compact(codes, len(uniques))
        return pd.Categorical.from_codes(codes.astype(np.int32), categories=pd.Index(uniques[used], dtype=object))

    frame = pd.DataFrame({
        "worker_id": pd.Categorical.from_codes(wcode[keep].astype(np.int32), categories=pd.Index(wuniq, dtype=object)),
        "firm_id": pd.Categorical.from_codes(fcode_k.astype(np.int32), categories=pd.Index(funiq[fused], dtype=object)),
        "year": qidx[keep] // 4,
        "quarter": qidx[keep] % 4 + 1,
        "qidx": qidx[keep],
        "total_wages": wages,
        "total_hours": hours,
        "hire_date": cols["hire_date"][keep],
        "birth_date": cols["birth_date"][keep],
        "gender": cat(cols["gender"][keep], uniq["gender"]),
        "naics2": cat(cols["naics2"][keep], uniq["naics2"]),
        "state": cat(cols["state"][keep], uniq["state"]),
        "firm_size": cols["firm_size"][keep],
        "wcode": wcode[keep],
        "fcode": fcode_k.astype(np.int64),
        "hourly_wage": wages / hours,
        "weekly_hours": weekly,
        "full_time": weekly >= FULL_TIME_WEEKLY_HOURS,
    })
    provenance = Provenance(
        source_digest=source_digest,
        raw_rows=n_in + parse_rejected,
        accepted=n,
        rejected=parse_rejected + zero_hours,
        deduplicated=deduplicated,
    )
    return PanelDataset(frame, quarters=quarters, provenance=provenance)


def canonicalize(records: Iterable[PayrollRecord], quarters=None) -> PanelDataset:
    """Build a panel from parsed records (``RecordError`` items are counted as rejected)."""
    records = list(records)
    good = [r for r in records if not isinstance(r, RecordError)]
    return canonicalize_frame(records_to_frame(good), quarters=quarters,
                              parse_rejected=len(records) - len(good))


def load_panel(path, fmt: Optional[str] = None) -> tuple[PanelDataset, list]:
    """Read and canonicalize a payroll file; returns the panel and the row errors."""
    parsed = read_payroll_table(path, fmt)
    panel = canonicalize_frame(parsed.frame, parse_rejected=len(parsed.errors),
                               source_digest=parsed.source_digest)
    return panel, parsed.errors
