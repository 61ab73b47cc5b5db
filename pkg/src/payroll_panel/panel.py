"""Linking workers across quarters.

The ``link_*`` functions return row positions into ``panel.frame`` and are
what the report engine uses. ``classify_transitions``, ``match_yoy_holders``
and ``match_switchers`` wrap them and materialize ``Observation`` objects,
which is convenient for inspection but slow on large panels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from payroll_panel.core import Observation, Quarter, Transition, TransitionClass
from payroll_panel.ingest import PanelDataset

HOLDER, SWITCHER, ENTRANT, EXITER = 0, 1, 2, 3
KIND_CLASS = {
    HOLDER: TransitionClass.HOLDER,
    SWITCHER: TransitionClass.SWITCHER,
    ENTRANT: TransitionClass.ENTRANT,
    EXITER: TransitionClass.EXITER,
}
MATCH_MODES = ("strict", "endpoints")


@dataclass(frozen=True)
class MatchedHolderPair:
    worker_id: str
    base_obs: Observation
    end_obs: Observation


@dataclass(frozen=True)
class SwitcherPair:
    worker_id: str
    old_obs: Observation
    new_obs: Observation


@dataclass(frozen=True)
class QuarterLink:
    """Transitions into ``quarter``, one entry per worker seen in it or the quarter before.

    ``prev_pos`` / ``cur_pos`` are frame positions, -1 where the worker is absent.
    Entries are in worker-id order.
    """
    quarter: Quarter
    wcode: np.ndarray
    kind: np.ndarray
    prev_pos: np.ndarray
    cur_pos: np.ndarray

    def positions(self, kind: int):
        sel = self.kind == kind
        return self.prev_pos[sel], self.cur_pos[sel]


@dataclass(frozen=True)
class YearMatch:
    """Year-over-year holder pairs ending in ``quarter`` as frame positions."""
    quarter: Quarter
    base_pos: np.ndarray
    end_pos: np.ndarray


def year_window(t: Quarter) -> list[Quarter]:
    base = t.minus_year()
    return [Quarter.from_index(i) for i in range(base.index, t.index + 1)]


def link_quarter(panel: PanelDataset, t: Quarter) -> QuarterLink:
    prev = t.prev()
    panel.require([prev, t])
    wcode = panel.frame["wcode"].to_numpy()
    fcode = panel.frame["fcode"].to_numpy()
    p_rows, c_rows = panel.rows_at(prev), panel.rows_at(t)
    p_w, c_w = wcode[p_rows], wcode[c_rows]

    _, ip, ic = np.intersect1d(p_w, c_w, assume_unique=True, return_indices=True)
    both_prev, both_cur = p_rows[ip], c_rows[ic]
    same_firm = fcode[both_prev] == fcode[both_cur]

    entrant = np.ones(len(c_rows), dtype=bool)
    entrant[ic] = False
    exiter = np.ones(len(p_rows), dtype=bool)
    exiter[ip] = False
    n_ent, n_exit = int(entrant.sum()), int(exiter.sum())

    w = np.concatenate([wcode[both_cur], c_w[entrant], p_w[exiter]])
    kind = np.concatenate([
        np.where(same_firm, HOLDER, SWITCHER),
        np.full(n_ent, ENTRANT),
        np.full(n_exit, EXITER),
    ]).astype(np.int8)
    prev_pos = np.concatenate([both_prev, np.full(n_ent, -1), p_rows[exiter]])
    cur_pos = np.concatenate([both_cur, c_rows[entrant], np.full(n_exit, -1)])
    order = np.argsort(w, kind="stable")
    return QuarterLink(t, w[order], kind[order], prev_pos[order], cur_pos[order])


def link_year_holders(panel: PanelDataset, t: Quarter, mode: str = "strict") -> YearMatch:
    """Workers at the same firm a year ago and now.

    ``strict`` also demands presence at that firm in every quarter in
    between; ``endpoints`` only compares the two ends.
    """
    if mode not in MATCH_MODES:
        raise ValueError(f"holder match mode must be one of {MATCH_MODES}, got {mode!r}")
    window = year_window(t)
    panel.require(window)
    wcode = panel.frame["wcode"].to_numpy()
    fcode = panel.frame["fcode"].to_numpy()

    base_pos = panel.rows_at(window[0])
    cur_pos = base_pos
    steps = window[1:] if mode == "strict" else window[-1:]
    for q in steps:
        rows = panel.rows_at(q)
        _, ia, ib = np.intersect1d(wcode[cur_pos], wcode[rows], assume_unique=True, return_indices=True)
        stay = fcode[cur_pos[ia]] == fcode[rows[ib]]
        base_pos = base_pos[ia][stay]
        cur_pos = rows[ib][stay]
    return YearMatch(t, base_pos, cur_pos)


def _worker_ids(panel, wcodes):
    cats = panel.frame["worker_id"].cat.categories
    return [str(cats[c]) for c in wcodes]


def classify_transitions(panel: PanelDataset, t: Quarter) -> list[Transition]:
    link = link_quarter(panel, t)
    ids = _worker_ids(panel, link.wcode)
    out = []
    for wid, kind, p, c in zip(ids, link.kind, link.prev_pos, link.cur_pos):
        out.append(Transition(
            worker_id=wid,
            to_quarter=t,
            kind=KIND_CLASS[int(kind)],
            from_obs=panel.observation(p) if p >= 0 else None,
            to_obs=panel.observation(c) if c >= 0 else None,
        ))
    return out


def match_yoy_holders(panel: PanelDataset, t: Quarter, mode: str = "strict") -> list[MatchedHolderPair]:
    m = link_year_holders(panel, t, mode)
    wcode = panel.frame["wcode"].to_numpy()
    ids = _worker_ids(panel, wcode[m.end_pos])
    return [
        MatchedHolderPair(wid, panel.observation(b), panel.observation(e))
        for wid, b, e in zip(ids, m.base_pos, m.end_pos)
    ]


def match_switchers(panel: PanelDataset, t: Quarter) -> list[SwitcherPair]:
    link = link_quarter(panel, t)
    old, new = link.positions(SWITCHER)
    ids = _worker_ids(panel, link.wcode[link.kind == SWITCHER])
    return [
        SwitcherPair(wid, panel.observation(o), panel.observation(n))
        for wid, o, n in zip(ids, old, new)
    ]
