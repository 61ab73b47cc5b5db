import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from payroll_panel.core import MissingQuarter, Quarter, TransitionClass
from payroll_panel.ingest import load_panel
from payroll_panel.panel import classify_transitions, match_switchers, match_yoy_holders, year_window
from conftest import panel_of, rec

T = Quarter(2016, 1)
WINDOW = ["2015Q1", "2015Q2", "2015Q3", "2015Q4", "2016Q1"]


def kinds(transitions):
    return {tr.worker_id: tr.kind for tr in transitions}


def test_year_window():
    assert [str(q) for q in year_window(T)] == WINDOW


def test_same_firm_is_holder_and_new_firm_is_switcher():
    panel = panel_of([rec("w1", "fA", "2015Q4"), rec("w1", "fA", "2016Q1"),
                      rec("w2", "fA", "2015Q4"), rec("w2", "fB", "2016Q1")])
    assert kinds(classify_transitions(panel, T)) == {"w1": TransitionClass.HOLDER, "w2": TransitionClass.SWITCHER}


def test_five_worker_fixture():
    records = [rec(w, "fA", q) for w in ("w1", "w2", "w3") for q in ("2015Q4", "2016Q1")]
    records += [rec("w4", "fA", "2015Q4"), rec("w4", "fB", "2016Q1"), rec("w5", "fC", "2016Q1")]
    out = classify_transitions(panel_of(records), T)
    counts = {k: sum(tr.kind is k for tr in out) for k in TransitionClass}
    assert counts == {TransitionClass.HOLDER: 3, TransitionClass.SWITCHER: 1,
                      TransitionClass.ENTRANT: 1, TransitionClass.EXITER: 0}
    entrant = next(tr for tr in out if tr.worker_id == "w5")
    assert entrant.from_obs is None and entrant.to_obs.firm_id == "fC"


def test_transition_observations_follow_class(data_dir):
    panel, _ = load_panel(data_dir / "turnover_10.csv")
    for tr in classify_transitions(panel, T):
        assert tr.to_quarter == T
        if tr.kind in (TransitionClass.HOLDER, TransitionClass.SWITCHER):
            assert tr.from_obs.quarter == T.prev() and tr.to_obs.quarter == T
            assert (tr.from_obs.firm_id == tr.to_obs.firm_id) == (tr.kind is TransitionClass.HOLDER)
        elif tr.kind is TransitionClass.ENTRANT:
            assert tr.from_obs is None and tr.to_obs is not None
        else:
            assert tr.to_obs is None and tr.from_obs is not None


def test_ten_worker_fixture_switch_pairs(data_dir):
    panel, _ = load_panel(data_dir / "turnover_10.csv")
    pairs = match_switchers(panel, T)
    assert [p.worker_id for p in pairs] == ["w08", "w09"]
    assert [(p.old_obs.firm_id, p.new_obs.firm_id) for p in pairs] == [("fA", "fB"), ("fB", "fC")]


def test_no_firm_changes_no_switchers():
    panel = panel_of([rec(w, "fA", q) for w in ("w1", "w2") for q in ("2015Q4", "2016Q1")])
    assert match_switchers(panel, T) == []


def test_missing_previous_quarter():
    panel = panel_of([rec("w1", "fA", "2016Q1")])
    with pytest.raises(MissingQuarter) as exc:
        classify_transitions(panel, T)
    assert exc.value.missing == [Quarter(2015, 4)]
    with pytest.raises(MissingQuarter):
        match_switchers(panel, T)


def test_yoy_needs_all_five_quarters():
    panel = panel_of([rec("w1", "fA", q) for q in ("2015Q1", "2015Q2", "2015Q4", "2016Q1")])
    with pytest.raises(MissingQuarter) as exc:
        match_yoy_holders(panel, T)
    assert exc.value.missing == [Quarter(2015, 3)]


def yoy_fixture():
    records = [rec("stay", "fA", q) for q in WINDOW]
    records += [rec("moved", "fA", q) for q in WINDOW[:3]] + [rec("moved", "fB", q) for q in WINDOW[3:]]
    records += [rec("gap", "fA", q) for q in WINDOW if q != "2015Q3"]
    records += [rec("roundtrip", "fA", q) for q in WINDOW if q != "2015Q3"] + [rec("roundtrip", "fB", "2015Q3")]
    records += [rec("filler", "fC", q) for q in WINDOW]
    return panel_of(records)


def test_yoy_strict_matching():
    pairs = match_yoy_holders(yoy_fixture(), T)
    assert sorted(p.worker_id for p in pairs) == ["filler", "stay"]
    for p in pairs:
        assert p.base_obs.quarter == T.minus_year() and p.end_obs.quarter == T
        assert p.base_obs.firm_id == p.end_obs.firm_id


def test_yoy_endpoint_matching_keeps_gaps_and_round_trips():
    pairs = match_yoy_holders(yoy_fixture(), T, mode="endpoints")
    assert sorted(p.worker_id for p in pairs) == ["filler", "gap", "roundtrip", "stay"]


def test_unknown_match_mode():
    with pytest.raises(ValueError):
        match_yoy_holders(yoy_fixture(), T, mode="fuzzy")


def test_recall_is_exit_then_entry():
    panel = panel_of([rec("w1", "fA", "2015Q3"), rec("w1", "fA", "2016Q1"), rec("w2", "fB", "2015Q4")])
    assert kinds(classify_transitions(panel, Quarter(2015, 4))) == {
        "w1": TransitionClass.EXITER, "w2": TransitionClass.ENTRANT}
    assert kinds(classify_transitions(panel, T)) == {
        "w1": TransitionClass.ENTRANT, "w2": TransitionClass.EXITER}


def test_workers_outside_the_window_change_nothing():
    base = yoy_fixture()
    records = [o.to_record() for o in base.observations.values()]
    records += [rec("early", "fD", "2014Q4"), rec("late", "fD", "2016Q2")]
    wider = panel_of(records)
    assert classify_transitions(wider, T) == classify_transitions(base, T)
    assert match_switchers(wider, T) == match_switchers(base, T)
    assert match_yoy_holders(wider, T) == match_yoy_holders(base, T)


# ------------------------------------------------- brute-force equivalence

QUARTERS = [Quarter.from_index(Quarter(2015, 1).index + i) for i in range(8)]

trajectories = st.lists(
    st.lists(st.sampled_from([None, "fA", "fB", "fC"]), min_size=8, max_size=8),
    min_size=1, max_size=100,
)


def brute_force(records, t, mode):
    where = {(r.worker_id, r.quarter): r.firm_id for r in records}
    workers = sorted({r.worker_id for r in records})
    prev = Quarter(t.year - 1, 4) if t.q == 1 else Quarter(t.year, t.q - 1)
    classes = {}
    for w in workers:
        a, b = where.get((w, prev)), where.get((w, t))
        if a is None and b is None:
            continue
        if a is None:
            classes[w] = TransitionClass.ENTRANT
        elif b is None:
            classes[w] = TransitionClass.EXITER
        else:
            classes[w] = TransitionClass.HOLDER if a == b else TransitionClass.SWITCHER
    window = [q for q in QUARTERS if Quarter(t.year - 1, t.q) <= q <= t]
    held = []
    for w in workers:
        firms = [where.get((w, q)) for q in window]
        ends = firms if mode == "strict" else [firms[0], firms[-1]]
        if ends[0] is not None and all(f == ends[0] for f in ends):
            held.append(w)
    return classes, held


@settings(max_examples=60, deadline=None)
@given(trajectories, st.integers(4, 7), st.sampled_from(["strict", "endpoints"]))
def test_matches_brute_force(paths, t_idx, mode):
    records = [rec(f"w{i:03d}", firm, q) for i, path in enumerate(paths)
               for q, firm in zip(QUARTERS, path) if firm is not None]
    panel = panel_of(records, quarters=QUARTERS)
    t = QUARTERS[t_idx]
    classes, held = brute_force(records, t, mode)
    transitions = classify_transitions(panel, t)
    assert kinds(transitions) == classes
    assert len(transitions) == len(classes)
    switchers = match_switchers(panel, t)
    assert [p.worker_id for p in switchers] == sorted(w for w, k in classes.items() if k is TransitionClass.SWITCHER)
    yoy = match_yoy_holders(panel, t, mode)
    assert [p.worker_id for p in yoy] == held
    if mode == "strict":
        for q in year_window(t)[1:]:
            holders = {tr.worker_id for tr in classify_transitions(panel, q) if tr.kind is TransitionClass.HOLDER}
            assert set(held) <= holders
