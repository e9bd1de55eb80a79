from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampdiv.divergence import (
    DivergenceReport,
    Mode,
    Verdict,
    ablate,
    all_pairs,
    compare,
    compare_environments,
    mean_divergence,
)
from ampdiv.errors import EmptySet, TraceMismatch
from ampdiv.executor import TraceSet
from ampdiv.flake_filter import Evidence, StablePointSet

POINTS = ("t/1/f/getPath()#0", "t/-1/-/exception#0", "t/1/f/size#0", "t/1/f/noise#0")
STABLE = StablePointSet(frozenset(POINTS[:3]), {POINTS[3]: Evidence("a", "b", ("1",), ("2",))})


def ts(program: str, records: dict[str, str], env: int = 0, digest: str = "d") -> TraceSet:
    return TraceSet(program, program, env, digest, {"t": tuple(records.items())})


def test_identical_traces():
    a = ts("a", {POINTS[0]: "/tmp/x", POINTS[2]: "3"})
    report = compare(a, a, STABLE)
    assert (report.count, report.verdict) == (0, Verdict.NOT_DETECTED)


def test_value_versus_exception():
    a = ts("a", {POINTS[0]: "/tmp/x"})
    b = ts("b", {POINTS[1]: "FileNotFoundError: file not found"})
    report = compare(a, b, STABLE)
    assert report.verdict is Verdict.NVP_DIVERSE
    assert report.diverging_points == {POINTS[0], POINTS[1]}


def test_discarded_points_never_count():
    a = ts("a", {POINTS[3]: "1"})
    b = ts("b", {POINTS[3]: "2"})
    assert compare(a, b, STABLE).count == 0


def test_different_suites_rejected():
    with pytest.raises(TraceMismatch):
        compare(ts("a", {}, digest="x"), ts("b", {}, digest="y"), STABLE)


def test_unknown_points_rejected():
    with pytest.raises(TraceMismatch):
        compare(ts("a", {"other#0": "1"}), ts("b", {}), STABLE)


def test_points_count_once_however_many_occurrences():
    a = TraceSet("a", "a", 0, "d", {"t": ((POINTS[2], "1"), (POINTS[2], "2"))})
    b = TraceSet("b", "b", 0, "d", {"t": ((POINTS[2], "1"), (POINTS[2], "3"))})
    assert compare(a, b, STABLE).count == 1


def test_environments_are_unioned():
    a = [ts("a", {POINTS[0]: "x"}, 0), ts("a", {POINTS[2]: "1"}, 1)]
    b = [ts("b", {POINTS[0]: "x"}, 0), ts("b", {POINTS[2]: "2"}, 1)]
    report = compare_environments(a, b, STABLE)
    assert report.diverging_points == {POINTS[2]}
    with pytest.raises(TraceMismatch):
        compare_environments(a, b[::-1], STABLE)


def reports(*counts: int) -> list[DivergenceReport]:
    return [DivergenceReport(("a", "b"), tuple([None] * c)) for c in counts]  # type: ignore[list-item]


def test_mean_divergence():
    assert mean_divergence(reports(2, 4)) == 3
    assert mean_divergence(reports(5)) == 5
    assert mean_divergence(reports(0, 0, 0)) == 0
    assert isinstance(mean_divergence(reports(1, 2)), Fraction)
    with pytest.raises(EmptySet):
        mean_divergence([])


def test_all_pairs_covers_every_unordered_pair():
    traces = {p: [ts(p, {POINTS[2]: str(i)})] for i, p in enumerate("abc")}
    pairs = all_pairs(traces, STABLE)
    assert [r.pair for r in pairs] == [("a", "b"), ("a", "c"), ("b", "c")]
    assert mean_divergence(pairs) == 1


values = st.dictionaries(st.sampled_from(POINTS), st.sampled_from(["0", "1", "∅"]))


@given(values, values)
def test_symmetry_and_reflexivity(x, y):
    a, b = ts("a", x), ts("b", y)
    ab, ba = compare(a, b, STABLE), compare(b, a, STABLE)
    assert ab.count == ba.count and ab.diverging_points == ba.diverging_points
    assert compare(a, a, STABLE).count == 0
    assert ab.diverging_points <= STABLE.stable
    assert (ab.verdict is Verdict.NVP_DIVERSE) == (ab.count >= 1)


def test_ablation_reports_per_mode():
    a, b = ts("a", {POINTS[0]: "x", POINTS[2]: "1"}), ts("b", {POINTS[0]: "x", POINTS[2]: "2"})
    out = ablate(
        {Mode.FULL: ([a], [b]), Mode.INPUT_ONLY: ([a.restricted([])], [b.restricted([])])},
        {Mode.FULL: STABLE, Mode.INPUT_ONLY: STABLE},
    )
    assert out[Mode.FULL].count == 1 and out[Mode.INPUT_ONLY].count == 0
    assert out[Mode.FULL].mode is Mode.FULL
