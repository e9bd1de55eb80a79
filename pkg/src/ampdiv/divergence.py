"""Trace comparison across program variants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ampdiv.errors import EmptySet, TraceMismatch
from ampdiv.executor import TraceSet
from ampdiv.flake_filter import StablePointSet


class Verdict(str, Enum):
    NVP_DIVERSE = "NVP_DIVERSE"
    NOT_DETECTED = "NOT_DETECTED"


class Mode(str, Enum):
    FULL = "FULL"
    INPUT_ONLY = "INPUT_ONLY"
    OBSERVATION_ONLY = "OBSERVATION_ONLY"
    TDR = "TDR"


@dataclass(frozen=True)
class Divergence:
    point_id: str
    value_a: tuple[str, ...]
    value_b: tuple[str, ...]
    environment: int = 0


@dataclass(frozen=True)
class DivergenceReport:
    pair: tuple[str, str]
    diverging: tuple[Divergence, ...]
    mode: Mode = Mode.FULL

    @property
    def diverging_points(self) -> frozenset[str]:
        return frozenset(d.point_id for d in self.diverging)

    @property
    def count(self) -> int:
        return len(self.diverging)

    @property
    def verdict(self) -> Verdict:
        return Verdict.NVP_DIVERSE if self.count >= 1 else Verdict.NOT_DETECTED

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "mode": self.mode.value,
            "count": self.count,
            "verdict": self.verdict.value,
            "diverging_points": [d.point_id for d in self.diverging],
        }


def compare(a: TraceSet, b: TraceSet, stable: StablePointSet, mode: Mode = Mode.FULL) -> DivergenceReport:
    """Points whose value sequences differ, counted once per point id.

    A point present in one trace and absent from the other diverges. Points
    discarded during calibration never count.
    """
    if a.suite_digest != b.suite_digest:
        raise TraceMismatch(f"traces come from different suites ({a.suite_digest[:12]} vs {b.suite_digest[:12]})")
    seq_a, seq_b = a.sequences(), b.sequences()
    unknown = (seq_a.keys() | seq_b.keys()) - stable.known
    if unknown:
        raise TraceMismatch(f"{len(unknown)} points are not part of the calibrated suite, e.g. {min(unknown)!r}")
    diverging = tuple(
        Divergence(point, seq_a.get(point, ()), seq_b.get(point, ()), a.environment)
        for point in sorted((seq_a.keys() | seq_b.keys()) & stable.stable)
        if seq_a.get(point, ()) != seq_b.get(point, ())
    )
    return DivergenceReport((a.program, b.program), diverging, mode)


def compare_environments(
    a: Sequence[TraceSet], b: Sequence[TraceSet], stable: StablePointSet, mode: Mode = Mode.FULL
) -> DivergenceReport:
    """Union over environments of per-environment divergences."""
    if len(a) != len(b) or not a:
        raise TraceMismatch("need one trace per environment on both sides")
    merged: dict[str, Divergence] = {}
    for ta, tb in zip(a, b):
        if ta.environment != tb.environment:
            raise TraceMismatch(f"environment {ta.environment} paired with {tb.environment}")
        for d in compare(ta, tb, stable, mode).diverging:
            merged.setdefault(d.point_id, d)
    return DivergenceReport((a[0].program, b[0].program), tuple(merged[k] for k in sorted(merged)), mode)


def mean_divergence(reports: Iterable[DivergenceReport]) -> Fraction:
    counts = [r.count for r in reports]
    if not counts:
        raise EmptySet("no variant pairs to average over")
    return Fraction(sum(counts), len(counts))


def all_pairs(
    traces: Mapping[str, Sequence[TraceSet]], stable: StablePointSet, mode: Mode = Mode.FULL
) -> list[DivergenceReport]:
    """One report per unordered pair of programs, in sorted program order."""
    return [compare_environments(traces[x], traces[y], stable, mode) for x, y in itertools.combinations(sorted(traces), 2)]


def ablate(
    traces: Mapping[Mode, tuple[Sequence[TraceSet], Sequence[TraceSet]]],
    stable: Mapping[Mode, StablePointSet],
) -> dict[Mode, DivergenceReport]:
    """One report per mode for the same program pair."""
    return {mode: compare_environments(a, b, stable[mode], mode) for mode, (a, b) in traces.items()}
