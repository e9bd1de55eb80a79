"""Calibration: discard observation points whose values vary on the original program.

The instrumented suite is run repeatedly on the original program under a few
environment perturbations. Any point whose rendered value sequence differs
between two runs is discarded; the remaining points are stable and are the
only ones compared across variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ampdiv.errors import ConfigError
from ampdiv.executor import (
    DEFAULT_TIMEOUT,
    IDENTITY,
    EnvironmentPerturbation,
    ExecStats,
    TraceSet,
    parallel_map,
    run_repeated,
)

ENV_INDEX_VAR = "AMPDIV_ENV_INDEX"
_TIMEZONES = ("America/New_York", "Asia/Tokyo", "Europe/Berlin", "Australia/Sydney", "UTC")
_LOCALES = ("C.UTF-8", "POSIX")


def perturb_environment(base: EnvironmentPerturbation = IDENTITY, index: int = 0) -> EnvironmentPerturbation:
    """Environment number ``index``. Index 0 is ``base`` unchanged.

    Other indices override ``TZ``, ``LANG``, ``LC_ALL`` and ``AMPDIV_ENV_INDEX``,
    use their own ``TMPDIR`` and run tests under a differently named working
    directory.
    """
    if index < 0:
        raise ConfigError(f"environment index must be >= 0, got {index}")
    if index == 0:
        return base
    locale = _LOCALES[(index - 1) % len(_LOCALES)]
    overrides = {
        "TZ": _TIMEZONES[(index - 1) % len(_TIMEZONES)],
        "LANG": locale,
        "LC_ALL": locale,
        ENV_INDEX_VAR: str(index),
    }
    variables = dict(base.variables) | overrides
    return EnvironmentPerturbation(index, tuple(sorted(variables.items())), f"env{index}", own_tmpdir=True)


@dataclass(frozen=True)
class CalibrationConfig:
    program: Path
    runs_per_environment: int = 30
    environments: int = 3
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if self.runs_per_environment < 2:
            raise ConfigError("runs_per_environment must be at least 2")
        if self.environments < 1:
            raise ConfigError("at least one environment is required")

    def perturbations(self) -> list[EnvironmentPerturbation]:
        return [perturb_environment(IDENTITY, k) for k in range(self.environments)]


@dataclass(frozen=True)
class Evidence:
    reference_run: str
    run: str
    reference_values: tuple[str, ...]
    values: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "reference_run": self.reference_run,
            "run": self.run,
            "reference_values": list(self.reference_values),
            "values": list(self.values),
        }


@dataclass(frozen=True)
class StablePointSet:
    stable: frozenset[str]
    discarded: Mapping[str, Evidence] = field(default_factory=dict)
    unexercised: frozenset[str] = frozenset()
    """Declared points no run executed; counted as stable."""
    exercised_in: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    @property
    def known(self) -> frozenset[str]:
        return self.stable | frozenset(self.discarded)

    def restricted(self, points: Iterable[str]) -> StablePointSet:
        keep = frozenset(points)
        return StablePointSet(
            self.stable & keep,
            {k: v for k, v in self.discarded.items() if k in keep},
            self.unexercised & keep,
            {k: v for k, v in self.exercised_in.items() if k in keep},
        )

    def report(self) -> dict:
        """Per point: status, evidence for discards, environments exercised."""
        out = {}
        for point in sorted(self.known):
            entry: dict = {"environments": list(self.exercised_in.get(point, ()))}
            if point in self.discarded:
                entry["status"] = "discarded"
                entry["evidence"] = self.discarded[point].to_json()
            else:
                entry["status"] = "unexercised" if point in self.unexercised else "stable"
            out[point] = entry
        return out


class Calibrator:
    """Accumulates runs; a discarded point is never restored by later runs."""

    def __init__(self, declared: Iterable[str] = ()) -> None:
        self.declared = set(declared)
        self._reference: TraceSet | None = None
        self._reference_values: dict[str, tuple[str, ...]] = {}
        self._seen: dict[str, set[int]] = {}
        self._discarded: dict[str, Evidence] = {}
        self.runs = 0

    def add(self, trace: TraceSet) -> None:
        values = trace.sequences()
        for point in values:
            self._seen.setdefault(point, set()).add(trace.environment)
        self.runs += 1
        if self._reference is None:
            self._reference, self._reference_values = trace, values
            return
        for point in sorted(values.keys() | self._reference_values.keys()):
            if point in self._discarded:
                continue
            ref = self._reference_values.get(point, ())
            got = values.get(point, ())
            if ref != got:
                self._discarded[point] = Evidence(self._reference.run_id, trace.run_id, ref, got)

    def result(self) -> StablePointSet:
        executed = set(self._seen)
        unexercised = frozenset(self.declared - executed)
        stable = frozenset((executed | self.declared) - self._discarded.keys())
        return StablePointSet(
            stable=stable,
            discarded=dict(sorted(self._discarded.items())),
            unexercised=unexercised,
            exercised_in={k: tuple(sorted(v)) for k, v in sorted(self._seen.items())},
        )


@dataclass(frozen=True)
class CalibrationRun:
    points: StablePointSet
    references: tuple[TraceSet, ...]
    """First trace of each environment, in environment order."""
    stats: tuple[ExecStats, ...]


def calibration_runs(
    ats_dir: str | Path, cfg: CalibrationConfig, declared: Sequence[str] = ()
) -> CalibrationRun:
    envs = cfg.perturbations()

    def job(env: EnvironmentPerturbation) -> list[tuple[TraceSet, ExecStats]]:
        return run_repeated(ats_dir, cfg.program, env, repeat=cfg.runs_per_environment, run_prefix="calib",
                            timeout=cfg.timeout)

    calibrator = Calibrator(declared)
    references, stats = [], []
    for runs in parallel_map(job, envs):
        references.append(runs[0][0])
        stats.append(runs[0][1])
        for trace, _ in runs:
            calibrator.add(trace)
    return CalibrationRun(calibrator.result(), tuple(references), tuple(stats))


def calibrate(ats_dir: str | Path, cfg: CalibrationConfig, declared: Sequence[str] = ()) -> StablePointSet:
    """Runs x environments executions of the suite on the original program."""
    return calibration_runs(ats_dir, cfg, declared).points
