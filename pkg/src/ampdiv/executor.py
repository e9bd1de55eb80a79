"""Run rendered suites against programs in isolated subprocesses.

Each job is one ``python -m ampdiv._runner`` process with its own scratch
directory. Jobs fan out over a thread pool sized by ``AMPDIV_WORKERS``.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence, TypeVar

import ampdiv
from ampdiv.errors import BuildError, ExecutionError
from ampdiv.observer import SUITE_MANIFEST, suite_digest
from ampdiv.test_ir import TestSuite, render_tests

DEFAULT_TIMEOUT = 10.0
WORKERS_ENV = "AMPDIV_WORKERS"

T = TypeVar("T")
R = TypeVar("R")


def workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    count = min(workers(), len(items))
    if count <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(count) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class EnvironmentPerturbation:
    index: int
    variables: tuple[tuple[str, str], ...] = ()
    workdir: str = "env0"
    own_tmpdir: bool = False

    @property
    def identity(self) -> bool:
        return not self.variables and not self.own_tmpdir


IDENTITY = EnvironmentPerturbation(0)


@dataclass(frozen=True)
class ExecStats:
    tests_declared: int
    tests_executed: int
    points_declared: int
    points_executed: int
    dropped_nonexecutable: int
    dropped: tuple[str, ...] = ()
    timeouts: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "tests_declared": self.tests_declared,
            "tests_executed": self.tests_executed,
            "points_declared": self.points_declared,
            "points_executed": self.points_executed,
            "dropped_nonexecutable": self.dropped_nonexecutable,
            "dropped": list(self.dropped),
            "timeouts": list(self.timeouts),
        }


@dataclass(frozen=True)
class TraceSet:
    program: str
    run_id: str
    environment: int
    suite_digest: str
    records: Mapping[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)
    """Per executed test, ``(point_id, value)`` in execution order."""

    def sequences(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for recs in self.records.values():
            for point, value in recs:
                out.setdefault(point, []).append(value)
        return {k: tuple(v) for k, v in out.items()}

    def lines(self) -> Iterator[str]:
        for test, recs in self.records.items():
            for point, value in recs:
                yield f"{self.run_id}\t{test}\t{point}\t{value}"

    def restricted(self, tests: Iterable[str]) -> TraceSet:
        keep = set(tests)
        return TraceSet(self.program, self.run_id, self.environment, self.suite_digest,
                        {t: r for t, r in self.records.items() if t in keep})


def write_trace(trace: TraceSet, path: str | Path) -> None:
    Path(path).write_text("".join(line + "\n" for line in trace.lines()), encoding="utf-8")


def parse_trace_lines(lines: Iterable[str]) -> dict[str, dict[str, list[tuple[str, str]]]]:
    """Wire format back to ``run_id -> test -> records``."""
    out: dict[str, dict[str, list[tuple[str, str]]]] = {}
    for line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        run_id, test, point, value = line.split("\t", 3)
        out.setdefault(run_id, {}).setdefault(test, []).append((point, value))
    return out


@dataclass(frozen=True)
class TestOutcome:
    test: str
    status: str
    error: str = ""

    __test__ = False

    @property
    def passed(self) -> bool:
        return self.status == "passed"


def _package_root() -> str:
    return str(Path(ampdiv.__file__).resolve().parent.parent)


def _invoke(
    program: Path, args: list[str], env: EnvironmentPerturbation, label: str, deadline: float | None
) -> dict:
    scratch = Path(tempfile.mkdtemp(prefix="ampdiv-"))
    try:
        environ = dict(os.environ)
        environ["PYTHONPATH"] = os.pathsep.join(filter(None, [_package_root(), environ.get("PYTHONPATH")]))
        environ["PYTHONDONTWRITEBYTECODE"] = "1"
        environ.update(dict(env.variables))
        if env.own_tmpdir:
            (scratch / "tmp").mkdir()
            environ["TMPDIR"] = str(scratch / "tmp")
        out = scratch / "result.json"
        command = [sys.executable, "-m", "ampdiv._runner", "--program", str(program),
                   "--work", str(scratch / env.workdir), "--out", str(out), *args]
        try:
            proc = subprocess.run(command, env=environ, cwd=scratch, capture_output=True, text=True,
                                  timeout=deadline)
        except subprocess.TimeoutExpired as exc:
            raise ExecutionError(label, f"runner exceeded {deadline}s") from exc
        if proc.returncode == 2:
            raise BuildError(str(program), proc.stderr.strip())
        if proc.returncode != 0 or not out.exists():
            raise ExecutionError(label, proc.stderr.strip()[-2000:] or f"exit status {proc.returncode}")
        return json.loads(out.read_text(encoding="utf-8"))
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _deadline(tests: int, repeat: int, timeout: float) -> float:
    return 60.0 + timeout * max(tests, 1) * repeat


def _read_manifest(suite_dir: Path) -> dict:
    manifest = suite_dir / SUITE_MANIFEST
    if manifest.exists():
        return json.loads(manifest.read_text(encoding="utf-8"))
    return {"digest": suite_digest(suite_dir), "points": {}}


def _collect(run: dict, declared: Sequence[str], manifest: dict, program_id: str, run_id: str,
             env: EnvironmentPerturbation) -> tuple[TraceSet, ExecStats]:
    records: dict[str, tuple[tuple[str, str], ...]] = {}
    dropped: list[str] = []
    timeouts: list[str] = []
    executed = 0
    for result in run["tests"]:
        name = result["test"]
        bad = result["status"] in ("unbuildable", "timeout", "failed") or result["raised_early"]
        if result["status"] == "timeout":
            timeouts.append(name)
        if bad:
            dropped.append(name)
            continue
        executed += result["calls"]
        records[name] = tuple((p, v) for p, v in result["records"])
    trace = TraceSet(program_id, run_id, env.index, manifest["digest"], records)
    stats = ExecStats(
        tests_declared=len(declared),
        tests_executed=executed,
        points_declared=len(manifest["points"]),
        points_executed=sum(len(r) for r in records.values()),
        dropped_nonexecutable=len(dropped),
        dropped=tuple(dropped),
        timeouts=tuple(timeouts),
    )
    return trace, stats


def run_repeated(
    suite_dir: str | Path,
    program: str | Path,
    env: EnvironmentPerturbation = IDENTITY,
    *,
    repeat: int = 1,
    program_id: str = "original",
    run_prefix: str = "run",
    timeout: float = DEFAULT_TIMEOUT,
) -> list[tuple[TraceSet, ExecStats]]:
    """``repeat`` sequential runs of an instrumented suite inside one process."""
    suite_dir = Path(suite_dir).resolve()
    manifest = _read_manifest(suite_dir)
    label = f"{program_id}/{run_prefix}/env{env.index}"
    tests = len(manifest.get("tests", ())) or 1
    payload = _invoke(
        Path(program).resolve(),
        ["--tests", str(suite_dir), "--mode", "trace", "--repeat", str(repeat), "--timeout", str(timeout)],
        env, label, _deadline(tests, repeat, timeout),
    )
    return [
        _collect(run, payload["declared"], manifest, program_id, f"{run_prefix}.e{env.index}.{k}", env)
        for k, run in enumerate(payload["runs"])
    ]


def run_suite(
    suite_dir: str | Path,
    program: str | Path,
    env: EnvironmentPerturbation = IDENTITY,
    *,
    program_id: str = "original",
    run_id: str = "run",
    timeout: float = DEFAULT_TIMEOUT,
) -> tuple[TraceSet, ExecStats]:
    """Run a rendered, instrumented suite once and collect its trace."""
    return run_repeated(suite_dir, program, env, program_id=program_id, run_prefix=run_id, timeout=timeout)[0]


def _suite_dir(suite: TestSuite | str | Path, scratch: Path) -> Path:
    if isinstance(suite, TestSuite):
        render_tests(suite, scratch)
        return scratch
    return Path(suite).resolve()


def run_plain(
    suite: TestSuite | str | Path, program: str | Path, *, timeout: float = DEFAULT_TIMEOUT
) -> list[TestOutcome]:
    """Pass/fail of every argument-free test, assertions intact."""
    with tempfile.TemporaryDirectory(prefix="ampdiv-suite-") as tmp:
        suite_dir = _suite_dir(suite, Path(tmp))
        payload = _invoke(Path(program).resolve(),
                          ["--tests", str(suite_dir), "--mode", "trace", "--timeout", str(timeout)],
                          IDENTITY, f"plain:{program}", _deadline(50, 1, timeout))
    return [TestOutcome(r["test"], r["status"], r["error"]) for r in payload["runs"][0]["tests"]]


@dataclass(frozen=True)
class CoverageResult:
    covered: frozenset[str]
    outcomes: tuple[TestOutcome, ...]

    @property
    def passes(self) -> bool:
        return all(o.passed for o in self.outcomes)


def coverage_run(
    suite: TestSuite | str | Path, program: str | Path, *, timeout: float = DEFAULT_TIMEOUT
) -> CoverageResult:
    with tempfile.TemporaryDirectory(prefix="ampdiv-suite-") as tmp:
        suite_dir = _suite_dir(suite, Path(tmp))
        if not any(suite_dir.rglob("*.py")):
            return CoverageResult(frozenset(), ())
        payload = _invoke(Path(program).resolve(),
                          ["--tests", str(suite_dir), "--mode", "coverage", "--timeout", str(timeout)],
                          IDENTITY, f"coverage:{program}", _deadline(50, 1, timeout))
    outcomes = tuple(TestOutcome(r["test"], r["status"], r["error"]) for r in payload["runs"][0]["tests"])
    return CoverageResult(frozenset(payload["covered"]), outcomes)


def measure_coverage(suite: TestSuite | str | Path, program: str | Path, *, timeout: float = DEFAULT_TIMEOUT
                     ) -> frozenset[str]:
    """Ids (``file:k``) of program statements executed by the suite."""
    return coverage_run(suite, program, timeout=timeout).covered


def run_oracle(oracle: str | Path, program: str | Path, *, timeout: float = DEFAULT_TIMEOUT) -> dict[str, str]:
    """Rendered output of every ``scenario_*`` function against ``program``."""
    payload = _invoke(Path(program).resolve(),
                      ["--mode", "oracle", "--oracle", str(Path(oracle).resolve()), "--timeout", str(timeout)],
                      IDENTITY, f"oracle:{program}", _deadline(200, 1, timeout))
    return payload["outputs"]
