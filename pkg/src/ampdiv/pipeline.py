"""End-to-end detection: amplify, instrument, calibrate, run, compare, report."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from ampdiv.amplifier import AmplifiedSuite, amplify, tdr_amplify, write_manifest
from ampdiv.divergence import DivergenceReport, Mode, all_pairs, compare_environments, mean_divergence
from ampdiv.errors import ConfigError, OriginalSuiteRed
from ampdiv.executor import (
    DEFAULT_TIMEOUT,
    ExecStats,
    TraceSet,
    coverage_run,
    parallel_map,
    run_plain,
    run_suite,
    write_trace,
)
from ampdiv.flake_filter import (
    CalibrationConfig,
    CalibrationRun,
    calibration_runs,
    Evidence,
    StablePointSet,
    perturb_environment,
)
from ampdiv.observer import (
    AccessorCatalog,
    InstrumentedSuite,
    ObservationMode,
    build_catalog,
    instrument_suite,
    render_instrumented,
    suite_digest,
)
from ampdiv.program import statements as program_statements
from ampdiv.test_ir import TestSuite, parse_tests

log = logging.getLogger(__name__)

ORIGINAL = "original"
ALL_MODES = (Mode.FULL, Mode.INPUT_ONLY, Mode.OBSERVATION_ONLY, Mode.TDR)
RAW_DIR = "raw"
REPORT_FILE = "report.json"
GROUND_TRUTH = "ground_truth.json"


@dataclass(frozen=True)
class PipelineConfig:
    corpus: Path
    seed: int
    out: Path
    runs: int = 30
    environments: int = 3
    modes: tuple[Mode, ...] = ALL_MODES
    tdr_level: int = 2
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if self.tdr_level < 1:
            raise ConfigError("tdr_level must be >= 1")
        if not self.modes:
            raise ConfigError("at least one mode is required")
        object.__setattr__(self, "corpus", Path(self.corpus).resolve())
        object.__setattr__(self, "out", Path(self.out).resolve())
        if not self.corpus.is_dir():
            raise ConfigError(f"corpus {self.corpus} is not a directory")
        CalibrationConfig(self.corpus, self.runs, self.environments, self.timeout)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "runs": self.runs,
            "environments": self.environments,
            "modes": [m.value for m in self.modes],
            "tdr_level": self.tdr_level,
            "timeout": self.timeout,
        }


def is_fixture(path: Path) -> bool:
    return (path / "src").is_dir() and (path / "tests").is_dir()


def fixtures(corpus: Path) -> list[Path]:
    """A single fixture, or every fixture directly below ``corpus``."""
    if is_fixture(corpus):
        return [corpus]
    found = sorted(p for p in corpus.iterdir() if p.is_dir() and is_fixture(p))
    if not found:
        raise ConfigError(f"no fixture (src/ and tests/) under {corpus}")
    return found


def variant_programs(fixture: Path) -> dict[str, Path]:
    root = fixture / "variants"
    if not root.is_dir():
        return {}
    return {p.name: p / "src" for p in sorted(root.iterdir()) if (p / "src").is_dir()}


# -- caching -----------------------------------------------------------------


class StageCache:
    """Content-addressed JSON results keyed by stage inputs."""

    def __init__(self, root: Path) -> None:
        self.root = root

    @staticmethod
    def key(*parts: Any) -> str:
        return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()

    def get(self, key: str) -> Any | None:
        path = self.root / f"{key}.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return None

    def put(self, key: str, value: Any) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / f"{key}.tmp"
        tmp.write_text(json.dumps(value, sort_keys=True), encoding="utf-8")
        tmp.replace(self.root / f"{key}.json")


def _trace_json(trace: TraceSet) -> dict:
    return {
        "program": trace.program,
        "run_id": trace.run_id,
        "environment": trace.environment,
        "suite_digest": trace.suite_digest,
        "records": {t: [list(r) for r in recs] for t, recs in trace.records.items()},
    }


def _trace_from(data: dict) -> TraceSet:
    return TraceSet(
        data["program"], data["run_id"], data["environment"], data["suite_digest"],
        {t: tuple((p, v) for p, v in recs) for t, recs in data["records"].items()},
    )


def _stats_from(data: dict) -> ExecStats:
    return ExecStats(**{**data, "dropped": tuple(data["dropped"]), "timeouts": tuple(data["timeouts"])})


# -- stages ------------------------------------------------------------------


@dataclass
class ModeSuite:
    mode: Mode
    amplified: AmplifiedSuite | None
    instrumented: InstrumentedSuite
    directory: Path
    digest: str


def _prepare_suites(
    suite: TestSuite, catalog: AccessorCatalog, cfg: PipelineConfig, target: Path
) -> dict[Mode, ModeSuite]:
    wanted = set(cfg.modes)
    needs_full = bool(wanted & {Mode.FULL, Mode.INPUT_ONLY, Mode.OBSERVATION_ONLY})
    out: dict[Mode, ModeSuite] = {}
    plans: list[tuple[Mode, AmplifiedSuite, TestSuite, ObservationMode]] = []
    if needs_full:
        ats = amplify(suite, cfg.seed)
        plans.append((Mode.FULL, ats, ats.suite, ObservationMode.FULL))
        if Mode.INPUT_ONLY in wanted:
            plans.append((Mode.INPUT_ONLY, ats, ats.suite, ObservationMode.ORIGINAL))
        if Mode.OBSERVATION_ONLY in wanted:
            originals = ats.suite.with_tests([t for t in ats.tests if not t.provenance.generated])
            plans.append((Mode.OBSERVATION_ONLY, None, originals, ObservationMode.FULL))  # type: ignore[arg-type]
    if Mode.TDR in wanted:
        tdr = tdr_amplify(suite, cfg.tdr_level)
        plans.append((Mode.TDR, tdr, tdr.suite, ObservationMode.ORIGINAL))
    for mode, amplified, tests, observation in plans:
        directory = target / mode.value.lower()
        if directory.exists():
            shutil.rmtree(directory)
        instrumented = instrument_suite(tests, catalog, observation)
        render_instrumented(instrumented, directory)
        if amplified is not None and mode in (Mode.FULL, Mode.TDR):
            write_manifest(amplified, directory / "manifest.json")
        manifest = json.loads((directory / "suite.json").read_text(encoding="utf-8"))
        out[mode] = ModeSuite(mode, amplified, instrumented, directory, manifest["digest"])
    return out


def prepare_fixture(fixture: Path, cfg: PipelineConfig) -> dict[Mode, ModeSuite]:
    """Amplify and instrument the fixture's tests into ``cfg.out/ats/<fixture>/<mode>/``."""
    suite = parse_tests(fixture)
    return _prepare_suites(suite, build_catalog(fixture / "src"), cfg, cfg.out / "ats" / fixture.name)


def calibrate_fixture(fixture: Path, cfg: PipelineConfig) -> dict[Mode, CalibrationRun]:
    """Calibration of the FULL and TDR suites, whichever ``cfg.modes`` asks for."""
    suites = prepare_fixture(fixture, cfg)
    cache = StageCache(cfg.out / RAW_DIR / "cache")
    return {m: _calibrate(suites[m], fixture / "src", cfg, cache) for m in (Mode.FULL, Mode.TDR) if m in suites}


def _calibrate(ms: ModeSuite, program: Path, cfg: PipelineConfig, cache: StageCache) -> CalibrationRun:
    key = cache.key("calibrate", ms.digest, suite_digest(program), cfg.runs, cfg.environments, cfg.timeout)
    cached = cache.get(key)
    if cached is not None:
        points = StablePointSet(
            frozenset(cached["stable"]),
            {k: _evidence(v) for k, v in cached["discarded"].items()},
            frozenset(cached["unexercised"]),
            {k: tuple(v) for k, v in cached["exercised_in"].items()},
        )
        return CalibrationRun(points, tuple(_trace_from(t) for t in cached["references"]),
                              tuple(_stats_from(s) for s in cached["stats"]))
    ccfg = CalibrationConfig(program, cfg.runs, cfg.environments, cfg.timeout)
    run = calibration_runs(ms.directory, ccfg, ms.instrumented.point_ids)
    points, stats = run.points, run.stats
    references = [dataclasses.replace(t, program=ORIGINAL, run_id=f"{ORIGINAL}.e{t.environment}") for t in run.references]
    cache.put(key, {
        "stable": sorted(points.stable),
        "discarded": {k: v.to_json() for k, v in points.discarded.items()},
        "unexercised": sorted(points.unexercised),
        "exercised_in": {k: list(v) for k, v in points.exercised_in.items()},
        "references": [_trace_json(t) for t in references],
        "stats": [s.to_json() for s in stats],
    })
    return CalibrationRun(points, tuple(references), tuple(stats))


def _evidence(data: dict) -> Evidence:
    return Evidence(data["reference_run"], data["run"], tuple(data["reference_values"]), tuple(data["values"]))


def _run_cached(
    ms: ModeSuite, program_id: str, program: Path, env_index: int, cfg: PipelineConfig, cache: StageCache
) -> tuple[TraceSet, ExecStats]:
    key = cache.key("run", ms.digest, suite_digest(program), env_index, cfg.timeout)
    cached = cache.get(key)
    if cached is None:
        env = perturb_environment(index=env_index)
        trace, stats = run_suite(ms.directory, program, env, program_id=program_id, run_id=program_id,
                                 timeout=cfg.timeout)
        cached = {"trace": _trace_json(trace), "stats": stats.to_json()}
        cache.put(key, cached)
    trace = dataclasses.replace(_trace_from(cached["trace"]), program=program_id,
                                run_id=f"{program_id}.e{env_index}")
    return trace, _stats_from(cached["stats"])


# -- report assembly ---------------------------------------------------------


def multiplier(originals: int, total: int) -> str:
    """Amplification factor with one decimal, e.g. ``×9.3``."""
    if originals == 0:
        return "×0.0"
    return f"×{total / originals:.1f}"


def _ratio(covered: int, total: int) -> float:
    return round(covered / total, 4) if total else 0.0


def _mean(reports: list[DivergenceReport]) -> float | None:
    if not reports:
        return None
    return round(float(mean_divergence(reports)), 6)


@dataclass
class FixtureResult:
    name: str
    report: dict = field(default_factory=dict)


def _ground_truth(fixture: Path) -> dict:
    path = fixture / GROUND_TRUTH
    return json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}


def detect_fixture(fixture: Path, cfg: PipelineConfig, cache: StageCache) -> dict:
    name = fixture.name
    log.info("fixture %s", name)
    program = fixture / "src"
    suite = parse_tests(fixture)
    outcomes = run_plain(fixture / "tests", program, timeout=cfg.timeout)
    red = [o.test for o in outcomes if not o.passed]
    if red:
        raise OriginalSuiteRed(f"{name}: original tests fail on the original program: {', '.join(red)}")
    catalog = build_catalog(program)
    suites = _prepare_suites(suite, catalog, cfg, cfg.out / "ats" / name)
    raw = cfg.out / RAW_DIR / name

    calibrations: dict[Mode, CalibrationRun] = {}
    for mode in (Mode.FULL, Mode.TDR):
        if mode in suites:
            calibrations[mode] = _calibrate(suites[mode], program, cfg, cache)
            (raw).mkdir(parents=True, exist_ok=True)
            (raw / f"calibration_{mode.value.lower()}.json").write_text(
                json.dumps(calibrations[mode].points.report(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    stable: dict[Mode, StablePointSet] = {}
    for mode, ms in suites.items():
        if mode in calibrations:
            stable[mode] = calibrations[mode].points
        else:
            stable[mode] = calibrations[Mode.FULL].points.restricted(ms.instrumented.point_ids)

    variants = variant_programs(fixture)
    programs = {ORIGINAL: program, **variants}
    envs = range(cfg.environments)
    # FULL may be prepared only to calibrate the derived modes
    compared = [m for m in suites if m in cfg.modes]
    jobs = [
        (mode, pid, k)
        for mode in compared
        for pid in programs
        for k in envs
        if not (pid == ORIGINAL and mode in calibrations)
    ]
    results = parallel_map(lambda j: _run_cached(suites[j[0]], j[1], programs[j[1]], j[2], cfg, cache), jobs)
    traces: dict[Mode, dict[str, list[TraceSet]]] = {m: {p: [] for p in programs} for m in suites}
    stats: dict[tuple[Mode, str], ExecStats] = {}
    for (mode, pid, k), (trace, st) in zip(jobs, results):
        traces[mode][pid].append(trace)
        if k == 0:
            stats[(mode, pid)] = st
    for mode, run in calibrations.items():
        traces[mode][ORIGINAL] = list(run.references)
        stats[(mode, ORIGINAL)] = run.stats[0]
    for mode in compared:
        for pid in programs:
            for trace in traces[mode][pid]:
                target = raw / "traces" / mode.value.lower()
                target.mkdir(parents=True, exist_ok=True)
                write_trace(trace, target / f"{pid}.e{trace.environment}.tsv")

    truth = _ground_truth(fixture)
    per_mode_pairs: dict[Mode, list[DivergenceReport]] = {}
    variant_rows = []
    vs_original: dict[Mode, dict[str, DivergenceReport]] = {m: {} for m in compared}
    for mode in compared:
        for vid in variants:
            vs_original[mode][vid] = compare_environments(traces[mode][ORIGINAL], traces[mode][vid], stable[mode], mode)
        per_mode_pairs[mode] = all_pairs(traces[mode], stable[mode], mode) if variants else []
    for vid in variants:
        row: dict[str, Any] = {"id": vid, "ground_truth": truth.get(vid, {}).get("diverse")}
        for mode in ALL_MODES:
            report = vs_original.get(mode, {}).get(vid)
            row[mode.value] = None if report is None else report.to_json()
        variant_rows.append(row)

    summary = {}
    for mode in ALL_MODES:
        if mode not in compared:
            continue
        detected = sum(1 for r in vs_original[mode].values() if r.count >= 1)
        summary[mode.value] = {
            "variants": len(variants),
            "detected": detected,
            "mean_divergence": _mean(per_mode_pairs[mode]),
            "pairs": len(per_mode_pairs[mode]),
        }

    amplification = {}
    total_statements = len(program_statements(program))
    original_cov = coverage_run(fixture / "tests", program, timeout=cfg.timeout).covered
    for mode in (Mode.FULL, Mode.TDR):
        if mode not in suites:
            continue
        ms = suites[mode]
        ats = ms.amplified
        assert ats is not None
        st = stats[(mode, ORIGINAL)]
        points = stable[mode]
        row = {
            "originals": ats.originals,
            "generated": ats.generated_count,
            "total": len(ats.tests),
            "multiplier": multiplier(ats.originals, len(ats.tests)),
            "expected_generated": ats.counts.expected_generated,
            "literal_counts": dataclasses.asdict(ats.counts),
            "skipped_transformations": len(ats.skipped),
            "points_declared": st.points_declared,
            "tests_executed": st.tests_executed,
            "points_executed": st.points_executed,
            "dropped_nonexecutable": st.dropped_nonexecutable,
            "discarded_points": len(points.discarded),
            "unexercised_points": len(points.unexercised),
            "stable_points": len(points.stable),
        }
        if mode is Mode.FULL:
            amplified_cov = coverage_run(ms.directory, program, timeout=cfg.timeout).covered
            row["statements"] = total_statements
            row["coverage_original"] = _ratio(len(original_cov), total_statements)
            row["coverage_amplified"] = _ratio(len(original_cov | amplified_cov), total_statements)
        amplification[mode.value] = row

    return {
        "name": name,
        "variants": variant_rows,
        "amplification": amplification,
        "summary": summary,
        "pairs": {
            mode.value: [r.to_json() for r in per_mode_pairs[mode]] for mode in ALL_MODES if mode in compared
        },
    }


def _table_rows(fixture_reports: list[dict]) -> tuple[list[dict], list[dict]]:
    table2, table3 = [], []
    for fx in fixture_reports:
        amp = fx["amplification"]
        row2: dict[str, Any] = {"fixture": fx["name"]}
        for prefix, mode in (("", Mode.FULL.value), ("tdr_", Mode.TDR.value)):
            data = amp.get(mode, {})
            for column in ("originals", "generated", "total", "multiplier", "points_declared", "tests_executed",
                           "points_executed", "dropped_nonexecutable", "discarded_points"):
                if prefix and column == "originals":
                    continue
                row2[prefix + column] = data.get(column)
        row2["coverage_original"] = amp.get(Mode.FULL.value, {}).get("coverage_original")
        row2["coverage_amplified"] = amp.get(Mode.FULL.value, {}).get("coverage_amplified")
        table2.append(row2)
        s = fx["summary"]

        def get(mode: Mode, key: str):
            return s.get(mode.value, {}).get(key)

        table3.append({
            "fixture": fx["name"],
            "variants": len(fx["variants"]),
            "variants_detected": get(Mode.FULL, "detected"),
            "input_space_effect": get(Mode.INPUT_ONLY, "detected"),
            "observation_space_effect": get(Mode.OBSERVATION_ONLY, "detected"),
            "mean_divergences": get(Mode.FULL, "mean_divergence"),
            "tdr_variants_detected": get(Mode.TDR, "detected"),
            "tdr_mean_divergences": get(Mode.TDR, "mean_divergence"),
        })
    return table2, table3


def detect(cfg: PipelineConfig) -> dict:
    """Run every fixture of the corpus and write the report bundle to ``cfg.out``."""
    from ampdiv.report import validate_report, write_bundle

    cfg.out.mkdir(parents=True, exist_ok=True)
    cache = StageCache(cfg.out / RAW_DIR / "cache")
    reports = [detect_fixture(fx, cfg, cache) for fx in fixtures(cfg.corpus)]
    table2, table3 = _table_rows(reports)
    report = {
        "schema_version": 1,
        "config": cfg.to_json(),
        "fixtures": reports,
        "table2": table2,
        "table3": table3,
    }
    validate_report(report)
    write_bundle(report, cfg.out)
    return report


def bundle_files(out: Path) -> dict[str, bytes]:
    """Every file of a report bundle (raw outputs excluded), keyed by relative path."""
    return {
        p.relative_to(out).as_posix(): p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.relative_to(out).parts[0] != RAW_DIR
    }


def iter_variant_reports(report: Mapping, mode: Mode) -> Iterable[tuple[str, str, dict]]:
    for fx in report["fixtures"]:
        for variant in fx["variants"]:
            if variant.get(mode.value) is not None:
                yield fx["name"], variant["id"], variant[mode.value]
