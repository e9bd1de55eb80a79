from __future__ import annotations

import textwrap
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from ampdiv.amplifier import amplify, strip_assertions
from ampdiv.observer import InstrumentedSuite, ObservationMode, build_catalog, instrument_suite, render_instrumented
from ampdiv.pipeline import PipelineConfig, detect
from ampdiv.test_ir import parse_tests

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
ACCEPTANCE_SEED = 7


def write_fixture(root: Path, program: dict[str, str], tests: dict[str, str],
                  variants: dict[str, dict[str, str]] | None = None, oracle: str | None = None) -> Path:
    """Lay out ``root/src``, ``root/tests`` and ``root/variants/<id>/src`` from inline sources."""
    for base, files in [(root / "src", program), (root / "tests", tests)] + [
        (root / "variants" / vid / "src", files) for vid, files in (variants or {}).items()
    ]:
        for name, text in files.items():
            path = base / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
    if oracle is not None:
        (root / "oracle.py").write_text(textwrap.dedent(oracle).lstrip(), encoding="utf-8")
    return root


@dataclass(frozen=True)
class CorpusRun:
    cfg: PipelineConfig
    report: dict
    seconds: float


@pytest.fixture(scope="session")
def corpus_run(tmp_path_factory) -> CorpusRun:
    """One full detection over the shipped corpus with default calibration."""
    cfg = PipelineConfig(corpus=CORPUS, seed=ACCEPTANCE_SEED, out=tmp_path_factory.mktemp("bundle-a"))
    start = time.perf_counter()
    report = detect(cfg)
    return CorpusRun(cfg, report, time.perf_counter() - start)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


def instrument_fixture(fixture: Path, out: Path, *, seed: int | None = None,
                       mode: ObservationMode = ObservationMode.FULL) -> InstrumentedSuite:
    """Render the fixture's tests, assertion-stripped (and amplified when ``seed`` is given), instrumented."""
    suite = parse_tests(fixture)
    if seed is None:
        stripped = [strip_assertions(t, suite.modules[t.origin].framework) for t in suite.tests]
        suite = suite.with_tests(stripped)
    else:
        suite = amplify(suite, seed).suite
    isuite = instrument_suite(suite, build_catalog(fixture / "src"), mode)
    render_instrumented(isuite, out)
    return isuite
