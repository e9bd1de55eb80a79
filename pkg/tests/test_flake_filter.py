from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampdiv.errors import ConfigError
from ampdiv.executor import IDENTITY, TraceSet
from ampdiv.flake_filter import (
    ENV_INDEX_VAR,
    CalibrationConfig,
    Calibrator,
    calibrate,
    calibration_runs,
    perturb_environment,
)
from conftest import instrument_fixture, write_fixture

PROBE = """
import os
import random
import time


class Probe:
    def __init__(self):
        self.answer = 42

    def get_answer(self) -> int:
        return self.answer

    def get_clock(self) -> float:
        return time.perf_counter()

    def get_noise(self) -> int:
        return random.getrandbits(32)

    def get_place(self) -> str:
        return os.getcwd()
"""


@pytest.fixture(scope="module")
def probe_suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("probe")
    fx = write_fixture(root / "fx", {"probe.py": PROBE},
                       {"test_probe.py": "from probe import Probe\ndef test_p():\n    p = Probe()\n"})
    isuite = instrument_fixture(fx, root / "ats")
    return fx, root / "ats", isuite


def test_perturbation_identity_and_determinism():
    assert perturb_environment(IDENTITY, 0) == IDENTITY
    assert perturb_environment(IDENTITY, 0).identity
    one = perturb_environment(IDENTITY, 1)
    assert one == perturb_environment(IDENTITY, 1)
    assert dict(one.variables)[ENV_INDEX_VAR] == "1"
    assert {"TZ", "LANG", "LC_ALL"} <= dict(one.variables).keys()
    assert one.workdir != IDENTITY.workdir and one.own_tmpdir
    assert perturb_environment(IDENTITY, 2) != one
    with pytest.raises(ConfigError):
        perturb_environment(IDENTITY, -1)


@pytest.mark.parametrize(("runs", "envs"), [(1, 3), (30, 0)])
def test_config_validation(runs, envs, tmp_path):
    with pytest.raises(ConfigError):
        CalibrationConfig(tmp_path, runs, envs)


def test_nondeterministic_accessors_are_discarded(probe_suite):
    fx, ats, isuite = probe_suite
    points = calibrate(ats, CalibrationConfig(fx / "src", 30, 3), isuite.point_ids)
    assert sorted(p.split("/")[3] for p in points.discarded) == ["get_clock()#0", "get_noise()#0", "get_place()#0"]
    assert "test_p/0/p/get_answer()#0" in points.stable
    assert "test_p/0/p/answer#0" in points.stable
    assert not points.stable & points.discarded.keys()
    evidence = points.discarded["test_p/0/p/get_noise()#0"]
    assert evidence.reference_values != evidence.values


def test_each_environment_runs_in_its_own_directory(probe_suite):
    fx, ats, isuite = probe_suite
    run = calibration_runs(ats, CalibrationConfig(fx / "src", 2, 2), isuite.point_ids)
    places = [dict(t.records["test_p"])["test_p/0/p/get_place()#0"] for t in run.references]
    assert "/env0/" in places[0] and "/env1/" in places[1]
    assert "test_p/0/p/get_place()#0" in run.points.discarded


def test_deterministic_fixture_discards_nothing(tmp_path):
    fx = write_fixture(tmp_path / "fx", {"box.py": "class Box:\n    def __init__(self):\n        self.n = 3\n"
                                                  "    def get_n(self) -> int:\n        return self.n\n"},
                       {"test_box.py": "from box import Box\ndef test_b():\n    b = Box()\n"})
    isuite = instrument_fixture(fx, tmp_path / "ats")
    points = calibrate(tmp_path / "ats", CalibrationConfig(fx / "src", 30, 3), isuite.point_ids)
    assert points.discarded == {}
    assert points.unexercised == {"test_b/-1/-/exception#0"}
    assert points.report()["test_b/-1/-/exception#0"]["status"] == "unexercised"
    assert points.report()["test_b/0/b/n#0"] == {"status": "stable", "environments": [0, 1, 2]}


def trace(run: int, values: dict[str, str]) -> TraceSet:
    return TraceSet("p", f"r{run}", 0, "d", {"t": tuple(values.items())})


@given(st.lists(st.dictionaries(st.sampled_from("abcd"), st.sampled_from("xy"), max_size=4), min_size=1,
                max_size=8))
def test_calibration_is_monotone(runs):
    calibrator = Calibrator()
    previous = None
    for k, values in enumerate(runs):
        calibrator.add(trace(k, values))
        result = calibrator.result()
        assert result.stable.isdisjoint(result.discarded)
        if previous is not None:
            assert result.stable <= previous.stable
            assert previous.discarded.keys() <= result.discarded.keys()
        previous = result


def test_absent_point_counts_as_variation():
    calibrator = Calibrator()
    calibrator.add(trace(0, {"a": "1", "b": "2"}))
    calibrator.add(trace(1, {"a": "1"}))
    assert set(calibrator.result().discarded) == {"b"}
