from __future__ import annotations

import ast
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampdiv.amplifier import strip_assertions
from ampdiv.errors import InstrumentationError
from ampdiv.observer import (
    ObservationMode,
    ObservationPoint,
    PointSource,
    build_catalog,
    discover_points,
    exception_point,
    instrument,
    instrument_suite,
    is_getter,
    render_value,
    scrub_identity,
)
from ampdiv.test_ir import TestSuite, parse_module, render_test
from ampdiv.testkit import NULL
from conftest import write_fixture

BOX = """
class Box:
    def __init__(self):
        self.count = 0
        self._hidden = 1

    def getSize(self) -> int:
        return self.count

    def isEmpty(self) -> bool:
        return self.count == 0

    def add(self, item):
        self.count += 1

    def __repr__(self):
        return f"Box({self.count})"


class PathLike:
    def getCanonicalPath(self) -> str:
        return "/a"

    def getAbsolutePath(self) -> str:
        return "/a"
"""


def fn(source: str) -> ast.FunctionDef:
    return ast.parse(source).body[0].body[0]


@pytest.mark.parametrize(
    ("source", "expected"),
    [
        ("class T:\n    def getX(self) -> int:\n        return 1\n", True),
        ("class T:\n    def get_x(self):\n        return self.x\n", True),
        ("class T:\n    def get(self) -> str:\n        return ''\n", True),
        ("class T:\n    def getX(self, i: int) -> int:\n        return i\n", False),
        ("class T:\n    def getX(self) -> None:\n        pass\n", False),
        ("class T:\n    def getX(self):\n        print(1)\n", False),
        ("class T:\n    def getaway(self) -> int:\n        return 1\n", False),
        ("class T:\n    def isY(self) -> bool:\n        return True\n", True),
        ("class T:\n    def is_y(self):\n        return self.n > 0\n", True),
        ("class T:\n    def isY(self) -> int:\n        return 1\n", False),
        ("class T:\n    def is_y(self):\n        return self.n\n", False),
        ("class T:\n    def isY(self, k) -> bool:\n        return k\n", False),
        ("class T:\n    def island(self) -> bool:\n        return True\n", False),
        ("class T:\n    def size(self) -> int:\n        return 1\n", False),
        ("class T:\n    @staticmethod\n    def getX() -> int:\n        return 1\n", False),
    ],
)
def test_accessor_predicate_table(source, expected):
    assert is_getter(fn(source)) is expected


def box_test(tmp_path, body: str, program: str = BOX):
    write_fixture(tmp_path, {"box.py": program}, {"test_box.py": "from box import Box, PathLike\n" + body})
    module, tests = parse_module((tmp_path / "tests" / "test_box.py").read_text(), "test_box.py")
    return build_catalog(tmp_path / "src"), TestSuite(tuple(tests), {"test_box.py": module})


def test_four_points_for_box(tmp_path):
    catalog, suite = box_test(tmp_path, "def test_x():\n    b = Box()\n    b.add(1)\n")
    points = discover_points(suite.tests[0], catalog)
    assert sorted((p.path, p.source) for p in points) == [
        ("__str__()", PointSource.DEBUG_RENDER),
        ("count", PointSource.PUBLIC_FIELD),
        ("getSize()", PointSource.GETTER),
        ("isEmpty()", PointSource.GETTER),
    ]
    assert {p.anchor for p in points} == {1}


def test_path_getters_become_points(tmp_path):
    catalog, suite = box_test(tmp_path, "def test_x():\n    f = PathLike()\n")
    paths = {p.path for p in discover_points(suite.tests[0], catalog)}
    assert paths == {"getCanonicalPath()", "getAbsolutePath()"}


def test_no_objects_no_points(tmp_path):
    catalog, suite = box_test(tmp_path, "def test_x():\n    n = len('abc')\n")
    assert discover_points(suite.tests[0], catalog) == []


def test_hoisted_calls_become_points(tmp_path):
    catalog, suite = box_test(
        tmp_path, "from ampdiv.testkit import assert_true\ndef test_x():\n    assert_true(helper(1))\n")
    test = strip_assertions(suite.tests[0], suite.modules["test_box.py"].framework)
    (point,) = discover_points(test, catalog)
    assert point.source is PointSource.ORIGINAL_ASSERTION_CALL
    assert point.point_id == "test_x/0/-/helper(1)#0"


def test_loop_mutated_objects_are_observed_each_iteration(tmp_path):
    catalog, suite = box_test(
        tmp_path, "def test_x():\n    b = Box()\n    for i in range(3):\n        b.add(i)\n    n = 1\n")
    anchors = {p.anchor for p in discover_points(suite.tests[0], catalog)}
    assert anchors == {2, 3}


def test_instrumented_test_logs_sorted_after_anchor(tmp_path):
    catalog, suite = box_test(tmp_path, "def test_x():\n    b = Box()\n    b.add(1)\n")
    test = suite.tests[0]
    points = discover_points(test, catalog)
    done = instrument(test, points + [exception_point(test.name)])
    codes = [s.code for s in done.statements]
    assert codes[:2] == ["b = Box()", "b.add(1)"]
    probes = codes[2:]
    assert len(probes) == 4 and all(c.startswith("_ak.probe(") for c in probes)
    assert probes == sorted(probes, key=lambda c: c.split("/")[3])
    assert done.guard == "test_x/-1/-/exception#0"
    assert "_ak.observe_exception('test_x/-1/-/exception#0'" in render_test(done)


def test_instrument_is_idempotent(tmp_path):
    catalog, suite = box_test(tmp_path, "def test_x():\n    b = Box()\n")
    test = suite.tests[0]
    once = instrument(test, discover_points(test, catalog))
    assert instrument(once, discover_points(once, catalog)) == once


def test_instrument_rejects_invisible_receiver(tmp_path):
    _, suite = box_test(tmp_path, "def test_x():\n    n = 1\n")
    ghost = ObservationPoint("test_x", 0, "ghost", "count", 0, PointSource.PUBLIC_FIELD, "ghost.count")
    with pytest.raises(InstrumentationError):
        instrument(suite.tests[0], [ghost])


def test_original_mode_keeps_only_assertion_points(tmp_path):
    catalog, suite = box_test(
        tmp_path,
        "from ampdiv.testkit import assert_equal\ndef test_x():\n    b = Box()\n    assert_equal(0, b.getSize())\n")
    stripped = suite.with_tests([strip_assertions(suite.tests[0], suite.modules["test_box.py"].framework)])
    full = instrument_suite(stripped, catalog, ObservationMode.FULL)
    original = instrument_suite(stripped, catalog, ObservationMode.ORIGINAL)
    assert set(original.point_ids) == {"test_x/1/b/b.getSize()#0", "test_x/-1/-/exception#0"}
    assert set(original.point_ids) < set(full.point_ids)


def test_point_ids_depend_only_on_test_side(tmp_path):
    catalog, suite = box_test(tmp_path, "def test_x():\n    b = Box()\n")
    first = instrument_suite(suite, catalog).point_ids
    assert instrument_suite(suite, catalog).point_ids == first


def test_render_value_examples():
    assert render_value(3.5) == "3.5"
    assert render_value(None) == NULL
    assert render_value(float("nan")) == render_value(float("nan")) == "NaN"
    assert render_value(10) == "10"
    assert render_value(True) == "True"
    assert render_value("a\tb\n\x01") == "a\\tb\\n\\x01"
    assert scrub_identity("Obj@1a2b3c4d") == "Obj@ID"

    class Obj:
        def __repr__(self):
            return "Obj@1a2b3c4d"

    assert render_value(Obj()) == "Obj@ID"
    assert render_value(object()) == "<object object at @ID>"


def test_scrub_keeps_plain_numbers():
    assert scrub_identity("total 12345678 items") == "total 12345678 items"
    assert scrub_identity("id deadbeef01") == "id @ID"


@given(st.floats(allow_nan=False))
def test_float_rendering_round_trips(x):
    assert float(render_value(x)) == x or (math.isinf(x) and render_value(x) in ("inf", "-inf"))


@given(st.text())
def test_rendering_is_single_line(text):
    out = render_value(text)
    assert "\n" not in out and "\t" not in out
