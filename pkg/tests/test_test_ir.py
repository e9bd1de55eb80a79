from __future__ import annotations

import itertools

import pytest

from ampdiv.errors import ParseError, UnsupportedConstruct
from ampdiv.test_ir import (
    LiteralKind,
    StatementKind,
    TestSuite,
    is_assertion,
    parse_module,
    parse_tests,
    render_tests,
)
from conftest import CORPUS, write_fixture

TWO_TESTS = """
from ampdiv.testkit import assert_equal
from thing import Thing

def test_one():
    t = Thing()
    t.grow(2)
    assert_equal(2, t.size)

def test_two():
    t = Thing()
    t.rename("x")
    assert_equal("x", t.name)
"""


def strip_meta(suite: TestSuite) -> list:
    return [(t.name, t.origin, t.signature, t.statements) for t in suite.tests]


def test_two_functions_three_statements(tmp_path):
    write_fixture(tmp_path, {}, {"test_thing.py": TWO_TESTS})
    suite = parse_tests(tmp_path)
    assert [t.name for t in suite.tests] == ["test_one", "test_two"]
    assert sum(1 for t in suite.tests for _ in t.walk()) == 6
    assert suite.source_origin == {"test_one": "test_thing.py", "test_two": "test_thing.py"}


def test_assertion_with_method_call_argument():
    _, (test,) = parse_module(
        "from ampdiv.testkit import assert_false\n"
        "def test_x():\n    assert_false(get_map().contains_key(k))\n",
        "test_x.py",
    )
    (stmt,) = test.statements
    assert stmt.kind is StatementKind.ASSERTION
    assert stmt.callee == "assert_false"
    assert stmt.args == ("get_map().contains_key(k)",)


def test_empty_corpus(tmp_path):
    assert parse_tests(tmp_path).tests == ()
    assert parse_tests(tmp_path / "missing").tests == ()


@pytest.mark.parametrize(
    ("name", "framework", "expected"),
    [
        (name, framework, framework and kind != "other")
        for (kind, name), framework in itertools.product(
            [("assert", "assertEquals"), ("assert", "assert_true"), ("assert", "ASSERT_SAME"),
             ("fail", "fail"), ("fail", "failUnless"), ("fail", "should_fail_now"),
             ("other", "compute"), ("other", "check_equal"), ("other", "raises")],
            [True, False],
        )
    ],
)
def test_assertion_predicate_table(name, framework, expected):
    assert is_assertion(name, framework) is expected


def test_user_defined_assert_helper_is_not_an_assertion():
    _, (test,) = parse_module(
        "def assert_close(a, b):\n    pass\n\ndef test_x():\n    assert_close(1, 2)\n", "test_x.py"
    )
    assert test.statements[0].kind is StatementKind.SIMPLE


def test_module_attribute_assertions_are_recognised():
    _, (test,) = parse_module(
        "import ampdiv.testkit as tk\ndef test_x():\n    tk.assert_equal(1, f())\n", "test_x.py"
    )
    assert test.statements[0].kind is StatementKind.ASSERTION


def test_literal_slots_are_typed_and_unique():
    _, (test,) = parse_module('def test_x():\n    f("a", 1, 2.5, True, -3)\n', "test_x.py")
    slots = test.literal_slots
    assert [s.kind for s in slots] == [LiteralKind.STRING, LiteralKind.INTEGER, LiteralKind.FLOAT,
                                       LiteralKind.BOOLEAN, LiteralKind.INTEGER]
    assert [s.value for s in slots] == ["a", 1, 2.5, True, -3]
    assert len({s.slot_id for s in slots}) == len(slots)


def test_ordinals_are_preorder():
    _, (test,) = parse_module(
        "def test_x():\n    a = 1\n    for i in range(3):\n        a += i\n        if a:\n            b = a\n    c = a\n",
        "test_x.py",
    )
    walked = list(test.walk())
    assert [s.ordinal for s in walked] == list(range(len(walked)))
    loop = test.statements[1]
    assert loop.kind is StatementKind.COMPOUND
    assert all(loop.ordinal < child.ordinal for child in loop.walk() if child is not loop)


def test_parse_error_reports_file():
    with pytest.raises(ParseError, match="test_bad.py"):
        parse_module("def test_x(:\n    pass\n", "test_bad.py")


@pytest.mark.parametrize(
    "body",
    ["    def inner():\n        pass\n", "    for i in x:\n        pass\n    else:\n        pass\n",
     "    class Local:\n        pass\n"],
)
def test_unsupported_construct(body):
    with pytest.raises(UnsupportedConstruct):
        parse_module("def test_x():\n" + body, "test_x.py")


def test_test_classes_are_rejected():
    with pytest.raises(UnsupportedConstruct, match="test class"):
        parse_module("class TestThing:\n    def test_x(self):\n        pass\n", "test_x.py")


@pytest.mark.parametrize("fixture", sorted(p.name for p in CORPUS.iterdir() if (p / "tests").is_dir()))
def test_round_trip_on_corpus(fixture, tmp_path):
    suite = parse_tests(CORPUS / fixture)
    render_tests(suite, tmp_path)
    assert strip_meta(parse_tests(tmp_path)) == strip_meta(suite)


def test_round_trip_is_stable_twice(tmp_path):
    write_fixture(tmp_path / "a", {}, {"test_thing.py": TWO_TESTS})
    first = parse_tests(tmp_path / "a")
    render_tests(first, tmp_path / "b")
    render_tests(parse_tests(tmp_path / "b"), tmp_path / "c")
    assert (tmp_path / "b" / "test_thing.py").read_text() == (tmp_path / "c" / "test_thing.py").read_text()


def test_empty_suite_renders_nothing(tmp_path):
    assert render_tests(TestSuite(), tmp_path) == []
    assert list(tmp_path.iterdir()) == []


def test_duplicate_test_names_rejected():
    _, (test,) = parse_module("def test_x():\n    pass\n", "test_x.py")
    with pytest.raises(ValueError):
        TestSuite((test, test))
