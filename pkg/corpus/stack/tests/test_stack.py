from ampdiv.testkit import assert_equal, assert_is_none, assert_true
from stack import Stack


def test_push_pop():
    s = Stack()
    s.push(3)
    s.push(7)
    assert_equal(7, s.pop())
    assert_equal(1, s.size())


def test_pop_single():
    s = Stack()
    s.push(5)
    assert_equal(5, s.pop())
    assert_true(s.is_empty())


def test_peek():
    s = Stack()
    s.push("a")
    s.push("b")
    assert_equal("b", s.peek())


def test_capacity():
    s = Stack(2)
    s.push(1)
    s.push(2)
    assert_equal(2, s.size())


def test_empty():
    s = Stack()
    assert_true(s.is_empty())
    assert_is_none(s.get_top())


def test_fill_in_loop():
    s = Stack()
    for i in range(0, 4):
        s.push(i)
    assert_equal(4, s.size())


def test_top_string():
    s = Stack()
    s.push("x")
    assert_equal("x", s.get_top())
