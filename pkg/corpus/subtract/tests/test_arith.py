from ampdiv.testkit import assert_equal, assert_false, assert_true
from arith import Calculator


def test_subtract_small():
    calc = Calculator("small")
    assert_equal(7, calc.subtract(10, 3))
    assert_false(calc.is_negative())


def test_subtract_negative_result():
    calc = Calculator("neg")
    result = calc.subtract(-5, 5)
    assert_equal(-10, result)
    assert_true(calc.is_negative())


def test_subtract_large():
    calc = Calculator("large")
    assert_equal(2100000000, calc.subtract(2000000000, -100000000))
    assert_equal(1, calc.operations)


def test_negate():
    calc = Calculator()
    assert_equal(-42, calc.negate(42))
    assert_equal(-42, calc.get_last())
