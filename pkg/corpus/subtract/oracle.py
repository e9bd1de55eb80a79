"""Brute-force ground truth: every operation over a fixed input grid."""

from arith import Calculator

GRID = [-(2**31), -2000000000, -1, 0, 1, 3, 2000000000, 2**31 - 1]


def _attempt(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"


def scenario_subtract():
    calc = Calculator()
    return [_attempt(calc.subtract, a, b) for a in GRID for b in GRID]


def scenario_negate():
    calc = Calculator()
    return [_attempt(calc.negate, a) for a in GRID]


def scenario_state():
    calc = Calculator("grid")
    for a in GRID:
        _attempt(calc.subtract, a, 1)
    return [calc.get_last(), calc.operations, calc.is_negative(), repr(calc)]


def scenario_fresh():
    calc = Calculator()
    return [_attempt(calc.get_last), _attempt(calc.is_negative), _attempt(repr, calc), calc.operations]
