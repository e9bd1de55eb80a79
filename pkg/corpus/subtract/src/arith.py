"""32-bit signed integer arithmetic with wrap-around."""

INT_MIN = -(2**31)
INT_MAX = 2**31 - 1


def wrap(value: int) -> int:
    return (value - INT_MIN) % 2**32 + INT_MIN


class Calculator:
    def __init__(self, label: str = "calc"):
        self.label = label
        self.last = 0
        self.operations = 0

    def subtract(self, a: int, b: int) -> int:
        result = wrap(a - b)
        self.last = result
        self.operations += 1
        return result

    def negate(self, a: int) -> int:
        return self.subtract(0, a)

    def get_last(self) -> int:
        return self.last

    def is_negative(self) -> bool:
        return self.last < 0

    def __repr__(self):
        return f"Calculator({self.label}, last={self.last})"
