"""Brute-force ground truth: push/pop sequences up to and past capacity."""

from stack import Stack


def _attempt(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"


def scenario_sequences():
    out = []
    for capacity in (0, 1, 2, 5):
        s = Stack(capacity)
        trace = [_attempt(s.push, i) for i in range(capacity + 2)]
        trace += [_attempt(s.peek), repr(s)]
        trace += [_attempt(s.pop) for _ in range(capacity + 2)]
        trace += [s.size(), s.is_empty(), s.get_top(), s.capacity]
        out.append(trace)
    return out


def scenario_interleaved():
    s = Stack(3)
    return [_attempt(s.push, "a"), _attempt(s.pop), _attempt(s.pop), _attempt(s.push, None),
            s.get_top(), s.size(), repr(s)]
