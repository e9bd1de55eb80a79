"""Brute-force ground truth: map behaviour for growing key sets."""

from bimap import BiMap

SIZES = [0, 1, 5, 12, 13, 25, 100]


def _fill(n):
    m = BiMap()
    for i in range(n):
        m.put(f"k{i}", i)
    return m


def scenario_lookup():
    out = []
    for n in SIZES:
        m = _fill(n)
        out.append([m.size(), m.get("k3"), m.inverse_get(4), m.contains_key("k0"), m.is_empty()])
    return out


def scenario_capacity():
    return [_fill(n).get_capacity() for n in SIZES]


def scenario_conflicts():
    m = BiMap()
    m.put("a", 1)
    try:
        m.put("b", 1)
    except ValueError as exc:
        return str(exc)
    return "accepted"
