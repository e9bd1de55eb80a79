"""Brute-force ground truth: deterministic readings only."""

from sensor import Sensor

RAW = [-40.0, -0.5, 0.0, 0.1, 1.0, 21.5, 100.0]


def scenario_scaling():
    out = []
    for scale in (0.5, 1.0, 2.0, -1.0):
        s = Sensor("grid", scale)
        out.append([s.record(r) for r in RAW])
    return out


def scenario_summary():
    s = Sensor("grid", 1.0, "K")
    empty = s.summarize()
    for r in RAW:
        s.record(r)
    full = s.summarize()
    return [repr(empty), empty.get_mean(), repr(full), full.get_mean(), full.get_span(), full.is_flat(),
            s.get_count(), s.get_last(), s.get_label(), s.is_active(), repr(s)]
