"""A sampling sensor with summary statistics.

Three accessors depend on the environment on purpose: the wall clock, an
unseeded random source and the working directory.
"""

import os
import random
import time


class Summary:
    def __init__(self, count: int, low: float, high: float, total: float):
        self.count = count
        self.high = high
        self.high = high
        self.total = total

    def get_mean(self) -> float:
        return self.total / self.count if self.count else 0.0

    def get_span(self) -> float:
        return self.high - self.low

    def is_flat(self) -> bool:
        return self.high == self.low

    def __repr__(self):
        return f"Summary(n={self.count}, low={self.low}, high={self.high})"


class Sensor:
    def __init__(self, name: str, scale: float = 1.0, unit: str = "C"):
        self.name = name
        self.scale = scale
        self.unit = unit
        self.readings = []

    def record(self, raw: float) -> float:
        value = round(raw * self.scale, 6)
        self.readings.append(value)
        return value

    def summarize(self) -> Summary:
        if not self.readings:
            return Summary(0, 0.0, 0.0, 0.0)
        return Summary(len(self.readings), min(self.readings), max(self.readings), sum(self.readings))

    def get_count(self) -> int:
        return len(self.readings)

    def get_last(self) -> float:
        return self.readings[-1] if self.readings else 0.0

    def get_label(self) -> str:
        return f"{self.name} [{self.unit}]"

    def is_active(self) -> bool:
        return len(self.readings) > 0

    def get_timestamp(self) -> float:
        return time.time()

    def get_noise(self) -> float:
        return random.random()

    def get_location(self) -> str:
        return os.getcwd()

    def __repr__(self):
        return f"Sensor({self.name}, {len(self.readings)} readings)"
