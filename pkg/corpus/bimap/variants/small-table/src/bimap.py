"""Bidirectional map over hashable keys and values."""

DEFAULT_CAPACITY = 8
LOAD_FACTOR = 0.75


class BiMap:
    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        self._forward = {}
        self._backward = {}
        self._capacity = capacity

    def put(self, key, value):
        if value in self._backward and self._backward[value] != key:
            raise ValueError(f"value already bound: {value!r}")
        old = self._forward.get(key)
        if old is not None:
            del self._backward[old]
        self._forward[key] = value
        self._backward[value] = key
        self._grow()
        return old

    def _grow(self):
        while len(self._forward) > self._capacity * LOAD_FACTOR:
            self._capacity *= 2

    def get(self, key):
        return self._forward.get(key)

    def inverse_get(self, value):
        return self._backward.get(value)

    def remove(self, key):
        value = self._forward.pop(key, None)
        if value is not None:
            del self._backward[value]
        return value

    def contains_key(self, key) -> bool:
        return key in self._forward

    def size(self) -> int:
        return len(self._forward)

    def is_empty(self) -> bool:
        return not self._forward

    def get_capacity(self) -> int:
        return self._capacity
