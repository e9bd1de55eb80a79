"""Bounded LIFO stack."""


class Stack:
    def __init__(self, capacity: int = 100):
        self._items = []
        self.capacity = capacity

    def push(self, item):
        self._items.append(item)

    def pop(self):
        if not self._items:
            raise IndexError("pop from empty stack")
        return self._items.pop()

    def peek(self):
        if not self._items:
            raise IndexError("peek at empty stack")
        return self._items[-1]

    def size(self) -> int:
        return len(self._items)

    def is_empty(self) -> bool:
        return len(self._items) == 0

    def get_top(self):
        return self._items[-1] if self._items else None

    def __repr__(self):
        return f"Stack({self._items!r}, capacity={self.capacity})"
