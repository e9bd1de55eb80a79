"""In-memory file store keyed by sanitized file names."""

import re

_UNSAFE = re.compile(r"[^A-Za-z0-9_.-]")


def sanitize(name: str) -> str:
    if not name or _UNSAFE.search(name):
        raise ValueError(f"invalid file name: {name!r}")
    return name


class FileStore:
    def __init__(self, root: str = "data"):
        self.root = root
        self._files = {}

    def put(self, name: str, content: str) -> str:
        key = sanitize(name)
        self._files[key] = content
        return key

    def get(self, name: str):
        return self._files.get(sanitize(name))

    def exists(self, name: str) -> bool:
        return sanitize(name) in self._files

    def delete(self, name: str) -> bool:
        return self._files.pop(sanitize(name), None) is not None

    def get_count(self) -> int:
        return len(self._files)

    def get_names(self) -> list:
        return sorted(self._files)

    def path_of(self, name: str) -> str:
        return self.root + "/" + sanitize(name)
