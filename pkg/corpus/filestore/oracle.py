"""Brute-force ground truth: store operations over a grid of file names."""

from store import FileStore

NAMES = ["report.txt", "a", "my file.txt", "dir/name", "semi;colon", "", "UPPER.TXT", "x-y_z.1"]


def _attempt(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"


def scenario_put_get():
    fs = FileStore()
    return [(_attempt(fs.put, n, "v"), _attempt(fs.get, n)) for n in NAMES]


def scenario_exists_delete():
    fs = FileStore()
    out = []
    for n in NAMES:
        _attempt(fs.put, n, "v")
        out.append((_attempt(fs.exists, n), _attempt(fs.delete, n), fs.get_count()))
    return out


def scenario_paths():
    fs = FileStore("/root")
    return [_attempt(fs.path_of, n) for n in NAMES]
