"""Subprocess entry point: execute a rendered suite against one program.

Invoked by the executor as ``python -m ampdiv._runner``. Every test gets
freshly imported program and test modules and its own working directory, so
one test cannot leak state into another. Exit status 2 means the program does
not compile, 3 means the harness itself failed.
"""

from __future__ import annotations

import argparse
import ast
import importlib
import importlib.abc
import importlib.util
import json
import os
import signal
import sys
import traceback
from pathlib import Path
from types import ModuleType
from typing import Any, Callable, Iterable

from ampdiv import testkit
from ampdiv.program import HIT_FUNCTION, instrument_coverage, parse_program
from ampdiv.test_ir import test_files

EXIT_BUILD = 2
EXIT_HARNESS = 3


class _Timeout(BaseException):
    """Raised by the interval timer; not an ``Exception`` so test guards ignore it."""


class SourceFinder(importlib.abc.MetaPathFinder, importlib.abc.Loader):
    """Serves modules from fixed roots, compiling each file once per process."""

    def __init__(self, roots: list[Path], transform: Callable[[str, str], Any] | None = None) -> None:
        self.roots = roots
        self.transform = transform
        self.hooks: dict[str, Any] = {}
        self._code: dict[str, Any] = {}

    def _locate(self, fullname: str) -> tuple[Path, Path, bool] | None:
        parts = fullname.split(".")
        for root in self.roots:
            base = root.joinpath(*parts)
            if (base / "__init__.py").is_file():
                return root, base / "__init__.py", True
            if base.with_suffix(".py").is_file():
                return root, base.with_suffix(".py"), False
        return None

    def find_spec(self, fullname, path=None, target=None):  # noqa: ANN001
        found = self._locate(fullname)
        if found is None:
            return None
        root, file, package = found
        spec = importlib.util.spec_from_file_location(
            fullname, file, loader=self, submodule_search_locations=[str(file.parent)] if package else None
        )
        spec._ak_root = root  # type: ignore[union-attr]
        return spec

    def create_module(self, spec):  # noqa: ANN001
        return None

    def exec_module(self, module: ModuleType) -> None:
        spec = module.__spec__
        origin = spec.origin
        code = self._code.get(origin)
        if code is None:
            source = Path(origin).read_text(encoding="utf-8")
            rel = Path(origin).relative_to(spec._ak_root).as_posix()
            tree: Any = source
            if self.transform is not None and spec._ak_root == self.roots[0]:
                tree = self.transform(source, rel)
            code = compile(tree, origin, "exec", dont_inherit=True)
            self._code[origin] = code
        module.__dict__.update(self.hooks)
        exec(code, module.__dict__)

    def purge(self) -> None:
        for name in [n for n, m in sys.modules.items() if getattr(getattr(m, "__spec__", None), "loader", None) is self]:
            del sys.modules[name]


def declared_tests(test_root: Path) -> list[tuple[str, str, bool]]:
    """(module name, function name, takes no arguments) in file and definition order."""
    return [(module, name, bare) for module, name, bare, _ in _scan_tests(test_root)]


def _scan_tests(test_root: Path) -> list[tuple[str, str, bool, frozenset[str]]]:
    """As ``declared_tests`` plus the test functions each module refers to by name."""
    out = []
    for file in test_files(test_root):
        module = ".".join(file.relative_to(test_root).with_suffix("").parts)
        tree = ast.parse(file.read_text(encoding="utf-8"))
        found = []
        for node in tree.body:
            if isinstance(node, ast.FunctionDef) and node.name.startswith("test"):
                args = node.args
                bare = not (args.posonlyargs or args.args or args.vararg or args.kwonlyargs or args.kwarg)
                found.append((node.name, bare))
        names = {name for name, _ in found}
        referenced = frozenset(n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id in names)
        out.extend((module, name, bare, referenced) for name, bare in found)
    return out


class _Counter:
    def __init__(self) -> None:
        self.calls = 0

    def wrap(self, module: ModuleType, names: Iterable[str]) -> None:
        for name in names:
            value = module.__dict__.get(name)
            if callable(value) and getattr(value, "__module__", None) == module.__name__:
                module.__dict__[name] = self._counting(value)

    def _counting(self, fn: Callable[..., Any]) -> Callable[..., Any]:
        def call(*args: Any, **kwargs: Any) -> Any:
            self.calls += 1
            return fn(*args, **kwargs)

        return call


def _on_alarm(signum, frame):  # noqa: ANN001
    raise _Timeout()


def run_once(
    finder: SourceFinder, tests: list[tuple[str, str, bool, frozenset[str]]], work: Path, timeout: float
) -> dict:
    """Run every argument-free test once. Returns per-test outcomes and records.

    Each test starts in an empty working directory; a directory the previous
    test left empty is reused.
    """
    results = []
    wd: Path | None = None
    for number, (module_name, name, bare, referenced) in enumerate(tests):
        if not bare:
            continue
        finder.purge()
        testkit.recorder.reset()
        counter = _Counter()
        if wd is None or any(wd.iterdir()):
            wd = work / f"{number:05d}"
            wd.mkdir(parents=True, exist_ok=True)
        os.chdir(wd)
        status, error = "passed", ""
        try:
            module = importlib.import_module(module_name)
            counter.wrap(module, referenced | {name})
            fn = getattr(module, name)
        except BaseException as exc:  # noqa: BLE001
            status, error = "unbuildable", testkit.render_exception(exc)
        else:
            signal.setitimer(signal.ITIMER_REAL, timeout)
            try:
                fn()
            except _Timeout:
                status, error = "timeout", f"exceeded {timeout}s"
            except BaseException as exc:  # noqa: BLE001
                status, error = "failed", testkit.render_exception(exc)
            finally:
                signal.setitimer(signal.ITIMER_REAL, 0)
        results.append(
            {
                "test": name,
                "status": status,
                "error": error,
                "calls": counter.calls,
                "raised_early": testkit.recorder.raised_before_first_record,
                "records": list(testkit.recorder.records),
            }
        )
    os.chdir(work)
    return {"tests": results}


def run_scenarios(finder: SourceFinder, oracle: Path, work: Path, timeout: float) -> dict[str, str]:
    """Call every ``scenario_*`` function of an oracle module, rendering results."""
    tree = ast.parse(oracle.read_text(encoding="utf-8"))
    names = [n.name for n in tree.body if isinstance(n, ast.FunctionDef) and n.name.startswith("scenario_")]
    outputs = {}
    for number, name in enumerate(names):
        finder.purge()
        wd = work / f"o{number:05d}"
        wd.mkdir(parents=True, exist_ok=True)
        os.chdir(wd)
        namespace: dict[str, Any] = {"__name__": "_ak_oracle"}
        signal.setitimer(signal.ITIMER_REAL, timeout)
        try:
            exec(compile(oracle.read_text(encoding="utf-8"), str(oracle), "exec"), namespace)
            outputs[name] = testkit.render_value(namespace[name]())
        except _Timeout:
            outputs[name] = "!timeout"
        except Exception as exc:  # noqa: BLE001
            outputs[name] = "!" + testkit.render_exception(exc)
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0)
    os.chdir(work)
    return outputs


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ampdiv._runner")
    parser.add_argument("--program", type=Path, required=True)
    parser.add_argument("--tests", type=Path)
    parser.add_argument("--oracle", type=Path)
    parser.add_argument("--mode", choices=["trace", "coverage", "oracle"], default="trace")
    parser.add_argument("--work", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--repeat", type=int, default=1)
    parser.add_argument("--timeout", type=float, default=10.0)
    args = parser.parse_args(argv)

    sys.dont_write_bytecode = True
    try:
        parse_program(args.program)
    except Exception as exc:  # noqa: BLE001
        print(exc, file=sys.stderr)
        return EXIT_BUILD
    try:
        signal.signal(signal.SIGALRM, _on_alarm)
        roots = [args.program.resolve()] + ([args.tests.resolve()] if args.tests else [])
        hits: set[str] = set()
        transform = instrument_coverage if args.mode == "coverage" else None
        finder = SourceFinder(roots, transform)
        finder.hooks[HIT_FUNCTION] = hits.add
        sys.meta_path.insert(0, finder)
        work = args.work.resolve()
        work.mkdir(parents=True, exist_ok=True)
        if args.mode == "oracle":
            payload: dict[str, Any] = {"outputs": run_scenarios(finder, args.oracle.resolve(), work, args.timeout)}
        else:
            tests = _scan_tests(args.tests.resolve())
            runs = [run_once(finder, tests, work / f"r{k}", args.timeout) for k in range(args.repeat)]
            payload = {"declared": [t[1] for t in tests], "runs": runs}
            if args.mode == "coverage":
                payload["covered"] = sorted(hits)
        args.out.write_text(json.dumps(payload), encoding="utf-8")
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_HARNESS
    return 0


if __name__ == "__main__":
    sys.exit(main())
