"""Observation-space amplification.

Builds a catalog of state-reading accessors from the program under test,
discovers observation points for the objects a test manipulates, and injects
logging calls into the test body.
"""

from __future__ import annotations

import ast
import dataclasses
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from ampdiv.errors import InstrumentationError, ParseError
from ampdiv.test_ir import (
    OBSERVER_ALIAS,
    ROLE_HOISTED,
    Statement,
    StatementKind,
    TestCase,
    TestSuite,
    render_tests,
)
from ampdiv.testkit import render_value, scrub_identity  # noqa: F401  (re-exported)

ROLE_PROBE = "probe"


class PointSource(str, Enum):
    GETTER = "getter"
    PUBLIC_FIELD = "public_field"
    DEBUG_RENDER = "debug_render"
    ORIGINAL_ASSERTION_CALL = "original_assertion_call"
    EXCEPTION_MESSAGE = "exception_message"


class ObservationMode(str, Enum):
    FULL = "full"
    ORIGINAL = "original"
    """Only calls that used to sit inside assertions (plus escaping exceptions)."""


ORIGINAL_SOURCES = frozenset({PointSource.ORIGINAL_ASSERTION_CALL, PointSource.EXCEPTION_MESSAGE})


# -- accessor catalog --------------------------------------------------------


@dataclass(frozen=True)
class Accessor:
    name: str
    source: PointSource
    call: bool = True

    @property
    def path(self) -> str:
        return f"{self.name}()" if self.call else self.name

    def expression(self, receiver: str) -> str:
        return f"{receiver}.{self.path}"


@dataclass(frozen=True)
class TypeInfo:
    name: str
    getters: tuple[Accessor, ...] = ()
    fields: tuple[Accessor, ...] = ()
    custom_render: bool = False
    returns: Mapping[str, str] = field(default_factory=dict)
    bases: tuple[str, ...] = ()


@dataclass(frozen=True)
class AccessorCatalog:
    types: Mapping[str, TypeInfo] = field(default_factory=dict)
    functions: Mapping[str, str] = field(default_factory=dict)
    """Module-level function name -> declared return type (catalog types only)."""


def _prefixed(name: str, prefix: str) -> bool:
    rest = name[len(prefix) :]
    return name.startswith(prefix) and (rest == "" or rest[0] == "_" or rest[0].isupper())


def _own_returns(fn: ast.FunctionDef) -> Iterator[ast.Return]:
    stack: list[ast.AST] = list(fn.body)
    while stack:
        node = stack.pop()
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda, ast.ClassDef)):
            continue
        if isinstance(node, ast.Return):
            yield node
        stack.extend(ast.iter_child_nodes(node))


def _annotation_name(node: ast.expr | None) -> str | None:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    if isinstance(node, ast.Constant):
        if node.value is None:
            return "None"
        if isinstance(node.value, str):
            return node.value.rsplit(".", 1)[-1]
    return None


def _booleanish(node: ast.expr | None) -> bool:
    if node is None:
        return False
    if isinstance(node, ast.Constant):
        return isinstance(node.value, bool)
    if isinstance(node, (ast.Compare,)):
        return True
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
        return True
    if isinstance(node, ast.BoolOp):
        return all(_booleanish(v) for v in node.values)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        return node.func.id in ("bool", "isinstance", "issubclass", "callable", "hasattr")
    return False


def _no_arguments(fn: ast.FunctionDef) -> bool:
    args = fn.args
    return (
        len(args.posonlyargs) + len(args.args) == 1
        and args.vararg is None
        and args.kwarg is None
        and not args.kwonlyargs
    )


def _decorator_names(fn: ast.FunctionDef | ast.ClassDef) -> set[str]:
    names = set()
    for dec in fn.decorator_list:
        target = dec.func if isinstance(dec, ast.Call) else dec
        name = _annotation_name(target)
        if name:
            names.add(name)
    return names


def is_getter(fn: ast.FunctionDef) -> bool:
    """``get*`` with no parameters and a value, or ``is*`` returning a boolean."""
    if _decorator_names(fn) & {"staticmethod", "classmethod", "property", "cached_property"}:
        return False
    if not _no_arguments(fn):
        return False
    returns = _annotation_name(fn.returns)
    if _prefixed(fn.name, "get"):
        if fn.returns is not None:
            return returns != "None"
        return any(r.value is not None and not (isinstance(r.value, ast.Constant) and r.value.value is None)
                   for r in _own_returns(fn))
    if _prefixed(fn.name, "is"):
        if fn.returns is not None:
            return returns == "bool"
        values = [r.value for r in _own_returns(fn)]
        return bool(values) and all(_booleanish(v) for v in values)
    return False


def _is_property(fn: ast.FunctionDef) -> bool:
    return bool(_decorator_names(fn) & {"property", "cached_property"}) and _no_arguments(fn)


def _self_fields(fn: ast.FunctionDef) -> Iterator[str]:
    for node in ast.walk(fn):
        targets: list[ast.expr] = []
        if isinstance(node, ast.Assign):
            targets = node.targets
        elif isinstance(node, (ast.AnnAssign, ast.AugAssign)):
            targets = [node.target]
        for target in targets:
            for sub in ast.walk(target):
                if (
                    isinstance(sub, ast.Attribute)
                    and isinstance(sub.value, ast.Name)
                    and sub.value.id == "self"
                    and isinstance(sub.ctx, ast.Store)
                ):
                    yield sub.attr


def _class_info(cls: ast.ClassDef) -> TypeInfo:
    getters: list[Accessor] = []
    fields: list[str] = []
    returns: dict[str, str] = {}
    methods: set[str] = set()
    custom = bool({"dataclass"} & _decorator_names(cls))
    for node in cls.body:
        if isinstance(node, ast.FunctionDef):
            methods.add(node.name)
            if node.name in ("__repr__", "__str__"):
                custom = True
            rtype = _annotation_name(node.returns)
            if rtype:
                returns[node.name] = rtype
            if _is_property(node):
                getters.append(Accessor(node.name, PointSource.GETTER, call=False))
            elif is_getter(node):
                getters.append(Accessor(node.name, PointSource.GETTER))
            if node.name in ("__init__", "__post_init__"):
                fields.extend(_self_fields(node))
        elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name):
            if _annotation_name(node.annotation) != "ClassVar":
                fields.append(node.target.id)
    public = [f for f in dict.fromkeys(fields) if not f.startswith("_") and f not in methods]
    return TypeInfo(
        name=cls.name,
        getters=tuple(getters),
        fields=tuple(Accessor(f, PointSource.PUBLIC_FIELD, call=False) for f in public),
        custom_render=custom,
        returns=returns,
        bases=tuple(b for b in (_annotation_name(x) for x in cls.bases) if b),
    )


def _merge_bases(types: dict[str, TypeInfo]) -> dict[str, TypeInfo]:
    merged: dict[str, TypeInfo] = {}

    def resolve(name: str, trail: tuple[str, ...] = ()) -> TypeInfo:
        if name in merged:
            return merged[name]
        info = types[name]
        getters = {a.name: a for a in info.getters}
        fields = {a.name: a for a in info.fields}
        custom = info.custom_render
        returns = dict(info.returns)
        for base in info.bases:
            if base in types and base not in trail:
                parent = resolve(base, trail + (name,))
                for a in parent.getters:
                    getters.setdefault(a.name, a)
                for a in parent.fields:
                    if a.name not in getters:
                        fields.setdefault(a.name, a)
                custom = custom or parent.custom_render
                for k, v in parent.returns.items():
                    returns.setdefault(k, v)
        merged[name] = dataclasses.replace(
            info,
            getters=tuple(getters.values()),
            fields=tuple(fields.values()),
            custom_render=custom,
            returns=returns,
        )
        return merged[name]

    for name in types:
        resolve(name)
    return merged


def build_catalog(program_src: str | Path) -> AccessorCatalog:
    """Static scan of the program's public classes and functions."""
    types: dict[str, TypeInfo] = {}
    functions: dict[str, str] = {}
    root = Path(program_src)
    for file in sorted(root.rglob("*.py")):
        if "__pycache__" in file.parts:
            continue
        try:
            tree = ast.parse(file.read_text(encoding="utf-8"), filename=str(file))
        except SyntaxError as exc:
            raise ParseError(str(file), f"{exc.lineno}:{exc.offset}", exc.msg) from exc
        for node in tree.body:
            if isinstance(node, ast.ClassDef) and not node.name.startswith("_"):
                types[node.name] = _class_info(node)
            elif isinstance(node, ast.FunctionDef) and not node.name.startswith("_"):
                rtype = _annotation_name(node.returns)
                if rtype:
                    functions[node.name] = rtype
    types = _merge_bases(types)
    functions = {k: v for k, v in functions.items() if v in types}
    return AccessorCatalog(types, functions)


# -- points --------------------------------------------------------------


@dataclass(frozen=True)
class ObservationPoint:
    test: str
    anchor: int
    receiver: str
    path: str
    occurrence: int
    source: PointSource
    expression: str = ""

    @property
    def point_id(self) -> str:
        return f"{self.test}/{self.anchor}/{self.receiver}/{self.path}#{self.occurrence}"


def exception_point(test_name: str) -> ObservationPoint:
    return ObservationPoint(test_name, -1, "-", "exception", 0, PointSource.EXCEPTION_MESSAGE)


def _infer_call_type(call: ast.expr, catalog: AccessorCatalog, known: Mapping[str, str]) -> str | None:
    if not isinstance(call, ast.Call):
        return None
    func = call.func
    if isinstance(func, ast.Name):
        if func.id in catalog.types:
            return func.id
        return catalog.functions.get(func.id)
    if isinstance(func, ast.Attribute):
        if isinstance(func.value, ast.Name) and func.value.id in known:
            owner = catalog.types.get(known[func.value.id])
            result = owner.returns.get(func.attr) if owner else None
            return result if result in catalog.types else None
        if func.attr in catalog.types:
            return func.attr
        return catalog.functions.get(func.attr)
    return None


def local_objects(test: TestCase, catalog: AccessorCatalog) -> dict[str, str]:
    """Map each local variable holding a catalog-typed object to its type name."""
    known: dict[str, str] = {}
    if test.signature:
        args = ast.parse(f"def _({test.signature}): pass").body[0].args  # type: ignore[attr-defined]
        for arg in args.posonlyargs + args.args + args.kwonlyargs:
            name = _annotation_name(arg.annotation)
            if name in catalog.types:
                known[arg.arg] = name  # type: ignore[assignment]
    for stmt in test.walk():
        if stmt.kind is StatementKind.COMPOUND:
            node = ast.parse(stmt.code + "\n    pass").body[0]
            if isinstance(node, ast.With):
                for item in node.items:
                    if isinstance(item.optional_vars, ast.Name):
                        inferred = _infer_call_type(item.context_expr, catalog, known)
                        if inferred:
                            known[item.optional_vars.id] = inferred
            continue
        node = ast.parse(stmt.code).body[0]
        if isinstance(node, ast.Assign):
            inferred = _infer_call_type(node.value, catalog, known)
            for target in node.targets:
                if isinstance(target, ast.Name) and inferred:
                    known[target.id] = inferred
        elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name):
            inferred = _annotation_name(node.annotation)
            if inferred not in catalog.types and node.value is not None:
                inferred = _infer_call_type(node.value, catalog, known)
            if inferred in catalog.types:
                known[node.target.id] = inferred  # type: ignore[assignment]
    return known


def _touched_names(stmt: Statement) -> set[str]:
    """Objects a loop body may mutate: call receivers and assignment targets."""
    touched: set[str] = set()
    for inner in stmt.walk():
        code = inner.code + ("\n    pass" if inner.kind is StatementKind.COMPOUND else "")
        for node in ast.walk(ast.parse(code)):
            if isinstance(node, ast.Call) and isinstance(node.func, ast.Attribute):
                if isinstance(node.func.value, ast.Name):
                    touched.add(node.func.value.id)
            elif isinstance(node, (ast.Attribute, ast.Subscript)) and isinstance(node.ctx, ast.Store):
                if isinstance(node.value, ast.Name):
                    touched.add(node.value.id)
            elif isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
                touched.add(node.id)
    return touched


def _object_points(
    test: TestCase, anchor: int, receiver: str, info: TypeInfo
) -> list[tuple[str, PointSource, str]]:
    points = [(a.path, a.source, a.expression(receiver)) for a in info.getters + info.fields]
    if info.custom_render:
        points.append(("__str__()", PointSource.DEBUG_RENDER, f"str({receiver})"))
    return sorted(points)


def _is_loop(stmt: Statement) -> bool:
    return stmt.kind is StatementKind.COMPOUND and stmt.code.startswith(("for ", "while "))


def _call_receiver(code: str) -> str:
    expr = ast.parse(code, mode="eval").body
    if isinstance(expr, ast.Call) and isinstance(expr.func, ast.Attribute):
        root = expr.func.value
        while isinstance(root, (ast.Attribute, ast.Call, ast.Subscript)):
            root = root.func if isinstance(root, ast.Call) else root.value
        if isinstance(root, ast.Name):
            return root.id
    return "-"


def discover_points(test: TestCase, catalog: AccessorCatalog) -> list[ObservationPoint]:
    """Accessor and hoisted-call points of one assertion-stripped test.

    The exception point every instrumented test carries is not included; see
    :func:`exception_point`.
    """
    if not test.statements:
        return []
    objects = local_objects(test, catalog)
    raw: list[tuple[int, str, str, PointSource, str]] = []
    for stmt in test.walk():
        if stmt.role == ROLE_HOISTED:
            raw.append((stmt.ordinal, _call_receiver(stmt.code), stmt.code, PointSource.ORIGINAL_ASSERTION_CALL,
                        stmt.code))
        if _is_loop(stmt):
            body = [c for c in stmt.children if c.branch == 0]
            if body:
                anchor = body[-1].ordinal
                for name in sorted(_touched_names(stmt) & objects.keys()):
                    for path, source, expr in _object_points(test, anchor, name, catalog.types[objects[name]]):
                        raw.append((anchor, name, path, source, expr))
    end_anchor = test.statements[-1].ordinal
    for name in sorted(objects):
        for path, source, expr in _object_points(test, end_anchor, name, catalog.types[objects[name]]):
            raw.append((end_anchor, name, path, source, expr))
    seen: Counter[tuple[int, str, str]] = Counter()
    points: list[ObservationPoint] = []
    for anchor, receiver, path, source, expr in raw:
        key = (anchor, receiver, path)
        points.append(ObservationPoint(test.name, anchor, receiver, path, seen[key], source, expr))
        seen[key] += 1
    return points


# -- instrumentation ---------------------------------------------------------


def _probe(point: ObservationPoint) -> Statement:
    scrub = ", scrub=True" if point.source is PointSource.DEBUG_RENDER else ""
    code = f"{OBSERVER_ALIAS}.probe({point.point_id!r}, lambda: {point.expression}{scrub})"
    return Statement(ordinal=-1, kind=StatementKind.SIMPLE, code=code, role=ROLE_PROBE)


def instrument(test: TestCase, points: Iterable[ObservationPoint]) -> TestCase:
    """Inject logging for ``points`` and guard the body against escaping exceptions.

    Idempotent: an instrumented test is returned as is.
    """
    if test.guard is not None or any(s.role == ROLE_PROBE for s in test.walk()):
        return test
    points = list(points)
    ordinals = {s.ordinal: s for s in test.walk()}
    assigned = _assigned_names(test)
    hoisted: dict[int, ObservationPoint] = {}
    after: dict[int, list[ObservationPoint]] = {}
    guard = exception_point(test.name).point_id
    for point in points:
        if point.source is PointSource.EXCEPTION_MESSAGE:
            continue
        if point.anchor not in ordinals:
            raise InstrumentationError(f"{point.point_id}: anchor statement {point.anchor} not in {test.name}")
        if point.source is PointSource.ORIGINAL_ASSERTION_CALL:
            hoisted[point.anchor] = point
            continue
        if point.receiver not in assigned:
            raise InstrumentationError(f"{point.point_id}: {point.receiver!r} is not visible in {test.name}")
        after.setdefault(point.anchor, []).append(point)

    def rewrite(statements: tuple[Statement, ...]) -> tuple[Statement, ...]:
        out: list[Statement] = []
        for stmt in statements:
            if stmt.ordinal in hoisted:
                point = hoisted[stmt.ordinal]
                stmt = dataclasses.replace(stmt, code=f"{OBSERVER_ALIAS}.observe({point.point_id!r}, {stmt.code})")
            if stmt.children:
                stmt = dataclasses.replace(stmt, children=rewrite(stmt.children))
            out.append(stmt)
            for point in sorted(after.get(stmt.ordinal, ()), key=lambda p: (p.receiver, p.path, p.occurrence)):
                out.append(dataclasses.replace(_probe(point), branch=stmt.branch))
        return tuple(out)

    return dataclasses.replace(test, statements=rewrite(test.statements), guard=guard)


def _assigned_names(test: TestCase) -> set[str]:
    names: set[str] = set()
    if test.signature:
        args = ast.parse(f"def _({test.signature}): pass").body[0].args  # type: ignore[attr-defined]
        names.update(a.arg for a in args.posonlyargs + args.args + args.kwonlyargs)
    for stmt in test.walk():
        code = stmt.code + ("\n    pass" if stmt.kind is StatementKind.COMPOUND else "")
        for node in ast.walk(ast.parse(code)):
            if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
                names.add(node.id)
    return names


@dataclass(frozen=True)
class InstrumentedSuite:
    suite: TestSuite
    points: Mapping[str, tuple[ObservationPoint, ...]]
    mode: ObservationMode

    @property
    def point_ids(self) -> list[str]:
        return [p.point_id for pts in self.points.values() for p in pts]


def instrument_suite(
    suite: TestSuite, catalog: AccessorCatalog, mode: ObservationMode = ObservationMode.FULL
) -> InstrumentedSuite:
    tests: list[TestCase] = []
    points: dict[str, tuple[ObservationPoint, ...]] = {}
    for test in suite.tests:
        found = discover_points(test, catalog) + [exception_point(test.name)]
        if mode is ObservationMode.ORIGINAL:
            found = [p for p in found if p.source in ORIGINAL_SOURCES]
        points[test.name] = tuple(found)
        tests.append(instrument(test, found))
    return InstrumentedSuite(suite.with_tests(tests), points, mode)


SUITE_MANIFEST = "suite.json"


def suite_digest(root: str | Path) -> str:
    root = Path(root)
    digest = hashlib.sha256()
    for file in sorted(root.rglob("*.py")):
        if "__pycache__" in file.parts:
            continue
        digest.update(file.relative_to(root).as_posix().encode() + b"\0")
        digest.update(file.read_bytes() + b"\0")
    return digest.hexdigest()


def render_instrumented(isuite: InstrumentedSuite, out_root: str | Path) -> Path:
    """Render the suite and a ``suite.json`` manifest of its declared points."""
    out = Path(out_root)
    out.mkdir(parents=True, exist_ok=True)
    render_tests(isuite.suite, out)
    manifest = {
        "digest": suite_digest(out),
        "mode": isuite.mode.value,
        "tests": [t.name for t in isuite.suite.tests],
        "points": {
            p.point_id: {"test": p.test, "source": p.source.value, "anchor": p.anchor, "receiver": p.receiver,
                         "path": p.path}
            for pts in isuite.points.values()
            for p in pts
        },
    }
    (out / SUITE_MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return out
