"""Sosie synthesis by statement-level add, delete and replace.

Transplants are statements taken from the same program. Their local variables
are rebound to names in scope at the transplantation point whose declared or
inferred type has exactly the same name. A candidate is kept only if the
modified statement is executed by the original tests and every original test
still passes on the patched program.
"""

from __future__ import annotations

import ast
import copy
import hashlib
import itertools
import json
import random
import shutil
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping

from ampdiv.errors import BuildError, ConfigError
from ampdiv.executor import DEFAULT_TIMEOUT, coverage_run, parallel_map, run_oracle
from ampdiv.program import Site, parse_program, sites, statement_lists

VARIANT_MANIFEST = "variant.json"
GROUND_TRUTH = "ground_truth.json"
ORACLE_FILE = "oracle.py"

_TERMINATORS = (ast.Return, ast.Raise, ast.Break, ast.Continue)
_EXCLUDED = (
    ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef, ast.Global, ast.Nonlocal, ast.Import, ast.ImportFrom,
)
_CONSTRUCTOR_TYPES = {"int", "float", "str", "bool", "list", "dict", "set", "tuple", "bytes"}
_CALL_RESULT_TYPES = {"len": "int", "abs": None, "repr": "str", "sorted": "list"}


class SteroidKind(str, Enum):
    ADD = "ADD"
    DELETE = "DELETE"
    REPLACE = "REPLACE"


# -- scopes and types --------------------------------------------------------


def _type_name(annotation: ast.expr | None) -> str | None:
    if isinstance(annotation, ast.Name):
        return annotation.id
    if isinstance(annotation, ast.Attribute):
        return annotation.attr
    if isinstance(annotation, ast.Constant) and isinstance(annotation.value, str):
        return annotation.value
    if isinstance(annotation, ast.Subscript):
        return _type_name(annotation.value)
    return None


def infer_type(value: ast.expr, env: Mapping[str, str], classes: set[str]) -> str | None:
    """Declared-type name of an expression, for the few shapes that are obvious."""
    if isinstance(value, ast.Constant):
        return None if value.value is None else type(value.value).__name__
    if isinstance(value, ast.JoinedStr):
        return "str"
    if isinstance(value, (ast.List, ast.ListComp)):
        return "list"
    if isinstance(value, (ast.Dict, ast.DictComp)):
        return "dict"
    if isinstance(value, (ast.Set, ast.SetComp)):
        return "set"
    if isinstance(value, ast.Tuple):
        return "tuple"
    if isinstance(value, (ast.Compare, ast.BoolOp)) or (isinstance(value, ast.UnaryOp) and isinstance(value.op, ast.Not)):
        return "bool"
    if isinstance(value, ast.Name):
        return env.get(value.id)
    if isinstance(value, ast.UnaryOp):
        return infer_type(value.operand, env, classes)
    if isinstance(value, ast.BinOp):
        left, right = infer_type(value.left, env, classes), infer_type(value.right, env, classes)
        if isinstance(value.op, ast.Div) and {left, right} <= {"int", "float"}:
            return "float"
        return left if left == right else None
    if isinstance(value, ast.Call) and isinstance(value.func, ast.Name):
        name = value.func.id
        if name in _CONSTRUCTOR_TYPES or name in classes:
            return name
        return _CALL_RESULT_TYPES.get(name)
    return None


def _function_env(fn: ast.FunctionDef, cls: ast.ClassDef | None, classes: set[str]) -> list[tuple[ast.stmt, str, str]]:
    """(defining statement, name, type) in pre-order; parameters use the function node."""
    out: list[tuple[ast.stmt, str, str]] = []
    args = fn.args.posonlyargs + fn.args.args + fn.args.kwonlyargs
    is_static = any(_type_name(d) == "staticmethod" for d in fn.decorator_list)
    for i, arg in enumerate(args):
        if i == 0 and cls is not None and not is_static and arg.arg == "self":
            out.append((fn, arg.arg, cls.name))
            continue
        tname = _type_name(arg.annotation)
        if tname:
            out.append((fn, arg.arg, tname))
    env = {name: t for _, name, t in out}
    for stmt in _walk_body(fn.body):
        found: list[tuple[str, str]] = []
        if isinstance(stmt, ast.AnnAssign) and isinstance(stmt.target, ast.Name):
            tname = _type_name(stmt.annotation)
            if tname:
                found.append((stmt.target.id, tname))
        elif isinstance(stmt, ast.Assign):
            tname = infer_type(stmt.value, env, classes)
            for target in stmt.targets:
                if isinstance(target, ast.Name) and tname:
                    found.append((target.id, tname))
        elif isinstance(stmt, ast.For) and isinstance(stmt.target, ast.Name):
            it = stmt.iter
            if isinstance(it, ast.Call) and isinstance(it.func, ast.Name) and it.func.id == "range":
                found.append((stmt.target.id, "int"))
        for name, tname in found:
            if env.get(name, tname) == tname:
                env[name] = tname
                out.append((stmt, name, tname))
    return out


def _walk_body(body: list[ast.stmt]) -> Iterator[ast.stmt]:
    for stmt in body:
        yield stmt
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef, ast.Lambda)):
            continue
        for child in statement_lists(stmt):
            yield from _walk_body(child)


def _local_names(node: ast.stmt) -> set[str]:
    return {n.id for n in ast.walk(node) if isinstance(n, ast.Name)}


@dataclass(frozen=True)
class _Context:
    """A statement inside a function, with the typed names it may use."""

    sid: str
    file: str
    site: Site
    function: ast.FunctionDef
    in_scope: Mapping[str, str]
    """Names defined before this statement, with types."""
    locals_: Mapping[str, str]
    """Every typed local of the enclosing function."""
    untyped: frozenset[str]
    """Locals and parameters of the enclosing function with no known type."""


def _contexts(root: Path) -> dict[str, _Context]:
    trees = parse_program(root)
    classes = {n.name for t in trees.values() for n in ast.walk(t) if isinstance(n, ast.ClassDef)}
    out: dict[str, _Context] = {}
    for rel, tree in trees.items():
        for site in sites(tree):
            functions = [s for s in site.scope if isinstance(s, ast.FunctionDef)]
            if not functions or isinstance(site.node, _EXCLUDED):
                continue
            fn = functions[-1]
            parent = site.scope[site.scope.index(fn) - 1] if site.scope.index(fn) > 0 else None
            cls = parent if isinstance(parent, ast.ClassDef) else None
            env = _function_env(fn, cls, classes)
            order = {id(s): i for i, s in enumerate(_walk_body(fn.body))}
            here = order.get(id(site.node), -1)
            in_scope: dict[str, str] = {}
            for stmt, name, tname in env:
                if stmt is fn or order.get(id(stmt), here) < here:
                    in_scope[name] = tname
            typed = {name: t for _, name, t in env}
            all_locals = {a.arg for a in fn.args.posonlyargs + fn.args.args + fn.args.kwonlyargs}
            for stmt in _walk_body(fn.body):
                for node in ast.walk(stmt):
                    if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
                        all_locals.add(node.id)
            out[f"{rel}:{site.index}"] = _Context(
                f"{rel}:{site.index}", rel, site, fn, in_scope, typed, frozenset(all_locals - typed.keys())
            )
    return out


# -- transplants -------------------------------------------------------------


@dataclass(frozen=True)
class Transplant:
    sid: str
    code: str
    bindings: tuple[tuple[str, str], ...]


class _Rename(ast.NodeTransformer):
    def __init__(self, mapping: Mapping[str, str]) -> None:
        self.mapping = mapping

    def visit_Name(self, node: ast.Name) -> ast.Name:
        return ast.copy_location(ast.Name(self.mapping.get(node.id, node.id), node.ctx), node)


def _bindable(ctx: _Context) -> bool:
    node = ctx.site.node
    if any(isinstance(n, (ast.Yield, ast.YieldFrom, ast.Await, ast.Lambda)) for n in ast.walk(node)):
        return False
    return True


def _bind(source: _Context, target_scope: Mapping[str, str]) -> Iterator[tuple[tuple[str, str], ...]]:
    names = sorted(_local_names(source.site.node) & (source.locals_.keys() | source.untyped))
    if any(n in source.untyped for n in names):
        return
    choices = []
    for name in names:
        wanted = source.locals_[name]
        options = sorted(n for n, t in target_scope.items() if t == wanted)
        if not options:
            return
        choices.append([(name, o) for o in options])
    yield from (tuple(combo) for combo in itertools.product(*choices))


def _bound_code(node: ast.stmt, bindings: tuple[tuple[str, str], ...]) -> str:
    renamed = _Rename(dict(bindings)).visit(copy.deepcopy(node))
    return ast.unparse(ast.fix_missing_locations(renamed))


def _transplants(contexts: Mapping[str, _Context], point: _Context) -> list[Transplant]:
    out = []
    for sid in sorted(contexts, key=_sid_key):
        source = contexts[sid]
        if not _bindable(source):
            continue
        for bindings in _bind(source, point.in_scope):
            out.append(Transplant(sid, _bound_code(source.site.node, bindings), bindings))
    return out


def _sid_key(sid: str) -> tuple[str, int]:
    file, _, index = sid.rpartition(":")
    return file, int(index)


def enumerate_transplants(program: str | Path, point: str) -> list[Transplant]:
    """Statements whose locals can all be rebound to same-typed names in scope at ``point``."""
    contexts = _contexts(Path(program))
    if point not in contexts:
        return []
    return _transplants(contexts, contexts[point])


# -- patching ----------------------------------------------------------------


def _whole_lines(site: Site, lines: list[str]) -> bool:
    node = site.node
    if lines[node.lineno - 1][: node.col_offset].strip():
        return False
    tail = lines[node.end_lineno - 1][node.end_col_offset :].strip()  # type: ignore[index]
    if tail and not tail.startswith("#"):
        return False
    neighbours = site.container[max(site.position - 1, 0) : site.position + 2]
    return all(
        other is node or other.end_lineno < node.lineno or other.lineno > node.end_lineno  # type: ignore[operator]
        for other in neighbours
    )


def patch_source(source: str, site: Site, kind: SteroidKind, code: str = "") -> tuple[str, int | None]:
    """Apply one edit; return the new source and the first line of inserted code."""
    lines = source.splitlines(keepends=True)
    node = site.node
    start, end = node.lineno - 1, node.end_lineno
    indent = " " * node.col_offset
    block = [indent + line + "\n" if line else "\n" for line in code.splitlines()]
    if kind is SteroidKind.DELETE:
        lines[start:end] = [indent + "pass\n"] if len(site.container) == 1 else []
        return "".join(lines), None
    if kind is SteroidKind.ADD:
        lines[end:end] = block  # type: ignore[misc]
        return "".join(lines), end + 1  # type: ignore[operator]
    lines[start:end] = block
    return "".join(lines), start + 1


# -- variants ----------------------------------------------------------------


@dataclass(frozen=True)
class SosieCheck:
    covered: bool
    passes: bool
    reason: str = ""

    @property
    def is_sosie(self) -> bool:
        return self.covered and self.passes


@dataclass(frozen=True)
class VariantDescriptor:
    variant_id: str
    kind: SteroidKind
    transplantation_point: str
    file: str
    patched_source: str
    transplant: str | None = None
    bindings: tuple[tuple[str, str], ...] = ()
    code: str = ""
    identity: bool = False
    inserted_line: int | None = None
    check: SosieCheck | None = None

    def to_json(self) -> dict:
        data = {
            "id": self.variant_id,
            "kind": self.kind.value,
            "transplantation_point": self.transplantation_point,
            "transplant": self.transplant,
            "bindings": dict(self.bindings),
            "file": self.file,
            "code": self.code,
            "identity": self.identity,
        }
        if self.check is not None:
            data["sosie_check"] = {"covered": self.check.covered, "passes": self.check.passes,
                                   "is_sosie": self.check.is_sosie}
        return data


def _variant_id(kind: SteroidKind, point: str, transplant: str | None, bindings, code: str) -> str:
    key = json.dumps([kind.value, point, transplant, list(bindings), code])
    return f"{kind.value.lower()}-{hashlib.sha256(key.encode()).hexdigest()[:10]}"


def make_variant(
    program: str | Path,
    kind: SteroidKind,
    point: str,
    transplant: Transplant | None = None,
) -> VariantDescriptor:
    """Build (without checking) the variant for one edit."""
    root = Path(program)
    contexts = _contexts(root)
    if point not in contexts:
        raise ConfigError(f"{point} is not a statement inside a function")
    ctx = contexts[point]
    source = (root / ctx.file).read_text(encoding="utf-8")
    if kind is not SteroidKind.DELETE and transplant is None:
        raise ConfigError(f"{kind.value} needs a transplant")
    code = transplant.code if transplant else ""
    patched, line = patch_source(source, ctx.site, kind, code)
    identity = kind is SteroidKind.REPLACE and code == ast.unparse(ctx.site.node)
    return VariantDescriptor(
        variant_id=_variant_id(kind, point, transplant.sid if transplant else None,
                               transplant.bindings if transplant else (), code),
        kind=kind,
        transplantation_point=point,
        file=ctx.file,
        patched_source=patched,
        transplant=transplant.sid if transplant else None,
        bindings=transplant.bindings if transplant else (),
        code=code,
        identity=identity,
        inserted_line=line,
    )


def materialize(program: str | Path, variant: VariantDescriptor, target: str | Path) -> Path:
    """Copy the program to ``target`` with the variant's patched file."""
    target = Path(target)
    if target.exists():
        shutil.rmtree(target)
    shutil.copytree(program, target, ignore=shutil.ignore_patterns("__pycache__"))
    (target / variant.file).write_text(variant.patched_source, encoding="utf-8")
    return target


def inserted_statement(variant: VariantDescriptor) -> str | None:
    """Statement id of the inserted code in the patched file."""
    if variant.inserted_line is None:
        return None
    tree = ast.parse(variant.patched_source)
    for site in sites(tree):
        if site.node.lineno == variant.inserted_line:
            return f"{variant.file}:{site.index}"
    return None


def check_sosie(
    program: str | Path, tests: str | Path, variant: VariantDescriptor, original_covered: frozenset[str],
    timeout: float = DEFAULT_TIMEOUT,
) -> SosieCheck:
    with tempfile.TemporaryDirectory(prefix="ampdiv-forge-") as tmp:
        patched = materialize(program, variant, Path(tmp) / "src")
        try:
            run = coverage_run(tests, patched, timeout=timeout)
        except BuildError:
            return SosieCheck(covered=variant.transplantation_point in original_covered, passes=False, reason="build")
    covered = variant.transplantation_point in original_covered
    new = inserted_statement(variant)
    if new is not None:
        covered = covered and new in run.covered
    passes = bool(run.outcomes) and run.passes
    reason = "" if covered and passes else ("uncovered" if not covered else "fails")
    return SosieCheck(covered, passes, reason)


@dataclass(frozen=True)
class ForgeResult:
    kind: SteroidKind
    candidates: int
    checked: tuple[VariantDescriptor, ...]
    rejected: Mapping[str, int] = field(default_factory=dict)

    @property
    def accepted(self) -> tuple[VariantDescriptor, ...]:
        return tuple(v for v in self.checked if v.check is not None and v.check.is_sosie)


def _candidates(root: Path, kind: SteroidKind) -> list[tuple[str, Transplant | None]]:
    contexts = _contexts(root)
    lines = {ctx.file: (root / ctx.file).read_text(encoding="utf-8").splitlines() for ctx in contexts.values()}
    out: list[tuple[str, Transplant | None]] = []
    for sid in sorted(contexts, key=_sid_key):
        point = contexts[sid]
        if not _whole_lines(point.site, lines[point.file]):
            continue
        if kind is SteroidKind.DELETE:
            out.append((sid, None))
            continue
        if kind is SteroidKind.ADD and isinstance(point.site.node, _TERMINATORS):
            continue
        out.extend((sid, t) for t in _transplants(contexts, point))
    return out


def synthesize(
    program: str | Path,
    tests: str | Path,
    kind: SteroidKind,
    budget: int,
    rng_seed: int,
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> ForgeResult:
    """Sample up to ``budget`` candidate edits and keep the sosies."""
    program, tests = Path(program), Path(tests)
    baseline = coverage_run(tests, program, timeout=timeout)
    if not baseline.passes:
        failing = [o.test for o in baseline.outcomes if not o.passed]
        raise ConfigError(f"original suite is not green on {program}: {failing}")
    candidates = _candidates(program, kind)
    rng = random.Random(rng_seed)
    sampled = rng.sample(candidates, min(budget, len(candidates)))
    variants = [make_variant(program, kind, point, t) for point, t in sampled]

    def check(variant: VariantDescriptor) -> VariantDescriptor:
        result = check_sosie(program, tests, variant, baseline.covered, timeout)
        return VariantDescriptor(**{**variant.__dict__, "check": result})

    checked = tuple(parallel_map(check, variants))
    rejected = Counter(v.check.reason for v in checked if v.check and not v.check.is_sosie)
    return ForgeResult(kind, len(candidates), checked, dict(sorted(rejected.items())))


def write_variants(corpus_root: str | Path, variants: list[VariantDescriptor]) -> list[Path]:
    root = Path(corpus_root)
    written = []
    for variant in variants:
        target = root / "variants" / variant.variant_id
        materialize(root / "src", variant, target / "src")
        (target / VARIANT_MANIFEST).write_text(json.dumps(variant.to_json(), indent=1, sort_keys=True) + "\n",
                                               encoding="utf-8")
        written.append(target)
    return written


def ground_truth(corpus_root: str | Path, timeout: float = DEFAULT_TIMEOUT) -> dict[str, dict]:
    """Label every variant by comparing oracle outputs with the original program."""
    root = Path(corpus_root)
    oracle = root / ORACLE_FILE
    if not oracle.exists():
        raise ConfigError(f"{oracle} is missing; cannot label variants")
    variant_dirs = sorted(p for p in (root / "variants").glob("*") if (p / "src").is_dir())
    programs = [root / "src"] + [p / "src" for p in variant_dirs]
    outputs = parallel_map(lambda p: run_oracle(oracle, p, timeout=timeout), programs)
    reference = outputs[0]
    truth = {}
    for vdir, out in zip(variant_dirs, outputs[1:]):
        differing = sorted(k for k in reference.keys() | out.keys() if reference.get(k) != out.get(k))
        truth[vdir.name] = {"diverse": bool(differing), "scenarios": differing}
    return truth


def write_ground_truth(corpus_root: str | Path, timeout: float = DEFAULT_TIMEOUT) -> dict[str, dict]:
    truth = ground_truth(corpus_root, timeout)
    path = Path(corpus_root) / GROUND_TRUTH
    path.write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return truth
