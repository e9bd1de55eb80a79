"""Statement-level view of a program under test.

Statement ids are ``<relative path>:<k>`` where ``k`` numbers the statements
of one file in pre-order. The executor uses them for coverage and forge uses
them to address transplantation points.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from ampdiv.errors import BuildError

HIT_FUNCTION = "_ak_hit"
_BODY_FIELDS = ("body", "orelse", "finalbody")


def statement_lists(node: ast.AST) -> Iterator[list[ast.stmt]]:
    """Child statement lists of ``node`` in source order."""
    for name in _BODY_FIELDS:
        value = getattr(node, name, None)
        if isinstance(value, list) and value and isinstance(value[0], ast.stmt):
            yield value
        if name == "body":
            # handlers and match arms sit between body and orelse in source order
            for handler in getattr(node, "handlers", ()):
                yield handler.body
            for case in getattr(node, "cases", ()):
                yield case.body


@dataclass(frozen=True)
class Site:
    """One statement, where it lives and what encloses it."""

    index: int
    node: ast.stmt
    container: list[ast.stmt]
    position: int
    scope: tuple[ast.AST, ...]
    """Enclosing function/class definitions, outermost first."""


def sites(tree: ast.Module) -> list[Site]:
    out: list[Site] = []

    def visit(body: list[ast.stmt], scope: tuple[ast.AST, ...]) -> None:
        for position, stmt in enumerate(body):
            out.append(Site(len(out), stmt, body, position, scope))
            inner = scope + (stmt,) if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)) else scope
            for child in statement_lists(stmt):
                visit(child, inner)

    visit(tree.body, ())
    return out


@dataclass(frozen=True)
class ProgramStatement:
    sid: str
    file: str
    line: int
    code: str
    function: str
    """Qualified name of the enclosing function, or ``""`` at module/class level."""


def program_files(root: str | Path) -> list[Path]:
    root = Path(root)
    return sorted(p for p in root.rglob("*.py") if "__pycache__" not in p.parts)


def parse_program(root: str | Path, label: str = "") -> dict[str, ast.Module]:
    """Parse every source file; raise BuildError if any does not compile."""
    root = Path(root)
    trees: dict[str, ast.Module] = {}
    for file in program_files(root):
        rel = file.relative_to(root).as_posix()
        source = file.read_text(encoding="utf-8")
        try:
            trees[rel] = ast.parse(source, filename=rel)
            compile(trees[rel], rel, "exec")
        except (SyntaxError, ValueError) as exc:
            raise BuildError(label or str(root), f"{rel}: {exc}") from exc
    return trees


def statements(root: str | Path) -> dict[str, ProgramStatement]:
    out: dict[str, ProgramStatement] = {}
    for rel, tree in parse_program(root).items():
        for site in sites(tree):
            sid = f"{rel}:{site.index}"
            qual = ".".join(s.name for s in site.scope)  # type: ignore[attr-defined]
            function = qual if any(isinstance(s, (ast.FunctionDef, ast.AsyncFunctionDef)) for s in site.scope) else ""
            code = ast.unparse(site.node).splitlines()[0]
            out[sid] = ProgramStatement(sid, rel, site.node.lineno, code, function)
    return out


def _hit(key: str) -> ast.stmt:
    call = ast.Call(ast.Name(HIT_FUNCTION, ast.Load()), [ast.Constant(key)], [])
    return ast.Expr(call)


def _is_future(stmt: ast.stmt) -> bool:
    return isinstance(stmt, ast.ImportFrom) and stmt.module == "__future__"


def instrument_coverage(source: str, rel: str) -> ast.Module:
    """Inject a ``_ak_hit(id)`` call before every statement."""
    tree = ast.parse(source, filename=rel)
    ids = {id(site.node): f"{rel}:{site.index}" for site in sites(tree)}

    def rewrite(body: list[ast.stmt], top: bool) -> None:
        future = []
        if top:
            while body and _is_future(body[0]):
                future.append(body.pop(0))
        for stmt in body:
            for child in statement_lists(stmt):
                rewrite(child, False)
        new = [item for stmt in body for item in (_hit(ids[id(stmt)]), stmt)]
        body[:] = future + [_hit(ids[id(s)]) for s in future] + new

    rewrite(tree.body, True)
    return ast.fix_missing_locations(tree)
