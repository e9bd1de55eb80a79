"""Input-space amplification: single-step literal and statement transformations,
assertion stripping, and the stacked numeric baseline (TDR)."""

from __future__ import annotations

import ast
import dataclasses
import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

from ampdiv.test_ir import (
    ROLE_HOISTED,
    Framework,
    LiteralKind,
    LiteralSlot,
    Provenance,
    Statement,
    StatementKind,
    TestCase,
    TestSuite,
    make_statement,
    make_test,
    replace_literal,
)

PRINTABLE = "".join(chr(c) for c in range(0x20, 0x7F))


class TransformKind(str, Enum):
    STR_REMOVE = "StrRemove"
    STR_ADD = "StrAdd"
    STR_REPLACE = "StrReplace"
    NUM_PLUS1 = "NumPlus1"
    NUM_MINUS1 = "NumMinus1"
    NUM_TIMES2 = "NumTimes2"
    NUM_DIV2 = "NumDiv2"
    BOOL_NEGATE = "BoolNegate"
    STMT_REMOVE = "StmtRemove"
    STMT_DUP = "StmtDup"
    TDR_STACK = "Tdr"


NUMERIC_KINDS = (TransformKind.NUM_PLUS1, TransformKind.NUM_MINUS1, TransformKind.NUM_TIMES2, TransformKind.NUM_DIV2)
STRING_KINDS = (TransformKind.STR_REMOVE, TransformKind.STR_ADD, TransformKind.STR_REPLACE)
_LITERAL_KINDS = {
    LiteralKind.STRING: STRING_KINDS,
    LiteralKind.INTEGER: NUMERIC_KINDS,
    LiteralKind.FLOAT: NUMERIC_KINDS,
    LiteralKind.BOOLEAN: (TransformKind.BOOL_NEGATE,),
}


@dataclass(frozen=True)
class TransformationDescriptor:
    kind: TransformKind
    target: Any
    """A slot id, a statement ordinal, or (TDR) a tuple of slot ids."""
    stack: tuple[TransformKind, ...] = ()

    @property
    def label(self) -> str:
        if self.kind is TransformKind.TDR_STACK:
            ops = "".join(k.value.removeprefix("Num") for k in self.stack)
            where = "_".join(f"{o}_{i}" for _, o, i in self.target)
            return f"Tdr{ops}_{where}"
        if isinstance(self.target, tuple):
            return f"{self.kind.value}_{self.target[1]}_{self.target[2]}"
        return f"{self.kind.value}_{self.target}"

    def to_json(self) -> dict[str, Any]:
        target = [list(t) for t in self.target] if self.kind is TransformKind.TDR_STACK else self.target
        return {
            "kind": self.kind.value,
            "target": list(target) if isinstance(target, tuple) else target,
            "stack": [k.value for k in self.stack],
        }


@dataclass(frozen=True)
class LiteralCounts:
    strings: int = 0
    numbers: int = 0
    booleans: int = 0
    statements: int = 0

    def __add__(self, other: "LiteralCounts") -> "LiteralCounts":
        return LiteralCounts(*(a + b for a, b in zip(dataclasses.astuple(self), dataclasses.astuple(other))))

    @property
    def expected_generated(self) -> int:
        return self.strings * 3 + self.numbers * 4 + self.booleans + self.statements * 2


@dataclass(frozen=True)
class AmplifiedSuite:
    tests: tuple[TestCase, ...]
    counts: LiteralCounts
    generated_count: int
    modules: dict
    dropped_nonexecutable: int = 0
    skipped: tuple[TransformationDescriptor, ...] = ()
    """Transformations not emitted because the result is not representable."""
    originals: int = 0

    @property
    def suite(self) -> TestSuite:
        return TestSuite(self.tests, self.modules)

    @property
    def generated(self) -> list[TestCase]:
        return [t for t in self.tests if t.provenance.generated]


def generated_name(parent: str, label: str) -> str:
    return f"{parent}_{label}"


def _rng_for(seed: int, *key: Any) -> random.Random:
    digest = hashlib.sha256(repr((seed, *key)).encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _half(value: int | float) -> int | float:
    if isinstance(value, int):
        return -((-value) // 2) if value < 0 else value // 2
    return value / 2


_NUMERIC_OPS = {
    TransformKind.NUM_PLUS1: lambda v: v + 1,
    TransformKind.NUM_MINUS1: lambda v: v - 1,
    TransformKind.NUM_TIMES2: lambda v: v * 2,
    TransformKind.NUM_DIV2: _half,
}


def apply_numeric(kind: TransformKind, value: int | float) -> int | float | None:
    """One numeric step; ``None`` when a float leaves the representable range."""
    result = _NUMERIC_OPS[kind](value)
    if isinstance(result, float) and math.isinf(result) and not math.isinf(value):
        return None
    return result


def _other_char(rng: random.Random, current: str) -> str:
    choice = rng.choice(PRINTABLE[:-1])
    # skip over the current character so the replacement always differs
    return choice if choice < current else chr(ord(choice) + 1)


def transform_literal(slot: LiteralSlot, rng_seed: int) -> list[tuple[TransformationDescriptor, Any]]:
    """All single transformations of one literal, in a fixed kind order.

    Numeric results that overflow are omitted (see ``AmplifiedSuite.skipped``).
    """
    results: list[tuple[TransformationDescriptor, Any]] = []
    value = slot.value
    if slot.kind is LiteralKind.STRING:
        rng = _rng_for(rng_seed, slot.slot_id)
        if value:
            pos = rng.randrange(len(value))
            removed = value[:pos] + value[pos + 1 :]
        else:
            removed = value
        pos = rng.randrange(len(value) + 1)
        added = value[:pos] + rng.choice(PRINTABLE) + value[pos:]
        if value:
            pos = rng.randrange(len(value))
            replaced = value[:pos] + _other_char(rng, value[pos]) + value[pos + 1 :]
        else:
            replaced = value
        for kind, new in zip(STRING_KINDS, (removed, added, replaced)):
            results.append((TransformationDescriptor(kind, slot.slot_id), new))
    elif slot.kind in (LiteralKind.INTEGER, LiteralKind.FLOAT):
        for kind in NUMERIC_KINDS:
            new = apply_numeric(kind, value)
            if new is not None:
                results.append((TransformationDescriptor(kind, slot.slot_id), new))
    elif slot.kind is LiteralKind.BOOLEAN:
        results.append((TransformationDescriptor(TransformKind.BOOL_NEGATE, slot.slot_id), not value))
    return results


# -- statement-level edits ---------------------------------------------------


def _edit_tree(
    statements: Sequence[Statement], ordinal: int, edit: str, replacement: Statement | None = None
) -> tuple[Statement, ...]:
    out: list[Statement] = []
    for stmt in statements:
        if stmt.ordinal == ordinal:
            if edit == "remove":
                continue
            if edit == "dup":
                out.extend((stmt, stmt))
                continue
            out.append(replacement)  # type: ignore[arg-type]
            continue
        if stmt.children:
            stmt = dataclasses.replace(stmt, children=_edit_tree(stmt.children, ordinal, edit, replacement))
        out.append(stmt)
    return tuple(out)


def _find(statements: Sequence[Statement], ordinal: int) -> Statement:
    for stmt in statements:
        for s in stmt.walk():
            if s.ordinal == ordinal:
                return s
    raise KeyError(ordinal)


def _derive(parent: TestCase, descriptor: TransformationDescriptor, statements: Iterable[Statement]) -> TestCase:
    return make_test(
        generated_name(parent.name, descriptor.label),
        statements,
        provenance=Provenance(parent.name, descriptor),
        origin=parent.origin,
        signature=parent.signature,
    )


def transform_statements(test: TestCase) -> list[TestCase]:
    """One removal and one adjacent duplication per non-assertion statement."""
    generated: list[TestCase] = []
    for stmt in test.walk():
        if stmt.kind is StatementKind.ASSERTION:
            continue
        for kind, edit in ((TransformKind.STMT_REMOVE, "remove"), (TransformKind.STMT_DUP, "dup")):
            descriptor = TransformationDescriptor(kind, stmt.ordinal)
            generated.append(_derive(test, descriptor, _edit_tree(test.statements, stmt.ordinal, edit)))
    return generated


def _with_literal(test: TestCase, slot_id: tuple, value: Any, framework: Framework) -> tuple[Statement, ...]:
    _, ordinal, index = slot_id
    updated = replace_literal(_find(test.statements, ordinal), index, value, framework)
    return _edit_tree(test.statements, ordinal, "replace", updated)


def strip_assertions(test: TestCase, framework: Framework = Framework()) -> TestCase:
    """Delete assertions, keeping each call-valued argument as a standalone statement."""

    def strip(statements: Sequence[Statement]) -> list[Statement]:
        out: list[Statement] = []
        for stmt in statements:
            if stmt.kind is StatementKind.ASSERTION:
                for arg in stmt.args:
                    expr = ast.parse(arg, mode="eval").body
                    if isinstance(expr, ast.Call):
                        node = ast.Expr(expr)
                        node._ampdiv_role = ROLE_HOISTED  # type: ignore[attr-defined]
                        hoisted = make_statement(node, framework)
                        out.append(dataclasses.replace(hoisted, branch=stmt.branch, kind=StatementKind.SIMPLE))
                continue
            if stmt.children:
                stmt = dataclasses.replace(stmt, children=tuple(strip(stmt.children)))
            out.append(stmt)
        return out

    if not any(s.kind is StatementKind.ASSERTION for s in test.walk()):
        return test
    return make_test(
        test.name,
        strip(test.statements),
        provenance=test.provenance,
        origin=test.origin,
        signature=test.signature,
        guard=test.guard,
    )


def count_test(test: TestCase) -> LiteralCounts:
    kinds = [slot.kind for slot in test.literal_slots]
    return LiteralCounts(
        strings=kinds.count(LiteralKind.STRING),
        numbers=kinds.count(LiteralKind.INTEGER) + kinds.count(LiteralKind.FLOAT),
        booleans=kinds.count(LiteralKind.BOOLEAN),
        statements=sum(1 for s in test.walk() if s.kind is not StatementKind.ASSERTION),
    )


def _framework(suite: TestSuite, test: TestCase) -> Framework:
    module = suite.modules.get(test.origin)
    return module.framework if module is not None else Framework()


def amplify(suite: TestSuite, rng_seed: int) -> AmplifiedSuite:
    """Exhaustive single-step amplification of every test, assertions stripped.

    Literal and statement counts are taken on the assertion-stripped originals,
    which are also the parents of every generated test.
    """
    tests: list[TestCase] = []
    counts = LiteralCounts()
    skipped: list[TransformationDescriptor] = []
    generated_count = 0
    for original in suite.tests:
        framework = _framework(suite, original)
        parent = strip_assertions(original, framework)
        counts = counts + count_test(parent)
        generated = transform_statements(parent)
        for slot in parent.literal_slots:
            variants = transform_literal(slot, rng_seed)
            emitted = {d.kind for d, _ in variants}
            skipped.extend(
                TransformationDescriptor(k, slot.slot_id) for k in _LITERAL_KINDS[slot.kind] if k not in emitted
            )
            for descriptor, value in variants:
                generated.append(_derive(parent, descriptor, _with_literal(parent, slot.slot_id, value, framework)))
        tests.append(parent)
        tests.extend(generated)
        generated_count += len(generated)
    return AmplifiedSuite(
        tests=tuple(_unique_names(tests)),
        counts=counts,
        generated_count=generated_count,
        modules=suite.modules,
        skipped=tuple(skipped),
        originals=len(suite.tests),
    )


def tdr_amplify(suite: TestSuite, interaction_level: int) -> AmplifiedSuite:
    """Numeric-only amplification stacking 1..``interaction_level`` steps per test."""
    if interaction_level < 1:
        raise ValueError("interaction_level must be >= 1")
    tests: list[TestCase] = []
    counts = LiteralCounts()
    skipped: list[TransformationDescriptor] = []
    generated_count = 0
    for original in suite.tests:
        framework = _framework(suite, original)
        parent = strip_assertions(original, framework)
        counts = counts + count_test(parent)
        numeric = [s for s in parent.literal_slots if s.kind in (LiteralKind.INTEGER, LiteralKind.FLOAT)]
        moves = [(slot, kind) for slot in numeric for kind in NUMERIC_KINDS]
        tests.append(parent)
        for level in range(1, interaction_level + 1):
            for sequence in itertools.product(moves, repeat=level):
                descriptor = TransformationDescriptor(
                    TransformKind.TDR_STACK,
                    tuple(slot.slot_id for slot, _ in sequence),
                    tuple(kind for _, kind in sequence),
                )
                values = {slot.slot_id: slot.value for slot in numeric}
                ok = True
                for slot, kind in sequence:
                    new = apply_numeric(kind, values[slot.slot_id])
                    if new is None:
                        ok = False
                        break
                    values[slot.slot_id] = new
                if not ok:
                    skipped.append(descriptor)
                    continue
                statements = parent.statements
                current = parent
                for slot_id in dict.fromkeys(slot_id for slot_id in descriptor.target):
                    statements = _with_literal(current, slot_id, values[slot_id], framework)
                    current = dataclasses.replace(current, statements=statements)
                tests.append(_derive(parent, descriptor, statements))
                generated_count += 1
    return AmplifiedSuite(
        tests=tuple(_unique_names(tests)),
        counts=counts,
        generated_count=generated_count,
        modules=suite.modules,
        skipped=tuple(skipped),
        originals=len(suite.tests),
    )


def _unique_names(tests: list[TestCase]) -> list[TestCase]:
    seen: set[str] = set()
    out: list[TestCase] = []
    for test in tests:
        name = test.name
        n = 1
        while name in seen:
            n += 1
            name = f"{test.name}_{n}"
        seen.add(name)
        out.append(test if name == test.name else make_test(
            name, test.statements, provenance=test.provenance, origin=test.origin,
            signature=test.signature, guard=test.guard,
        ))
    return out


def manifest(amplified: AmplifiedSuite) -> dict[str, Any]:
    return {
        "counts": dataclasses.asdict(amplified.counts),
        "generated_count": amplified.generated_count,
        "skipped": [d.to_json() for d in amplified.skipped],
        "tests": [
            {
                "name": t.name,
                "origin": t.origin,
                "parent": t.provenance.parent,
                "transformation": t.provenance.transformation.to_json() if t.provenance.generated else None,
            }
            for t in amplified.tests
        ],
    }


def write_manifest(amplified: AmplifiedSuite, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest(amplified), indent=2, sort_keys=True) + "\n", encoding="utf-8")
