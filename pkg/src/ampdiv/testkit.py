"""The assertion and observation library imported by test files.

Tests written against the fixture corpus import their assertions from here;
the parser recognises these imports as the test framework. Instrumented
(amplified) tests additionally call :func:`observe`, :func:`probe` and
:func:`observe_exception`, which append canonical records to the active
recorder. This module is loaded inside the sandboxed runner, so it must stay
free of heavy imports.
"""

from __future__ import annotations

import math
import re
import unicodedata
from typing import Any, Callable

NULL = "∅"

_IDENTITY_TOKEN = re.compile(
    r"@[0-9a-fA-F]+"
    r"|0x[0-9a-fA-F]+"
    r"|\b(?=[0-9a-f]*[a-f])(?=[0-9a-f]*[0-9])[0-9a-f]{8,16}\b"
)

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def scrub_identity(text: str) -> str:
    """Replace memory-address and hash-like tokens by ``@ID``."""
    return _IDENTITY_TOKEN.sub("@ID", text)


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif unicodedata.category(ch) == "Cc":
            code = ord(ch)
            out.append(f"\\x{code:02x}" if code < 0x100 else f"\\u{code:04x}")
        else:
            out.append(ch)
    return "".join(out)


def render_value(value: Any, scrub: bool = False) -> str:
    """Canonical, single-line rendering of an observed value.

    Primitives are rendered exactly; anything else goes through ``repr`` with
    identity tokens scrubbed, since default renderings embed addresses.
    """
    if value is None:
        return NULL
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "NaN" if math.isnan(value) else repr(value)
    if isinstance(value, str):
        return _escape(scrub_identity(value) if scrub else value)
    return _escape(scrub_identity(repr(value)))


def render_exception(exc: BaseException) -> str:
    return render_value(f"{type(exc).__name__}: {exc}")


class Recorder:
    """Collects ``(point_id, rendered value)`` records for the running test."""

    def __init__(self) -> None:
        self.records: list[tuple[str, str]] = []
        self.raised_before_first_record = False
        self.raised = False

    def reset(self) -> None:
        self.records = []
        self.raised_before_first_record = False
        self.raised = False


recorder = Recorder()


def observe(point_id: str, value: Any) -> Any:
    recorder.records.append((point_id, render_value(value)))
    return value


def probe(point_id: str, thunk: Callable[[], Any], scrub: bool = False) -> None:
    # accessor failures are observations; they must not end the test
    try:
        value = thunk()
    except Exception as exc:  # noqa: BLE001
        recorder.records.append((point_id, "!" + render_exception(exc)))
        return
    recorder.records.append((point_id, render_value(value, scrub=scrub)))


def observe_exception(point_id: str, exc: BaseException) -> None:
    if not recorder.records:
        recorder.raised_before_first_record = True
    recorder.raised = True
    recorder.records.append((point_id, render_exception(exc)))


# -- assertions -------------------------------------------------------------


def _msg(default: str, msg: str | None) -> str:
    return f"{msg}: {default}" if msg else default


def fail(msg: str | None = None) -> None:
    raise AssertionError(msg or "failed")


def assert_equal(expected: Any, actual: Any, msg: str | None = None) -> None:
    if not expected == actual:
        raise AssertionError(_msg(f"expected {expected!r}, got {actual!r}", msg))


def assert_not_equal(unexpected: Any, actual: Any, msg: str | None = None) -> None:
    if unexpected == actual:
        raise AssertionError(_msg(f"did not expect {actual!r}", msg))


def assert_true(value: Any, msg: str | None = None) -> None:
    if not value:
        raise AssertionError(_msg(f"{value!r} is not true", msg))


def assert_false(value: Any, msg: str | None = None) -> None:
    if value:
        raise AssertionError(_msg(f"{value!r} is not false", msg))


def assert_is_none(value: Any, msg: str | None = None) -> None:
    if value is not None:
        raise AssertionError(_msg(f"{value!r} is not None", msg))


def assert_is_not_none(value: Any, msg: str | None = None) -> None:
    if value is None:
        raise AssertionError(_msg("value is None", msg))


def assert_almost_equal(expected: float, actual: float, delta: float = 1e-9, msg: str | None = None) -> None:
    if abs(expected - actual) > delta:
        raise AssertionError(_msg(f"{actual!r} not within {delta} of {expected!r}", msg))


def assert_raises(exc_type: type[BaseException], fn: Callable[..., Any], *args: Any, **kwargs: Any) -> BaseException:
    try:
        fn(*args, **kwargs)
    except exc_type as exc:
        return exc
    raise AssertionError(f"{exc_type.__name__} not raised")
