"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class AmpdivError(Exception):
    """Base class. ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 1


class ParseError(AmpdivError):
    def __init__(self, file: str, location: str, message: str) -> None:
        super().__init__(f"{file}:{location}: {message}")
        self.file = file
        self.location = location


class UnsupportedConstruct(AmpdivError):
    def __init__(self, location: str, construct: str) -> None:
        super().__init__(f"{location}: unsupported construct in test code: {construct}")
        self.location = location
        self.construct = construct


class RenderError(AmpdivError):
    pass


class InstrumentationError(AmpdivError):
    pass


class BuildError(AmpdivError):
    exit_code = 2

    def __init__(self, program: str, message: str) -> None:
        super().__init__(f"program {program!r} does not build: {message}")
        self.program = program


class ExecutionError(AmpdivError):
    """The harness itself crashed during a run (not a test failure)."""

    exit_code = 3

    def __init__(self, run: str, message: str) -> None:
        super().__init__(f"run {run}: {message}")
        self.run = run


class TraceMismatch(AmpdivError):
    pass


class EmptySet(AmpdivError):
    pass


class ConfigError(AmpdivError):
    exit_code = 1


class OriginalSuiteRed(AmpdivError):
    exit_code = 4
