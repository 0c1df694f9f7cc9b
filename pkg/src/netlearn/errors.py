"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` (e.g. ``SYNTAX_ERROR``)
so callers and the CLI can branch on it without parsing messages.
"""

from __future__ import annotations


class NetlearnError(Exception):
    def __init__(self, code: str, message: str, *, line: int | None = None, column: int | None = None):
        self.code = code
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(f"{code}: {message}{where}")


class NetlistError(NetlearnError):
    pass


class GraphError(NetlearnError):
    pass


class ModelError(NetlearnError):
    pass


class SamplerError(NetlearnError):
    pass


class AugmentError(NetlearnError):
    pass


class TaskError(NetlearnError):
    pass


class ConfigError(NetlearnError):
    def __init__(self, message: str, **kw):
        super().__init__("CONFIG_ERROR", message, **kw)
