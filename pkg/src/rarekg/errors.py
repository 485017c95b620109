"""Exception types shared across the package.

Every error carries a stable ``code`` string so that callers (and the CLI's
machine-readable error records) can branch on it without parsing messages.
"""

from __future__ import annotations

from typing import Any


class RareKGError(Exception):
    """Base class for all package errors."""

    def __init__(self, code: str, message: str = "", **details: Any) -> None:
        self.code = code
        self.message = message or code
        self.details = details
        super().__init__(f"{code}: {self.message}")

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {"error": self.code, "message": self.message}
        if self.details:
            record["details"] = {k: _plain(v) for k, v in sorted(self.details.items())}
        return record


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_plain(v) for v in value]
    return str(value)


class OntologyError(RareKGError):
    pass


class IngestError(RareKGError):
    pass


class GraphError(RareKGError):
    pass


class RankingError(RareKGError):
    pass


class CaseError(RareKGError):
    pass


class EvaluationError(RareKGError):
    pass


class ClientError(RareKGError):
    pass
