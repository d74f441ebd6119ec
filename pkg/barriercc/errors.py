from typing import Any, Optional


class BarrierError(Exception):
    """
    Base class for all exceptions in barriercc.
    """


class ParameterDomainError(BarrierError, ValueError):
    """
    A numeric precondition does not hold (e.g. `sigma <= 0`, `eta1 <= 1`, `dt <= 0`).

    It subclasses `ValueError` so that msgspec reports it as a `ValidationError`
    with the path of the offending field when raised while decoding a config.
    """


class ConfigError(BarrierError):
    """
    Exception for configuration problems that are not plain field validation,
    like an unreadable file or a malformed `--set` override.
    """

    def __init__(self, detail: str, field: Optional[str] = None, **fields: Any) -> None:
        """
        Args:
            detail: Human readable description.
            field: Name of the config field involved. Defaults to None.
            \\*\\*fields: Other fields to be merged into the JSON error record
        """
        super().__init__(detail)
        self.detail = detail
        self.field = field
        self.fields = fields

    def to_json(self) -> dict:
        rv = {"error": "config", "detail": self.detail, **self.fields}
        if self.field is not None:
            rv["field"] = self.field
        return rv


class CommandError(BarrierError):
    """
    Exceptions related to CLI subcommands. Thrown when a command is registered twice or is unknown.
    """


class CheckFailed(BarrierError):  # noqa: N818
    """
    Raised by the `check` subcommand when at least one property check fails.
    """

    def __init__(self, failed: list[str]) -> None:
        super().__init__(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        self.failed = failed

    def to_json(self) -> dict:
        return {"error": "check", "failed": self.failed}
