import sys
import traceback
from typing import Any

from msgspec import ValidationError, json

from .errors import CheckFailed, CommandError, ConfigError, ParameterDomainError
from .status import ExitCode


def _report(record: dict[str, Any]) -> None:
    sys.stderr.write(json.encode(record).decode() + "\n")
    sys.stderr.flush()


def config_error_handler(exc: ConfigError) -> ExitCode:
    _report(exc.to_json())
    return ExitCode.CONFIG_ERROR


def msgspec_validation_error_handler(exc: ValidationError) -> ExitCode:
    _report({"error": "config", "detail": str(exc)})
    return ExitCode.CONFIG_ERROR


def command_error_handler(exc: CommandError) -> ExitCode:
    _report({"error": "command", "detail": str(exc)})
    return ExitCode.CONFIG_ERROR


def domain_error_handler(exc: ParameterDomainError) -> ExitCode:
    _report({"error": "domain", "detail": str(exc)})
    return ExitCode.DOMAIN_ERROR


def check_failed_handler(exc: CheckFailed) -> ExitCode:
    _report(exc.to_json())
    return ExitCode.CHECK_FAILED


def internal_error_handler(exc: Exception) -> ExitCode:
    code = ExitCode.INTERNAL_ERROR
    _report({"error": code.phrase, "detail": f"{type(exc).__name__}: {exc}"})
    traceback.print_exc()
    return code


DEFAULT_ERROR_HANDLERS = {
    ConfigError: config_error_handler,
    ValidationError: msgspec_validation_error_handler,
    CommandError: command_error_handler,
    ParameterDomainError: domain_error_handler,
    CheckFailed: check_failed_handler,
    Exception: internal_error_handler,
}
