import argparse
from typing import Any, Callable, Optional

from typing_extensions import TypeAlias

from .config import ExperimentConfig
from .errors import CommandError

COMMAND_FUNC_TYPE: TypeAlias = Callable[[ExperimentConfig, argparse.Namespace], Any]
ARGUMENT_TYPE: TypeAlias = tuple[tuple[str, ...], dict[str, Any]]


def argument(*flags: str, **kwargs: Any) -> ARGUMENT_TYPE:
    """
    Describe a subcommand option with the arguments of `ArgumentParser.add_argument`.
    """
    return flags, kwargs


class Command:
    """
    A class for defining a subcommand.

    Options whose `dest` is a config field name are applied to the config
    as dedicated flags; the others stay on the parsed namespace.
    """

    def __init__(
        self,
        name: str,
        func: COMMAND_FUNC_TYPE,
        *,
        help: Optional[str] = None,  # noqa: A002
        arguments: Optional[list[ARGUMENT_TYPE]] = None,
        config_flags: tuple[str, ...] = (),
    ) -> None:
        self.name = name
        self.func = func
        self.help = help if help is not None else (func.__doc__ or "").strip().split("\n")[0]
        self.arguments = arguments or []
        self.config_flags = config_flags

    def add_to(self, subparsers, parents: list[argparse.ArgumentParser]) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(self.name, help=self.help, description=self.help, parents=parents)
        for flags, kwargs in self.arguments:
            parser.add_argument(*flags, **kwargs)
        parser.set_defaults(command=self.name)
        return parser

    def flags(self, args: argparse.Namespace) -> dict[str, Any]:
        return {name: getattr(args, name, None) for name in self.config_flags}

    def __call__(self, config: ExperimentConfig, args: argparse.Namespace) -> Any:
        return self.func(config, args)


class CommandRegistry:
    """
    A registry to create/find a subcommand.
    """

    def __init__(self) -> None:
        self.commands: dict[str, Command] = {}

    def add_command(self, name: str, func: COMMAND_FUNC_TYPE, **kwargs: Any) -> Command:
        """Adding a subcommand to the registry.

        Args:
            name: Subcommand name
            func: Function taking the resolved config and the parsed arguments
            kwargs: Options forwarded to `Command`

        Raises:
            CommandError: if the subcommand already exists.
        """
        if name in self.commands:
            raise CommandError(f"Command {name!r} already exists")
        command = Command(name, func, **kwargs)
        self.commands[name] = command
        return command

    def command(self, name: str, **kwargs: Any):
        """
        Add a subcommand with a decorator style
        """

        def inner(func: COMMAND_FUNC_TYPE):
            self.add_command(name, func, **kwargs)
            return func

        return inner

    def find(self, name: str) -> Command:
        command = self.commands.get(name)
        if command is None:
            raise CommandError(f"Unknown command {name!r}")
        return command

    def __iter__(self):
        return iter(self.commands.values())
