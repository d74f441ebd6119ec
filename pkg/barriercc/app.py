import argparse
import logging
import sys
from typing import Any, Callable, Optional, Union

from typing_extensions import TypeAlias

from . import __version__
from .commands import CommandRegistry, argument
from .config import ExperimentConfig, resolve_config
from .context import execution_context
from .errors import BarrierError, CheckFailed
from .experiments import CHECKS, run_beta1, run_check_suite, run_convergence_table, run_correct, run_price
from .handlers import DEFAULT_ERROR_HANDLERS
from .output import write_output
from .status import ExitCode

logger = logging.getLogger(__name__)

ERROR_HANDLER_TYPE: TypeAlias = Callable[[Exception], ExitCode]
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class BarrierCC:
    """
    barriercc command-line application.
    """

    REGISTRY_CLASS = CommandRegistry

    def __init__(self, prog: str = "barriercc") -> None:
        self.prog = prog
        self.registry = self.REGISTRY_CLASS()
        self.error_handlers: dict[type[Exception], ERROR_HANDLER_TYPE] = dict(DEFAULT_ERROR_HANDLERS)

    def command(self, name: str, **kwargs: Any):
        """A helper for adding subcommands using the 'decorator' style.

        Args:
            name: Subcommand name (e.g. `price`)

        Keyword Arguments:
            help: One-line description shown by `--help`
            arguments: Extra options, built with `argument(...)`
            config_flags: Option destinations applied to the config as dedicated flags
        """
        return self.registry.command(name, **kwargs)

    def add_error_handler(self, exception: type[Exception], func: ERROR_HANDLER_TYPE, force: bool = False):
        handler = self.error_handlers.get(exception)
        if handler and not force:
            raise BarrierError(f"Error handler for {exception!r} already exists")

        assert isinstance(exception, type), "it takes a class for the 'exception' parameter"  # noqa: S101
        self.error_handlers[exception] = func

    def _find_error_handler(self, exception: Union[Exception, type[Exception]]) -> Optional[ERROR_HANDLER_TYPE]:
        """Function to look for the handling function of an exception, nearest class first.

        Args:
            exception: Exception instance or class
        """
        if not isinstance(exception, type):
            exception = type(exception)

        for klass in exception.mro():
            handler = self.error_handlers.get(klass)
            if handler is not None:
                return handler
        return None

    def _common_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(add_help=False)
        group = parser.add_argument_group("common options")
        group.add_argument("--config", metavar="PATH", help="JSON config file")
        group.add_argument(
            "--set",
            metavar="FIELD=VALUE",
            action="append",
            default=[],
            dest="assignments",
            help="override one config field (repeatable)",
        )
        group.add_argument("--seed", type=int, metavar="U64", help="master seed")
        group.add_argument("--paths", type=int, metavar="N", help="path budget")
        group.add_argument("--threads", type=int, metavar="N", help="worker threads, 0 for all cores (default 1)")
        group.add_argument("--out", dest="output", metavar="PATH", help="output file, standard output by default")
        group.add_argument("--format", choices=["json", "csv"], help="output format")
        group.add_argument(
            "--log-level",
            default="WARNING",
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            help="log level on standard error",
        )
        group.add_argument("--progress", action="store_true", help="show progress bars on standard error")
        return parser

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog=self.prog, description="Continuity correction for barrier options under jump-diffusion."
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
        common = self._common_parser()
        for command in self.registry:
            command.add_to(subparsers, [common])
        return parser

    @staticmethod
    def _configure_logging(level: str) -> None:
        root = logging.getLogger("barriercc")
        for handler in list(root.handlers):
            root.removeHandler(handler)
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.setLevel(level)

    def run(self, argv: Optional[list[str]] = None) -> ExitCode:
        args = self.build_parser().parse_args(argv)
        self._configure_logging(args.log_level)
        try:
            command = self.registry.find(args.command)
            config = resolve_config(
                args.config,
                args.assignments,
                seed=args.seed,
                paths=args.paths,
                output=args.output,
                format=args.format,
                **command.flags(args),
            )
            logger.debug("resolved config: %r", config)
            with execution_context(threads=1 if args.threads is None else args.threads, progress=args.progress):
                record = command(config, args)
            write_output(record, config.format, config.output)
            failed = getattr(record, "failed", None)
            if failed:
                raise CheckFailed(failed)
        except Exception as e:
            handler = self._find_error_handler(e)
            return handler(e)
        return ExitCode.OK

    def __call__(self, argv: Optional[list[str]] = None) -> int:
        return int(self.run(argv))


cli = BarrierCC()

_MODE = argument(
    "--mode",
    choices=["discrete_from_continuous", "continuous_from_discrete"],
    help="direction of the barrier shift",
)


@cli.command("price", help="Monte Carlo prices under continuous and discrete monitoring")
def price(config: ExperimentConfig, args: argparse.Namespace):
    return run_price(config)


@cli.command("correct", help="prices at the shifted barrier", arguments=[_MODE], config_flags=("mode",))
def correct(config: ExperimentConfig, args: argparse.Namespace):
    return run_correct(config)


@cli.command(
    "convergence",
    help="discrete, corrected and continuous prices for every monitoring frequency",
    arguments=[_MODE],
    config_flags=("mode",),
)
def convergence(config: ExperimentConfig, args: argparse.Namespace):
    return run_convergence_table(config)


@cli.command(
    "beta1",
    help="estimate the correction constant beta1 and cache it",
    arguments=[
        argument("--J", dest="J", type=int, metavar="J", help="truncation window |j| <= J"),
        argument("--grid-step", dest="grid_step", type=float, metavar="DT", help="Bessel path grid step"),
        argument("--samples", type=int, metavar="N", help="number of samples"),
    ],
    config_flags=("J", "grid_step", "samples"),
)
def beta1(config: ExperimentConfig, args: argparse.Namespace):
    return run_beta1(config)


@cli.command(
    "check",
    help="run the property checks",
    arguments=[argument("--only", action="append", choices=sorted(CHECKS), metavar="NAME", help="run only NAME")],
)
def check(config: ExperimentConfig, args: argparse.Namespace):
    return run_check_suite(config, args.only)


def main(argv: Optional[list[str]] = None) -> int:
    return cli(argv)
