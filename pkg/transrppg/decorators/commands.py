"""Subcommand decorator for plain functions."""
import argparse
import inspect
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..core.registry import registry
from ..exceptions import InvalidCommandSignatureError
from ..utils.logging import get_logger, log_execution

logger = get_logger(__name__)

# (flags, argparse keyword arguments), e.g. (("--image",), {"action": "store_true"})
Argument = Tuple[Tuple[str, ...], Dict[str, Any]]


def arg(*flags: str, **kwargs: Any) -> Argument:
    """Declare one subcommand argument in argparse terms."""
    return flags, kwargs


class CommandWrapper:
    """A registered subcommand: metadata plus the validated handler."""

    def __init__(
        self,
        target: Callable[[argparse.Namespace], Optional[int]],
        name: str,
        help: str,
        arguments: Sequence[Argument] = (),
    ):
        self.original_target = target
        self.name = name
        self.help = help
        self.arguments: List[Argument] = list(arguments)
        self._validate()
        self.target = log_execution(target)

    def _validate(self) -> None:
        target = self.original_target
        label = getattr(target, "__name__", self.name)
        if inspect.isclass(target) or not callable(target):
            raise InvalidCommandSignatureError(label, "command handler must be a function")
        if inspect.iscoroutinefunction(target):
            raise InvalidCommandSignatureError(label, "command handler must be synchronous")
        params = list(inspect.signature(target).parameters.values())
        if any(p.kind in (p.VAR_KEYWORD, p.VAR_POSITIONAL) for p in params):
            raise InvalidCommandSignatureError(label, "command handler cannot use *args or **kwargs")
        if len(params) != 1:
            raise InvalidCommandSignatureError(label, "command handler takes exactly one argument (the parsed args)")
        for flags, _ in self.arguments:
            if not flags:
                raise InvalidCommandSignatureError(label, "argument declared without flags")

    def add_to(self, subparsers: Any, parents: Sequence[argparse.ArgumentParser] = ()) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(self.name, help=self.help, description=self.help, parents=list(parents))
        for flags, kwargs in self.arguments:
            parser.add_argument(*flags, **kwargs)
        parser.set_defaults(command=self.name)
        return parser

    def execute(self, args: argparse.Namespace) -> int:
        status = self.target(args)
        return 0 if status is None else int(status)


def command(
    name: Optional[str] = None,
    help: Optional[str] = None,
    arguments: Sequence[Argument] = (),
) -> Callable:
    """Register a function `handler(args) -> exit status` as a subcommand."""

    def decorator(target: Callable) -> Callable:
        command_name = name or target.__name__.replace("cmd_", "")
        command_help = help or (inspect.getdoc(target) or f"Command {command_name}").splitlines()[0]
        wrapper = CommandWrapper(target=target, name=command_name, help=command_help, arguments=arguments)
        registry.register(wrapper, metadata={"module": target.__module__})
        target._transrppg_command = command_name
        return target

    return decorator
