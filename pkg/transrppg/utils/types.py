"""Type definitions and helpers."""
from typing import Any, Protocol, Sequence, runtime_checkable


@runtime_checkable
class CommandProtocol(Protocol):
    """Protocol for CLI subcommands."""
    name: str
    help: str
    arguments: Sequence[Any]

    def execute(self, args: Any) -> int:
        """Run the command and return its exit status."""
        ...



def is_valid_command(obj: Any) -> bool:
    """Check if an object is a valid CLI command."""
    return (
        hasattr(obj, 'name') and
        hasattr(obj, 'help') and
        hasattr(obj, 'execute') and
        callable(obj.execute)
    )
