"""Thread-safe registry of CLI subcommands."""
from functools import lru_cache
from threading import RLock
from typing import Any, Dict, List, Optional

from ..exceptions import CommandRegistrationError
from ..utils.logging import get_logger
from ..utils.types import is_valid_command

logger = get_logger(__name__)


class CommandRegistry:
    """Thread-safe singleton registry with a cached name listing."""

    _instance: Optional["CommandRegistry"] = None
    _lock = RLock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not hasattr(self, "_initialized"):
            self._commands: Dict[str, Any] = {}
            self._metadata: Dict[str, Dict] = {}
            self._initialized = True
            logger.debug("🔧 Command registry initialized")

    def _clear_caches(self) -> None:
        self.get_commands.cache_clear()
        self.get_command_names.cache_clear()

    def register(self, command: Any, metadata: Optional[Dict] = None, force: bool = False) -> None:
        """Register a command object exposing name, help, arguments and execute."""
        if not is_valid_command(command):
            raise CommandRegistrationError(
                getattr(command, "name", type(command).__name__), "object does not implement the command protocol"
            )
        name = command.name
        with self._lock:
            if name in self._commands and not force:
                logger.debug(f"🔄 Command '{name}' already registered, skipping...")
                return
            self._commands[name] = command
            self._metadata[name] = metadata or {}
            self._clear_caches()
            logger.debug(f"✅ Registered command: {name}")

    @lru_cache(maxsize=1)
    def get_commands(self) -> List[Any]:
        """All registered commands, sorted by name (cached)."""
        return [self._commands[name] for name in sorted(self._commands)]

    @lru_cache(maxsize=1)
    def get_command_names(self) -> List[str]:
        """All command names, sorted (cached)."""
        return sorted(self._commands)

    def get_command(self, name: str) -> Optional[Any]:
        return self._commands.get(name)

    def get_metadata(self, name: str) -> Optional[Dict]:
        return self._metadata.get(name)

    def unregister(self, name: str) -> bool:
        with self._lock:
            if name in self._commands:
                del self._commands[name]
                self._metadata.pop(name, None)
                self._clear_caches()
                logger.debug(f"🗑️  Unregistered command: {name}")
                return True
        return False

    def clear(self) -> None:
        with self._lock:
            count = len(self._commands)
            self._commands.clear()
            self._metadata.clear()
            self._clear_caches()
            logger.debug(f"🧹 Registry cleared ({count} commands removed)")

    def stats(self) -> Dict[str, Any]:
        return {
            "total_commands": len(self._commands),
            "commands": self.get_command_names(),
        }


# Global registry instance
registry = CommandRegistry()
