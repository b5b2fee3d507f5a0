"""Subcommand discovery."""
import importlib
import inspect
from pathlib import Path
from typing import Any, List, Optional, Set

from ..utils.logging import get_logger

logger = get_logger(__name__)

COMMANDS_PACKAGE = "transrppg.commands"


class CommandDiscovery:
    """Imports every public module of the commands package so its decorators register."""

    def __init__(self, package: str = COMMANDS_PACKAGE, directory: Optional[Path] = None):
        self.package = package
        self.directory = directory or Path(importlib.import_module(package).__file__).parent
        self._discovered_modules: Set[str] = set()
        self._discovery_errors: List[Exception] = []

    def discover_all(self) -> List[Any]:
        """Import command modules; returns the handler functions they registered."""
        logger.debug(f"🔍 Discovering commands in {self.directory}")
        handlers = []
        for file_path in sorted(self.directory.glob("*.py")):
            if file_path.stem.startswith("_"):
                continue
            full_module = f"{self.package}.{file_path.stem}"
            if full_module in self._discovered_modules:
                continue
            try:
                module = importlib.import_module(full_module)
                self._discovered_modules.add(full_module)
            except Exception as e:
                logger.error(f"❌ Error loading {full_module}: {e}")
                self._discovery_errors.append(e)
                continue
            found = self._extract_commands(module)
            handlers.extend(found)
            logger.debug(f"✅ Found {len(found)} command(s) in {full_module}")
        return handlers

    def _extract_commands(self, module) -> List[Any]:
        return [
            obj
            for name, obj in inspect.getmembers(module, inspect.isfunction)
            if hasattr(obj, "_transrppg_command") and not name.startswith("_")
        ]

    def get_discovery_errors(self) -> List[Exception]:
        return self._discovery_errors.copy()

    def get_discovered_modules(self) -> Set[str]:
        return self._discovered_modules.copy()
