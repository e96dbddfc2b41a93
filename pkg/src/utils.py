"""
Utility functions for the atom-light simulator.
"""
import logging
from pathlib import Path
from typing import Union

from rich.console import Console
from rich.logging import RichHandler

console = Console()


def prepare_output(path: Union[str, Path]) -> Path:
    """Create the parent directories of an output file and return it as a Path."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def setup_logging(verbose: int = 0) -> None:
    """
    Route log records through rich.

    Args:
        verbose: 0 for warnings, 1 for run progress, 2 or more for debug output
    """
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def format_seconds(seconds: float) -> str:
    """Human-readable duration with an SI prefix (us, ms, s)."""
    if abs(seconds) < 1e-3:
        return f"{seconds * 1e6:.4g} us"
    if abs(seconds) < 1.0:
        return f"{seconds * 1e3:.4g} ms"
    return f"{seconds:.4g} s"
