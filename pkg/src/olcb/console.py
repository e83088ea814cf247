import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console(color_system="truecolor")


def setup_logging(verbose: bool = False) -> None:
    """Route the `olcb` logger hierarchy through rich."""
    logger = logging.getLogger("olcb")
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=console, show_path=False, markup=False))
    logger.propagate = False
