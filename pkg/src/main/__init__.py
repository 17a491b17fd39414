# Command-line application shell
from .cli import run, build_parser, configure_logging
from .commands import COMMANDS, read_panel, resolve_weights
