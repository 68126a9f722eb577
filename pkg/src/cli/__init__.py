from .commands import COMMANDS, Command, create_command
from .config_parser import RunConfig, parse_config

__all__ = ["COMMANDS", "Command", "RunConfig", "create_command", "parse_config"]
