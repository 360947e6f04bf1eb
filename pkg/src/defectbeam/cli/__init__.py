"""Config-driven command-line front end."""

from .app import ANALYSES, RunReport, build_parser, main, run
from .config import ConfigError, RunConfig, load_config
from .expressions import Expression, ExpressionError, parse_expression
from .output import read_table, write_table

__all__ = ["ANALYSES", "ConfigError", "Expression", "ExpressionError", "RunConfig", "RunReport",
           "build_parser", "load_config", "main", "parse_expression", "read_table", "run", "write_table"]
