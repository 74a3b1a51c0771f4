"""
Command line: run configuration and the ``maskworld`` entry point.
"""

from .config import RunConfig, load_config, resolve_config, write_resolved, add_config_flags
from .main import main, build_parser, output_lock

__all__ = [
    'RunConfig', 'load_config', 'resolve_config', 'write_resolved', 'add_config_flags',
    'main', 'build_parser', 'output_lock',
]
