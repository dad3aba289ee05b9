"""Python front end for the peierls-lab pipeline.

Configurations are plain dicts with the same schema as the JSON files
accepted by the ``peierls-lab`` command line tool.
"""

import json
import os

from . import _core
from ._core import ConfigError, InvariantError, NumericalError, harper_butterfly, spectral_distance

__all__ = [
    "ConfigError",
    "InvariantError",
    "NumericalError",
    "config_hash",
    "harper_butterfly",
    "load_config",
    "run",
    "spectral_distance",
    "version",
]


def version():
    return _core.version()


def load_config(path):
    with open(path) as f:
        cfg = json.load(f)
    _core.check_config(json.dumps(cfg))
    return cfg


def config_hash(cfg):
    return _core.config_hash(json.dumps(cfg))


def run(command, cfg, out_dir):
    """Run one pipeline stage and return its JSON summary as a dict."""
    return json.loads(_core.run(command, json.dumps(cfg), os.fspath(out_dir)))
