"""Passivity-based gradient-play dynamics for generalized Nash equilibrium seeking."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import bench_matrix as _bench_matrix
from ._core import run_experiment as _run_experiment
from ._core import verify_compensator as _verify_compensator

__version__ = "0.1.0"


def run_experiment(config, output_dir=None):
    """Runs a config dict (or JSON text); returns (exit_code, summary dict)."""
    text = config if isinstance(config, str) else _json.dumps(config)
    code, summary = _run_experiment(text, None if output_dir is None else str(output_dir))
    return code, _json.loads(summary)


def bench_matrix(name="full"):
    """List of (config dict, expected exit code)."""
    return [(_json.loads(text), code) for text, code in _bench_matrix(name)]


def verify_compensator(block):
    """Certificate report for an LtiBlock as a dict."""
    return _json.loads(_verify_compensator(block))
