"""Universal inverter controller and phasor microgrid simulator."""

import json
import os

from ._csync import CsyncError, ParseError, ValidationError, format_number, guard_validate
from . import _csync

__all__ = [
    "CsyncError",
    "ParseError",
    "ValidationError",
    "format_number",
    "guard_validate",
    "resolve_config",
    "run",
]


def _source(config):
    if isinstance(config, dict):
        return json.dumps(config)
    return os.fspath(config)


def resolve_config(config):
    """Validate a scenario (path, JSON text or dict) and return it with defaults filled in."""
    return json.loads(_csync.resolve_config(_source(config)))


def run(config, out=None, decimation=None, seed=None):
    """Run a scenario. Returns (metrics dict, list of (t, type, target, detail))."""
    metrics, events = _csync.run(_source(config), None if out is None else os.fspath(out), decimation, seed)
    return json.loads(metrics), events
