"""STAR-RIS assisted mobile edge computing: joint beamforming, surface and energy
optimization. Thin wrapper over the C++ core; configs and reports are plain dicts."""

import csv
import io
import json

from . import _core

__all__ = [
    "SCHEMA_VERSION",
    "default_config",
    "sample_channels",
    "optimize",
    "run_baseline",
    "run_sweep",
]

SCHEMA_VERSION = _core.schema_version


def default_config(n_elements=30, n_antennas=10, t_users=4, r_users=4):
    return json.loads(_core.default_config_json(n_elements, n_antennas, t_users, r_users))


def sample_channels(config, seed):
    """Channel realization as the JSON dump used by the CLI (complex values as [re, im])."""
    return json.loads(_core.channels_json(json.dumps(config), seed))


def optimize(config, seed, protocol=None):
    """Runs BCD for one channel realization. protocol overrides config["protocol"]."""
    return json.loads(_core.optimize_json(json.dumps(config), seed, protocol or ""))


def run_baseline(name, config, seed):
    """name: conventional, zf, equal-energy or equal-time."""
    return json.loads(_core.baseline_json(name, json.dumps(config), seed))


def run_sweep(spec):
    """Returns the result rows as dicts with numeric fields converted."""
    text = _core.sweep_csv(json.dumps(spec))
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    rows = []
    for row in csv.DictReader(io.StringIO("\n".join(lines))):
        out = {}
        for key, value in row.items():
            if key in ("scheme", "status"):
                out[key] = value
            elif key in ("value", "realization", "seed", "iterations"):
                out[key] = int(value)
            else:
                out[key] = float(value) if value else None
        rows.append(out)
    return rows
