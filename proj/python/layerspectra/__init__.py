"""Quantum layers over rotational hypersurfaces in R^4.

Thin wrapper over the C++ core: configs go in as dicts, results come back
as dicts decoded from the same JSON the CLI writes.
"""

import json

from . import _layerspectra as _core
from ._layerspectra import AdmissibilityError, ConfigError, Error, bessel_k, eta_closed, eta_quadrature

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "Error",
    "bessel_k",
    "certify",
    "eta_closed",
    "eta_quadrature",
    "input_hash",
    "k_total",
    "normalize_config",
    "run",
    "validate",
    "version",
]

__version__ = "0.1.0"


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def version():
    return _core.version()


def normalize_config(config, base_dir="."):
    return json.loads(_core.normalize_config(_text(config), base_dir))


def input_hash(config, base_dir="."):
    return _core.input_hash(_text(config), base_dir)


def validate(config, base_dir="."):
    return json.loads(_core.validate(_text(config), base_dir))


def k_total(config, base_dir="."):
    return json.loads(_core.k_total(_text(config), base_dir))


def certify(config, base_dir="."):
    return json.loads(_core.certify(_text(config), base_dir))


def run(config, command, out="", workers=1, base_dir="."):
    """Run a CLI command; returns (exit_code, run_dir, record, message)."""
    code, run_dir, record, message = _core.run(_text(config), command, out, workers, base_dir)
    return code, run_dir, json.loads(record), message
