"""Python access to the OTA-FL simulator core.

Scalar channel helpers are exposed directly. Functions taking a network,
problem or experiment configuration accept plain dicts and return dicts.
"""

import json
import os

from ._core import (
    ConfigError,
    alpha_m,
    alpha_max,
    bias_term,
    gamma_max,
    pathloss_gain,
    sample_fading,
    truncation_probability,
)
from . import _core

__all__ = [
    "ConfigError",
    "alpha_m",
    "alpha_max",
    "bias_term",
    "config_hash",
    "design",
    "gamma_max",
    "grid_eta",
    "lcpc",
    "make_design",
    "pathloss_gain",
    "report",
    "run",
    "sample_fading",
    "sca_design",
    "truncation_probability",
    "validate_config",
    "zeta",
]


def _dump(obj):
    return json.dumps(obj if obj is not None else {})


def make_design(gamma, network):
    """Participation weights and post-scaler for pre-scalers `gamma`.

    `network` has keys lambda, e_s, n0, d, g_max.
    """
    return json.loads(_core._make_design(list(gamma), _dump(network)))


def zeta(gamma, network, sigma=()):
    return json.loads(_core._zeta(list(gamma), _dump(network), list(sigma)))


def lcpc(network):
    return json.loads(_core._lcpc(_dump(network)))


def sca_design(problem):
    """Runs the SCA designer on a problem dict (lambda, g_max, d, e_s, n0, eta, L, kappa, sigma)."""
    return json.loads(_core._sca_design(_dump(problem)))


def validate_config(config=None):
    """Returns the fully populated configuration, or raises ConfigError."""
    return json.loads(_core._validate_config(_dump(config)))


def config_hash(config=None):
    return _core._config_hash(_dump(config))


def run(config=None, out_dir="", overwrite=False):
    """Runs every scheme x seed cell; returns the run metadata."""
    return json.loads(_core._run(_dump(config), os.fspath(out_dir), overwrite))


def design(config=None):
    return json.loads(_core._design(_dump(config)))


def report(metric_files, out_dir, target_accuracy=0.8):
    files = [os.fspath(f) for f in metric_files]
    return json.loads(_core._report(files, os.fspath(out_dir), target_accuracy))


def grid_eta(config=None, out_dir=""):
    return json.loads(_core._grid_eta(_dump(config), os.fspath(out_dir)))
