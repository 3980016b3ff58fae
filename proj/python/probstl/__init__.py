"""Probabilistic verification of temporal-logic properties for closed-loop
linear stochastic systems.

The native core evaluates signal temporal logic formulas and estimates the
probability that a system satisfies one, via multilevel splitting over the
trajectory distribution.  Scenario documents use the same JSON schema as the
``probstl`` command line tool; results come back as plain dictionaries.
"""

import json as _json

from ._core import (
    ConfigError,
    EstimationError,
    horizon,
    robustness,
)
from . import _core

__all__ = [
    "ConfigError",
    "EstimationError",
    "horizon",
    "robustness",
    "verify",
    "verify_ra",
    "mc",
    "sample",
]


def verify(scenario, base_dir=".", seed=None, threads=None, negate=False, out_dir=""):
    """Estimate the satisfaction probability of a scenario's formula."""
    return _json.loads(
        _core.verify_json(_as_text(scenario), base_dir, seed, threads, negate, out_dir)
    )


def verify_ra(scenario, base_dir=".", seed=None, threads=None, out_dir=""):
    """Estimate the failure probability of a reach-avoid scenario."""
    return _json.loads(
        _core.verify_ra_json(_as_text(scenario), base_dir, seed, threads, out_dir)
    )


def mc(scenario, base_dir=".", seed=None, threads=None, negate=False):
    """Simple-random-sampling baseline estimate on a simulated scenario."""
    return _json.loads(_core.mc_json(_as_text(scenario), base_dir, seed, threads, negate))


def sample(scenario, count, side, out_dir, base_dir=".", seed=None, threads=None):
    """Draw trajectories from the satisfying or violating set; writes a CSV."""
    return _json.loads(
        _core.sample_json(_as_text(scenario), count, side, out_dir, base_dir, seed, threads)
    )


def _as_text(scenario):
    if isinstance(scenario, str):
        return scenario
    return _json.dumps(scenario)
