"""Python bindings for the dynscale engine.

Pure helpers (answer extraction, voting, uncertainty, priorities) map one to
one onto the C++ functions. Runs take and return plain dicts in the same
shape as the run directory files.
"""

import json

from ._core import (
    DynscaleError,
    accuracy_curve,
    answer_counts,
    effective_allocation_rate,
    extract_answer,
    inverse_margin,
    majority_vote,
    normalize_answer,
    normalized_entropy,
    sampling_priority,
    select_subset,
    smooth,
    variation_ratio,
)
from . import _core

__all__ = [
    "DynscaleError",
    "accuracy_curve",
    "answer_counts",
    "effective_allocation_rate",
    "extract_answer",
    "inverse_margin",
    "load_config",
    "majority_vote",
    "normalize_answer",
    "normalized_entropy",
    "read_run",
    "replay",
    "run",
    "sampling_priority",
    "select_subset",
    "smooth",
    "variation_ratio",
]


def load_config(dataset, profile, **overrides):
    """Default run configuration over a query set and simulator profile.

    Top-level keys (policy, total_samples, seed) may be passed directly;
    nested sections are merged key by key.
    """
    config = json.loads(_core.config_from_files(str(dataset), str(profile)))
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            config[key].update(value)
        else:
            config[key] = value
    return config


def run(config, out_dir=None):
    """Execute a run. Writes a run directory too when out_dir is given."""
    text = json.dumps(config)
    if out_dir is None:
        return json.loads(_core.run_json(text))
    return json.loads(_core.run_to_dir(text, str(out_dir)))


def read_run(run_dir):
    return json.loads(_core.read_run_dir(str(run_dir)))


def replay(run_dir):
    return json.loads(_core.replay_dir(str(run_dir)))
