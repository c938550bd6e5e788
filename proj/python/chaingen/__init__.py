"""Python bindings for the chaingen activity-chain generator."""

import json
import os

from . import _chaingen
from ._chaingen import (
    ChaingenError,
    dtw_distance,
    js_divergence,
    ks_statistic,
    objective_quality,
    pairwise_dtw,
    score_gd,
    select_k,
    diversity,
    total_quality,
    ward_cluster,
)

__all__ = [
    "ChaingenError",
    "default_config",
    "discretize",
    "diversity",
    "dtw_distance",
    "evaluate",
    "generate",
    "js_divergence",
    "ks_statistic",
    "load_chains",
    "objective_quality",
    "pairwise_dtw",
    "schedule",
    "score_gd",
    "select_k",
    "total_quality",
    "ward_cluster",
]


def default_config():
    return json.loads(_chaingen.default_config())


def generate(config=None, *, workers=1, samples=1, seed=0, out="", base_dir="."):
    """Run a batch of persona-days. Returns {"metrics": ..., "chains": [...]}."""
    if config is None:
        config = {}
    elif isinstance(config, (str, os.PathLike)):
        path = os.fspath(config)
        with open(path) as f:
            config = json.load(f)
        base_dir = os.path.dirname(os.path.abspath(path))
    text = _chaingen.generate(json.dumps(config), os.fspath(base_dir), workers, samples, seed, os.fspath(out))
    return json.loads(text)


def load_chains(path):
    return json.loads(_chaingen.read_chains(os.fspath(path)))


def _chains(x):
    if isinstance(x, (str, os.PathLike)):
        return load_chains(x)
    return list(x)


def evaluate(generated, reference=None, *, options=None, q_subjective=None):
    """Evaluate chains (list of dicts or a JSONL path) against a reference corpus."""
    gen = json.dumps(_chains(generated))
    ref = None if reference is None else json.dumps(_chains(reference))
    text = _chaingen.evaluate(gen, ref, json.dumps(options or {}), q_subjective)
    return json.loads(text)


def discretize(chain):
    return _chaingen.discretize(json.dumps(chain))


def schedule(events, tasks, constraints, context=None):
    payload = {"op": "schedule", "events": events, "tasks": tasks, "constraints": constraints}
    return json.loads(_chaingen.temporal(json.dumps(payload), json.dumps(context or {})))
