"""Python access to the hwnas search engine.

Genotypes and configurations cross the boundary as JSON; the helpers below
accept plain dicts as well.
"""

import json

from . import _core
from ._core import (
    BadReference,
    ConfigError,
    DegenerateCurve,
    Error,
    FormatError,
    UnsatisfiableSpace,
    cli,
    crowding_distance,
    hypervolume,
    non_dominated_sort,
    select_epsilons,
    squash,
)

__all__ = [
    "BadReference",
    "ConfigError",
    "DegenerateCurve",
    "Error",
    "FormatError",
    "UnsatisfiableSpace",
    "cli",
    "crowding_distance",
    "estimate",
    "genotype_hash",
    "hypervolume",
    "non_dominated_sort",
    "random_genotype",
    "read_run_log",
    "search",
    "select_epsilons",
    "squash",
    "validation_error",
]


def _text(doc):
    if doc is None:
        return ""
    return doc if isinstance(doc, str) else json.dumps(doc)


def estimate(genotype, config=None):
    return _core.estimate(_text(genotype), _text(config))


def random_genotype(seed, config=None):
    return json.loads(_core.random_genotype(seed, _text(config)))


def validation_error(genotype, config=None):
    return _core.validation_error(_text(genotype), _text(config))


def genotype_hash(genotype):
    return _core.genotype_hash(_text(genotype))


def search(config=None, seed=None, strategy="nsga2"):
    """Run log records as a list of dicts."""
    return read_run_log(_core.search(_text(config), seed, strategy))


def read_run_log(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]
