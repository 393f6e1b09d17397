"""Asynchronous one- and two-level Schwarz solvers for the 2D Poisson problem.

Configurations are plain dicts with the same keys as the CLI's JSON config
(n, P, depth, partitioner, solver, mode, schedule, tol, ...). Missing keys
take their defaults.
"""

import json

from . import _asyncdd
from ._asyncdd import (
    ContractError,
    Problem,
    async_degree,
    poisson_problem,
    rho_hat,
    rho_tilde,
    stress_generations,
)

__all__ = [
    "ContractError",
    "Problem",
    "async_degree",
    "default_config",
    "partition",
    "poisson_problem",
    "rho_hat",
    "rho_tilde",
    "run",
    "solve",
    "stress_generations",
    "verify",
]


def default_config():
    return json.loads(_asyncdd.default_config())


def partition(config=None):
    return _asyncdd.partition(json.dumps(config or {}))


def solve(config=None):
    """Solve once and return the iterate with its statistics."""
    return _asyncdd.solve(json.dumps(config or {}))


def run(config=None):
    """Measured run; returns the record as a dict."""
    return json.loads(_asyncdd.run(json.dumps(config or {})))


def verify(suite="all"):
    """Returns (ok, report text)."""
    return _asyncdd.verify(suite)
