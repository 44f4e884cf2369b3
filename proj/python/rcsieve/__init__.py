"""Series estimation of correlated random coefficient models."""

import json

from ._core import (
    RcsieveError,
    __version__,
    bands,
    cross_validate,
    fit,
    generate,
    sample_truncnorm,
    simulate_json,
    truncnorm_variance,
)

__all__ = [
    "RcsieveError",
    "__version__",
    "bands",
    "cross_validate",
    "fit",
    "generate",
    "sample_truncnorm",
    "simulate",
    "truncnorm_variance",
]


def simulate(design, n=500, reps=100, seed=1, rho_x=0.0, fixed_x=False, order=None, threads=1):
    """Run a replication study and return its summary as a dict."""
    return json.loads(
        simulate_json(design, n=n, reps=reps, seed=seed, rho_x=rho_x, fixed_x=fixed_x, order=order, threads=threads)
    )
