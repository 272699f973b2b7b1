"""Koopman models by data-driven encoding (DDE) and EDMD."""

import json

from ._kdde import (
    Dictionary,
    KddeError,
    Mesh,
    Model,
    build_mesh,
    fit,
    mlp_forward,
    pendulum_step,
    read_dataset,
    sse_grid,
    write_dataset,
)
from ._kdde import generate as _generate

__all__ = [
    "Dictionary",
    "KddeError",
    "Mesh",
    "Model",
    "build_mesh",
    "fit",
    "generate",
    "mlp_forward",
    "pendulum_step",
    "read_dataset",
    "sse_grid",
    "write_dataset",
]


def generate(kind, n, seed=7, **kwargs):
    """Pendulum transitions as (current, next, provenance dict).

    kind is "uniform", "gaussian" or "traj".
    """
    current, nxt, provenance = _generate(kind, n, seed, **kwargs)
    return current, nxt, json.loads(provenance)
