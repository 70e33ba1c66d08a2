"""Deterministic random-number streams for parallel Monte Carlo.

Every stream is keyed by (master seed, realization index, role, salt) and
derived through numpy's SeedSequence spawn-key mechanism, so a realization
draws the same numbers no matter which worker runs it or in what order.
Roles keep logically distinct randomness apart: coupled coarse/fine runs
must consume identical Brownian numbers while acceptance coins and
initial-condition draws vary freely.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

ROLES = {
    "brownian": 1,
    "metropolis-uniform": 2,
    "init": 3,
}


class RngStreamSpec(NamedTuple):
    """Key of one logical random stream."""

    master_seed: int
    stream_index: int
    role: str


def stream_generator(spec: RngStreamSpec, salt: int = 0) -> np.random.Generator:
    """PCG64 generator for the given stream key.

    salt separates substreams within one role, e.g. the per-step-size
    Metropolis coins of a convergence study.
    """
    if spec.role not in ROLES:
        raise ValueError(f"unknown stream role {spec.role!r}; expected one of {sorted(ROLES)}")
    seq = np.random.SeedSequence(
        spec.master_seed, spawn_key=(spec.stream_index, ROLES[spec.role], salt)
    )
    return np.random.Generator(np.random.PCG64(seq))


def draw_gaussian_vector(gen: np.random.Generator, n: int) -> np.ndarray:
    """n independent standard normals from gen's current position."""
    return gen.standard_normal(n)
