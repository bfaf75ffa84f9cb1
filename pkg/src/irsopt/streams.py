"""Named, splittable random streams.

Every sampling routine in this package takes an explicit ``rng`` argument,
either an integer seed or a ``numpy.random.Generator``.  Integer seeds are
expanded into independent child streams keyed by a purpose name, so the
values drawn for one quantity do not shift when an unrelated quantity
changes shape.  That property is what makes common-random-number pairing
across parameter sweeps work: two runs with the same seed share the draws
of every same-shaped quantity.

Generator inputs are split with ``Generator.spawn``; the children are then
deterministic given the generator state but not name-keyed.
"""
from __future__ import annotations

import hashlib
from typing import Sequence, Union

import numpy as np

RngLike = Union[int, np.integer, np.random.SeedSequence, np.random.Generator]


def _name_key(name: str) -> int:
    """Stable 64-bit key for a stream name."""
    digest = hashlib.blake2s(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def named_child(rng: RngLike, name: str) -> np.random.Generator:
    """Derive one child generator for the given purpose name."""
    if isinstance(rng, np.random.Generator):
        return rng.spawn(1)[0]
    if isinstance(rng, np.random.SeedSequence):
        entropy = list(np.atleast_1d(rng.entropy)) if rng.entropy is not None else [0]
        return np.random.default_rng(np.random.SeedSequence(entropy + [_name_key(name)]))
    seed = int(rng)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, _name_key(name)]))


def named_children(rng: RngLike, names: Sequence[str]) -> dict[str, np.random.Generator]:
    """One independent child generator per name.

    With an integer seed the children depend only on (seed, name); with a
    Generator they are spawned in order of ``names``.
    """
    if isinstance(rng, np.random.Generator):
        spawned = rng.spawn(len(names))
        return dict(zip(names, spawned))
    return {name: named_child(rng, name) for name in names}


def child_seed(seed: int, name: str) -> int:
    """A derived integer seed, for APIs that persist seeds in artifacts."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    mixed = hashlib.blake2s(
        seed.to_bytes(16, "big", signed=False) + name.encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(mixed, "big") >> 1  # keep it positive in signed contexts


def crandn(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with per-element variance ``var``."""
    if var < 0:
        raise ValueError(f"variance must be non-negative, got {var}")
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
