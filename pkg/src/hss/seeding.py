"""Deterministic substreams: every random draw descends from one root seed."""
from __future__ import annotations

import hashlib

import numpy as np


def _purpose_tag(purpose: str) -> int:
    return int.from_bytes(hashlib.sha256(purpose.encode()).digest()[:8], "little")


def substream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, purpose, index); stable across runs."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_purpose_tag(purpose), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def subseed(seed: int, purpose: str, index: int = 0) -> int:
    """A derived integer seed, for components that take seeds rather than generators."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_purpose_tag(purpose), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])
