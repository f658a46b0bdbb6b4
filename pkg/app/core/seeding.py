"""
Named random sub-streams derived from one root seed.
"""

from typing import Union
import zlib

import numpy as np
import torch

Key = Union[str, int]


def _key_to_int(key: Key) -> int:
    if isinstance(key, int):
        return key
    return zlib.crc32(key.encode("utf-8"))


def seed_sequence(root_seed: int, *keys: Key) -> np.random.SeedSequence:
    """
    Build the seed sequence for a named sub-stream.

    Args:
        root_seed: Command-level root seed
        keys: Stream name followed by any participant/day/fold keys

    Returns:
        np.random.SeedSequence: Independent, reproducible sequence
    """
    return np.random.SeedSequence(entropy=root_seed, spawn_key=tuple(_key_to_int(k) for k in keys))


def sub_rng(root_seed: int, *keys: Key) -> np.random.Generator:
    """Numpy generator for a named sub-stream."""
    return np.random.default_rng(seed_sequence(root_seed, *keys))


def sub_seed(root_seed: int, *keys: Key) -> int:
    """Plain 32-bit integer seed for libraries that want one (sklearn, torch)."""
    return int(seed_sequence(root_seed, *keys).generate_state(1, dtype=np.uint32)[0])


def torch_generator(root_seed: int, *keys: Key) -> torch.Generator:
    """Torch CPU generator for a named sub-stream."""
    generator = torch.Generator()
    generator.manual_seed(sub_seed(root_seed, *keys))
    return generator
