import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named consumer of one master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def child_seed(seed: int, name: str) -> int:
    return int(substream(seed, name).integers(0, 2**31 - 1))
