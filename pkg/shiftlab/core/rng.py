"""
Deterministic, splittable randomness.

Every random draw in the toolkit goes through an `RngSeed`. The seed is fed to
numpy's `SeedSequence`, whose spawn keys give statistically independent
sub-streams for labels such as ("repetition", 3) or ("folds", "young"). The
bit generator is `PCG64`, so identical (seed, labels) pairs reproduce identical
draws on any platform.
"""

import zlib
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

MAX_SEED = 2**64 - 1

SeedLabel = Union[int, str]


def _label_key(label: SeedLabel) -> int:
    """Maps a sub-stream label to a nonnegative integer spawn key."""
    if isinstance(label, bool):
        raise TypeError("Boolean labels are ambiguous; use an int or a str.")
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"Sub-stream label must be nonnegative, got {label}.")
        return int(label)
    if isinstance(label, str):
        # crc32 is stable across runs and interpreters, unlike hash().
        return zlib.crc32(label.encode("utf-8"))
    raise TypeError(f"Unsupported sub-stream label type: {type(label).__name__}")


@dataclass(frozen=True)
class RngSeed:
    """A 64-bit seed plus the path of sub-stream labels that led to it."""

    seed: int
    spawn_key: Tuple[int, ...] = ()

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise TypeError(f"Seed must be an integer, got {type(self.seed).__name__}.")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValueError(f"Seed must lie in [0, 2**64 - 1], got {self.seed}.")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "spawn_key", tuple(int(k) for k in self.spawn_key))

    def substream(self, *labels: SeedLabel) -> "RngSeed":
        """Returns the seed of an independent child stream named by `labels`."""
        return RngSeed(self.seed, self.spawn_key + tuple(_label_key(l) for l in labels))

    def generator(self) -> np.random.Generator:
        """Builds a fresh generator positioned at the start of this stream."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        return np.random.Generator(np.random.PCG64(sequence))


def as_seed(seed: Union["RngSeed", int]) -> RngSeed:
    """Accepts either a plain integer or an RngSeed."""
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(seed)
