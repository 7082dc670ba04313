"""Seeded, splittable random streams built on numpy's Philox generator."""

from __future__ import annotations

import numpy as np

_NOISE, _SELECT, _CHILD = 0, 1, 2


class RandomStream:
    """Counter-based random stream with two independent substreams.

    Gaussian increments and any auxiliary draws come from the *noise*
    substream; block selection in SLMC uses the *selection* substream.
    Keeping them apart means LMC, PLMC and SLMC consume identical noise
    variates for the same seed, which is what the reduction checks rely on.

    ``split(i)`` returns child stream ``i``. Children depend only on the
    root seed and the index path, never on how much a parent was used.
    """

    def __init__(self, seed: int = 0, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(_key)
        self._noise = self._generator(_NOISE)
        self._select = self._generator(_SELECT)

    def _generator(self, tag: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key + (tag,))
        return np.random.Generator(np.random.Philox(ss))

    def split(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.key + (_CHILD, int(index)))

    @property
    def generator(self) -> np.random.Generator:
        return self._noise

    def normal(self, size=None) -> np.ndarray:
        return self._noise.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._noise.uniform(low, high, size)

    def select(self, size=None) -> np.ndarray:
        return self._select.random(size)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, key={self.key})"


def as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    if rng is None:
        return RandomStream(0)
    return RandomStream(int(rng))
