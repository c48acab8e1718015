"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(master seed, index)``; the
high word of the counter carries a domain tag so that ensemble trajectories
and conformance checks never share a stream. Any stream can be rebuilt from
its three integers, which is what makes trajectories replayable and parallel
runs identical to serial ones.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Stream", "DOMAIN_TRAJECTORY"]

DOMAIN_TRAJECTORY = 0

_MASK64 = (1 << 64) - 1


class Stream:
    """Buffered source of uniform doubles in [0, 1).

    Exposes ``random()`` so it can be passed anywhere a ``random.Random`` or
    ``numpy.random.Generator`` would be accepted.
    """

    __slots__ = ("seed", "index", "domain", "_gen", "_it", "_block")

    def __init__(self, seed: int, index: int = 0, domain: int = 0, block: int = 512):
        if seed < 0 or index < 0 or domain < 0:
            raise ValueError("seed, index and domain must be non-negative")
        self.seed = int(seed) & _MASK64
        self.index = int(index) & _MASK64
        self.domain = int(domain) & _MASK64
        key = self.seed | (self.index << 64)
        counter = np.array([0, 0, 0, self.domain], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        self._block = block
        self._it = iter(())

    def random(self) -> float:
        try:
            return next(self._it)
        except StopIteration:
            self._it = iter(self._gen.random(self._block).tolist())
            return next(self._it)

    def __repr__(self) -> str:
        return f"Stream(seed={self.seed}, index={self.index}, domain={self.domain})"
