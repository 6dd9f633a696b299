"""Deterministic, addressable random streams.

All stochastic code draws from a Philox counter-based generator keyed by a
(seed, stream_id) pair, so any individual episode, evaluation trial or
initialization can be replayed bit-for-bit on any platform. Stream ids are
partitioned into fixed domains so training episodes, evaluation rollouts and
parameter initialization never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# stream_id domain offsets (disjoint by construction for realistic run sizes)
TRAIN_DOMAIN = 0                  # + episode index
EVAL_DOMAIN = 1 << 39             # + checkpoint_index * EVAL_STRIDE + trial
FINAL_EVAL_DOMAIN = 1 << 41       # + trial index
INIT_DOMAIN = 1 << 42             # + component index (policy, critics, ...)
WALKFORWARD_DOMAIN = 1 << 43      # + month index * a small stride

EVAL_STRIDE = 1 << 20


@dataclass(frozen=True)
class RngStream:
    """Address of one reproducible random stream."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = [self.seed & _MASK64, self.stream_id & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))

    def derive(self, offset: int) -> "RngStream":
        """The stream at ``stream_id + offset`` under the same seed."""
        return RngStream(self.seed, (self.stream_id + offset) & _MASK64)


def sample_categorical(gen: np.random.Generator, probs: np.ndarray) -> int:
    """Draw an index from a probability vector using a single uniform."""
    u = gen.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)
