"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, trajectory, purpose)``.
Value ``v`` of a stream is a pure function of that key and ``v``, so draws can
be taken in any order, in any chunking, from any worker, and still agree.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

U64 = (1 << 64) - 1
PURPOSES = 16  # purposes per trajectory in the key layout

BROWNIAN = 0
BRIDGE = 1
REFINE = 2  # REFINE + depth for dt/2 retries


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


class KeyedStream:
    """Random access into one Philox stream."""

    def __init__(self, seed: int, trajectory: int, purpose: int):
        if not 0 <= purpose < PURPOSES:
            raise ValueError(f"purpose {purpose} out of range")
        if trajectory < 0:
            raise ValueError("trajectory index must be nonnegative")
        self.key = (check_seed(seed), trajectory * PURPOSES + purpose)

    def raw(self, start: int, count: int) -> np.ndarray:
        """Raw 64-bit outputs ``start .. start+count-1``."""
        seed, lane = self.key
        bg = np.random.Philox(key=seed | (lane << 64))
        # one counter increment yields four outputs
        block, skip = divmod(int(start), 4)
        if block:
            bg.advance(block)
        return bg.random_raw(skip + count)[skip:]

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Uniforms in the open interval (0, 1), 53-bit resolution."""
        r = self.raw(start, count)
        return ((r >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, start: int, count: int) -> np.ndarray:
        """Standard normals by inversion, so value ``v`` only depends on raw output ``v``."""
        return ndtri(self.uniforms(start, count))


def brownian_block(seed: int, trajectories, step0: int, nsteps: int, dim: int, dt: float) -> np.ndarray:
    """Increments for ``trajectories`` x steps ``step0 .. step0+nsteps-1``; shape (B, nsteps, dim)."""
    sd = np.sqrt(dt)
    out = np.empty((len(trajectories), nsteps, dim))
    for r, j in enumerate(trajectories):
        out[r] = KeyedStream(seed, int(j), BROWNIAN).normals(step0 * dim, nsteps * dim).reshape(nsteps, dim)
    return out * sd


def uniform_block(seed: int, trajectories, step0: int, nsteps: int, width: int) -> np.ndarray:
    out = np.empty((len(trajectories), nsteps, width))
    for r, j in enumerate(trajectories):
        out[r] = KeyedStream(seed, int(j), BRIDGE).uniforms(step0 * width, nsteps * width).reshape(nsteps, width)
    return out


def bridge_midpoint(seed: int, trajectory: int, step: int, depth: int, sub: int, dB: np.ndarray, dt: float) -> np.ndarray:
    """Brownian value at the middle of a step of length ``dt`` with total increment ``dB``.

    ``depth`` >= 1 counts halvings; ``sub`` numbers the interval at that depth.
    """
    if not 1 <= depth <= PURPOSES - REFINE:
        raise ValueError(f"refinement depth {depth} out of range")
    d = len(dB)
    xi = KeyedStream(seed, trajectory, REFINE + depth - 1).normals((step * (1 << (depth - 1)) + sub) * d, d)
    return 0.5 * dB + 0.5 * np.sqrt(dt) * xi
