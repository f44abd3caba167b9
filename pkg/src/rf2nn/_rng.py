"""Counter-seeded SplitMix64 random stream.

Every generated sample owns one stream derived from ``(seed, index)``, so any
stream position can be reproduced without replaying the ones before it. The
compiled kernels implement the identical recurrence; both backends therefore
produce bit-identical samples.
"""

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53
TWO_PI = 6.283185307179586


def mix64(z):
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def stream_state(seed, index):
    """Initial state of stream ``index`` under ``seed``."""
    return mix64((mix64(seed & MASK64) + (index & MASK64) * GOLDEN) & MASK64)


class RngStream:
    """Scalar random source: uniforms in [0, 1) and Box-Muller normals."""

    __slots__ = ("state",)

    def __init__(self, seed=0, index=0):
        self.state = stream_state(seed, index)

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self):
        return (self.next_u64() >> 11) * _TO_UNIT

    def normal(self):
        # one normal per two uniforms; the sine branch is discarded
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)

    def below(self, n):
        """Uniform integer in [0, n)."""
        return int(self.uniform() * n)
