"""Deterministic 64-bit RNG for bit-reproducible training runs."""

_MASK64 = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D


class Xorshift64Star:
    """xorshift64* with the canonical 12/25/27 shift triple.

    Used instead of random.Random so weight initialization and epoch
    shuffling reproduce bit-for-bit across Python versions and platforms.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64
        if self.state == 0:
            # zero is a fixed point of the xorshift step
            self.state = 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK64

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform float in [lo, hi) built from the top 53 bits."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            seq[i], seq[j] = seq[j], seq[i]
