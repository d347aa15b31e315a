"""Counter-based deterministic random streams.

Every random draw in this package is addressed, not sequenced: a draw is a
pure function of a 64-bit key and a 64-bit counter.  That is what makes the
parallel engine reproducible — any worker can generate any batch of any
stream without coordination, and the result never depends on scheduling.

The generator is the splitmix64 construction: the state for counter ``c`` is
``key + (c+1)*GOLDEN`` and the output is a finalizer with full avalanche.
Keys for distinct (seed, state, slot) tasks are derived with a chained hash
of the address tuple; the engine additionally collision-checks the derived
keys of a run's task set.

All arithmetic here is host-side Python integers masked to 64 bits.  The
batch kernels in :mod:`ppsv.kernels` reimplement the same function on uint64
arrays; bitwise agreement between the two is enforced by tests.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 2**-53; a 53-bit mantissa drawn from the top of the word gives a uniform
# double in [0, 1), never 1.0.
_DOUBLE_SCALE = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """Finalize a 64-bit state into an output word (splitmix64 finalizer)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def draw_u64(key: int, counter: int) -> int:
    """The ``counter``-th output word of the stream identified by ``key``."""
    return mix64((key + ((counter + 1) * GOLDEN)) & _MASK64)


def draw_double(key: int, counter: int) -> float:
    """The ``counter``-th uniform double in [0, 1) of stream ``key``."""
    return (draw_u64(key, counter) >> 11) * _DOUBLE_SCALE


def derive_key(master_seed: int, *parts: int) -> int:
    """Hash an address tuple (seed plus integer parts) into a stream key.

    Each part is folded in with a position-dependent salt and a full
    finalizer round, so permuted tuples do not collide structurally.
    """
    h = mix64(master_seed & _MASK64)
    for i, p in enumerate(parts, start=1):
        h = mix64((h + i * GOLDEN) ^ ((p & _MASK64) * _MIX1 & _MASK64))
    return h


class RngStream:
    """A positioned view of one counter-based stream.

    ``next_u64``/``next_double`` consume one counter each.  ``at`` returns an
    independently positioned view of the same stream; reading one view never
    affects another.
    """

    __slots__ = ("key", "pos")

    def __init__(self, key: int, pos: int = 0):
        if pos < 0:
            raise ValueError("pos must be >= 0")
        self.key = key & _MASK64
        self.pos = pos

    @classmethod
    def from_parts(cls, master_seed: int, *parts: int, pos: int = 0) -> "RngStream":
        return cls(derive_key(master_seed, *parts), pos)

    def next_u64(self) -> int:
        v = draw_u64(self.key, self.pos)
        self.pos += 1
        return v

    def next_double(self) -> float:
        v = draw_double(self.key, self.pos)
        self.pos += 1
        return v

    def at(self, pos: int) -> "RngStream":
        return RngStream(self.key, pos)

    def __repr__(self) -> str:
        return f"RngStream(key=0x{self.key:016x}, pos={self.pos})"
