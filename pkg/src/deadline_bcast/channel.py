"""Two-user memoryless erasure broadcast channel.

A slot's reception state is a 2-bit symbol: the high bit is user 1, the low
bit is user 2, and a set bit means the packet was received.  So ``S10`` is a
slot that only user 1 hears and ``S11`` a slot both users hear.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, GuardError

S00, S01, S10, S11 = 0, 1, 2, 3
SYMBOLS = ("00", "01", "10", "11")

# Sum-to-one slack accepted (and renormalised) by ErasureProbs.
NORMALIZE_TOL = 1e-9
MAX_ENUM_T = 12
GENERATOR_NAME = "numpy.PCG64"


def user1_up(symbol: int) -> bool:
    return bool(symbol & 2)


def user2_up(symbol: int) -> bool:
    return bool(symbol & 1)


@dataclass(frozen=True)
class ErasureProbs:
    """Joint per-slot reception probabilities ``eps00, eps01, eps10, eps11``.

    Inputs whose sum is within 1e-9 of one are renormalised; anything further
    off is rejected rather than silently rescaled.
    """

    eps00: float
    eps01: float
    eps10: float
    eps11: float

    def __post_init__(self):
        values = [float(v) for v in (self.eps00, self.eps01, self.eps10, self.eps11)]
        for name, v in zip(("eps00", "eps01", "eps10", "eps11"), values):
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise ConfigError(f"{name}={v!r} is not a probability in [0, 1]")
        total = math.fsum(values)
        if abs(total - 1.0) > NORMALIZE_TOL:
            raise ConfigError(f"erasure probabilities sum to {total!r}, expected 1")
        if total != 1.0:
            values = [v / total for v in values]
        for name, v in zip(("eps00", "eps01", "eps10", "eps11"), values):
            object.__setattr__(self, name, v)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "ErasureProbs":
        if len(values) != 4:
            raise ConfigError(f"expected 4 erasure probabilities, got {len(values)}")
        return cls(*values)

    @classmethod
    def parse(cls, text: str) -> "ErasureProbs":
        """Parse ``"eps00,eps01,eps10,eps11"``."""
        try:
            values = [float(x) for x in text.split(",")]
        except ValueError:
            raise ConfigError(f"malformed eps list {text!r}") from None
        return cls.from_sequence(values)

    @classmethod
    def independent(cls, p1: float, p2: float | None = None) -> "ErasureProbs":
        """Users erased independently with probabilities ``p1`` and ``p2``."""
        if p2 is None:
            p2 = p1
        return cls(p1 * p2, p1 * (1 - p2), (1 - p1) * p2, (1 - p1) * (1 - p2))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.eps00, self.eps01, self.eps10, self.eps11)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def __str__(self) -> str:
        return ",".join(repr(v) for v in self.as_tuple())


class ErasurePattern(tuple):
    """Per-slot reception symbols for one frame, stored as ints 0..3."""

    def __new__(cls, slots: Iterable[int | str] = ()):
        out = []
        for s in slots:
            if isinstance(s, str):
                try:
                    s = SYMBOLS.index(s.strip())
                except ValueError:
                    raise ConfigError(f"malformed pattern symbol {s!r}") from None
            elif isinstance(s, (bool, np.bool_)) or not 0 <= int(s) <= 3:
                raise ConfigError(f"pattern symbol {s!r} outside 0..3")
            out.append(int(s))
        return super().__new__(cls, out)

    @classmethod
    def trusted(cls, slots: Iterable[int]) -> "ErasurePattern":
        """Wrap already-validated symbols without re-checking them."""
        return tuple.__new__(cls, slots)

    @classmethod
    def parse(cls, text: str) -> "ErasurePattern":
        """Parse a comma-separated list such as ``"10,11,00"``; ``|`` is ignored."""
        parts = [p for p in text.replace("|", ",").split(",") if p.strip()]
        return cls(parts)

    def __str__(self) -> str:
        return ",".join(SYMBOLS[s] for s in self)

    def __repr__(self) -> str:
        return f"ErasurePattern({str(self)!r})"


@dataclass(frozen=True)
class DeadlineConfig:
    """Arrival rates and hard deadlines, with ``T2`` a multiple of ``T1``.

    Rates are in units of slot capacity.  The frame length is ``T = T2``.
    """

    lambda1: float
    lambda2: float
    T1: int
    T2: int

    def __post_init__(self):
        for name in ("T1", "T2"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name}={v!r} must be a positive integer")
            object.__setattr__(self, name, int(v))
        if self.T2 % self.T1:
            raise ConfigError(f"T2={self.T2} is not a multiple of T1={self.T1}")
        for name in ("lambda1", "lambda2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name}={v!r} must be a nonnegative real")
            object.__setattr__(self, name, v)

    @property
    def N(self) -> int:
        return self.T2 // self.T1

    @property
    def T(self) -> int:
        return self.T2


@dataclass(frozen=True)
class BlockStats:
    """Symbol counts inside one block of ``T1`` slots."""

    n00: int
    n01: int
    n10: int
    n11: int

    def __post_init__(self):
        if min(self.n00, self.n01, self.n10, self.n11) < 0:
            raise ConfigError(f"negative slot count in {self}")

    @property
    def length(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n00, self.n01, self.n10, self.n11)


def pattern_probability(pattern: Sequence[int], eps: ErasureProbs) -> float:
    """Probability of one erasure pattern under iid slots."""
    counts = [0, 0, 0, 0]
    for s in pattern:
        counts[s] += 1
    p = 1.0
    for e, n in zip(eps.as_tuple(), counts):
        if n:
            p *= e**n
    return p


def block_stats(pattern: Sequence[int], T1: int) -> list[BlockStats]:
    """Split a pattern into blocks of ``T1`` slots and count each symbol."""
    if T1 < 1 or len(pattern) % T1:
        raise ConfigError(f"pattern length {len(pattern)} is not a multiple of T1={T1}")
    out = []
    for start in range(0, len(pattern), T1):
        counts = [0, 0, 0, 0]
        for s in pattern[start:start + T1]:
            counts[s] += 1
        out.append(BlockStats(*counts))
    return out


def sample_patterns(eps: ErasureProbs, T: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` iid frames as an ``(n, T)`` int8 array of symbols.

    Inverse-CDF sampling on ``rng.random``; zero-probability symbols are never
    produced.
    """
    if T < 1:
        raise ConfigError(f"T={T} must be >= 1")
    cdf = np.cumsum(eps.as_array())
    cdf[-1] = 1.0
    u = rng.random((n, T))
    return np.minimum(np.searchsorted(cdf, u, side="right"), 3).astype(np.int8)


def sample_pattern(eps: ErasureProbs, T: int, rng: np.random.Generator) -> ErasurePattern:
    return ErasurePattern(sample_patterns(eps, T, 1, rng)[0].tolist())


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def enumerate_patterns(T: int) -> Iterator[ErasurePattern]:
    """All ``4**T`` patterns in lexicographic order (00 < 01 < 10 < 11)."""
    if T > MAX_ENUM_T:
        raise GuardError(f"refusing to enumerate 4**{T} patterns (T > {MAX_ENUM_T})")
    if T < 0:
        raise ConfigError(f"T={T} must be nonnegative")
    for slots in itertools.product(range(4), repeat=T):
        yield ErasurePattern(slots)


@lru_cache(maxsize=16)
def pattern_array(T: int) -> np.ndarray:
    """All patterns of length ``T`` as a read-only ``(4**T, T)`` array, same order."""
    if T > MAX_ENUM_T:
        raise GuardError(f"refusing to enumerate 4**{T} patterns (T > {MAX_ENUM_T})")
    idx = np.arange(4**T, dtype=np.int64)
    shifts = 2 * np.arange(T - 1, -1, -1)
    arr = ((idx[:, None] >> shifts) & 3).astype(np.int8)
    arr.flags.writeable = False
    return arr


def multinomial(n: int, parts: Sequence[int]) -> int:
    out = math.factorial(n)
    for k in parts:
        out //= math.factorial(k)
    return out


def enumerate_block_configs(T1: int) -> Iterator[tuple[BlockStats, int]]:
    """Every split of ``T1`` slots into four symbol counts, with its multinomial weight."""
    if T1 < 1:
        raise ConfigError(f"T1={T1} must be >= 1")
    for n00 in range(T1 + 1):
        for n01 in range(T1 - n00 + 1):
            for n10 in range(T1 - n00 - n01 + 1):
                n11 = T1 - n00 - n01 - n10
                yield BlockStats(n00, n01, n10, n11), multinomial(T1, (n00, n01, n10, n11))
