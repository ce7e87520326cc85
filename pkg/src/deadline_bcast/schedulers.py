"""Scheduling policies for one frame of the two-user erasure broadcast channel.

``greedy_full_csi`` sees the whole frame's erasure pattern in advance.  The two
causal policies handle equal deadlines with whole packets:
``current_csi_policy`` sees the state of the slot it is about to use and
``past_csi_policy`` only learns whether its transmission got through.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .channel import S01, S10, S11, SYMBOLS, DeadlineConfig, ErasureProbs, ErasurePattern
from .errors import ConfigError

if TYPE_CHECKING:
    from .outage import CostToGoTable

MET_TOL = 1e-9
# Residual demand below this is treated as fully served.
_RESIDUAL_EPS = 1e-12


class CsiMode(enum.Enum):
    FULL = "full"
    CURRENT = "current"
    PAST = "past"


@dataclass(frozen=True)
class Schedule:
    """``alloc[t] = (x1, x2)``: fraction of slot ``t`` carrying each user's data."""

    alloc: tuple[tuple[float, float], ...]

    def __len__(self) -> int:
        return len(self.alloc)

    def row_sums(self) -> list[float]:
        return [x1 + x2 for x1, x2 in self.alloc]


@dataclass(frozen=True)
class SlotDecision:
    slot: int
    state: int
    action: str
    amt1: float
    amt2: float

    def __str__(self) -> str:
        return (
            f"slot={self.slot} state={SYMBOLS[self.state]} action={self.action} "
            f"amt1={self.amt1:g} amt2={self.amt2:g}"
        )


def _action(x1: float, x2: float) -> str:
    if x1 > 0 and x2 > 0:
        return "split"
    if x1 > 0:
        return "serve1"
    if x2 > 0:
        return "serve2"
    return "idle"


@dataclass(frozen=True)
class FrameOutcome:
    """What one policy achieved on one frame.

    ``delivered1`` holds user 1's received amount per sub-frame, ``delivered2``
    user 2's total over the frame.  Both count only unerased slots.
    """

    pattern: ErasurePattern
    delivered1: tuple[float, ...]
    delivered2: float
    met_deadlines: bool
    schedule: Schedule
    policy: str

    @property
    def trace(self) -> list[SlotDecision]:
        return [
            SlotDecision(t + 1, s, _action(x1, x2), x1, x2)
            for t, (s, (x1, x2)) in enumerate(zip(self.pattern, self.schedule.alloc))
        ]

    def trace_lines(self) -> list[str]:
        return [str(d) for d in self.trace]


def _as_pattern(pattern: Sequence[int]) -> ErasurePattern:
    return pattern if isinstance(pattern, ErasurePattern) else ErasurePattern(pattern)


def _outcome(pattern, config: DeadlineConfig, alloc, policy: str) -> FrameOutcome:
    T1 = config.T1
    delivered1 = []
    d2 = 0.0
    for k in range(config.N):
        d1 = 0.0
        for t in range(k * T1, (k + 1) * T1):
            s = pattern[t]
            x1, x2 = alloc[t]
            if s & 2:
                d1 += x1
            if s & 1:
                d2 += x2
        delivered1.append(d1)
    met = d2 >= config.lambda2 - MET_TOL and all(d >= config.lambda1 - MET_TOL for d in delivered1)
    return FrameOutcome(pattern, tuple(delivered1), d2, met, Schedule(tuple(alloc)), policy)


def _check_length(pattern: Sequence[int], config: DeadlineConfig) -> None:
    if len(pattern) != config.T:
        raise ConfigError(f"pattern has {len(pattern)} slots, frame length is {config.T}")


def greedy_full_csi(pattern: Sequence[int], config: DeadlineConfig) -> FrameOutcome:
    """Earliest-deadline-first allocation with the frame's pattern known in advance.

    Block by block: user-1-only slots go to user 1 and user-2-only slots to
    user 2, each up to its remaining demand.  Slots both users hear then serve
    user 1 until its block demand is met and give any leftover capacity to
    user 2.  User 1 also goes first in the final block, where both deadlines
    coincide.
    """
    pattern = _as_pattern(pattern)
    _check_length(pattern, config)
    T1 = config.T1
    lam1 = config.lambda1
    need2 = config.lambda2
    alloc = [(0.0, 0.0)] * config.T

    for start in range(0, config.T, T1):
        block = range(start, start + T1)
        need1 = lam1
        for t in block:
            s = pattern[t]
            if s == S10 and need1 > _RESIDUAL_EPS:
                x = 1.0 if need1 > 1.0 else need1
                alloc[t] = (x, 0.0)
                need1 -= x
            elif s == S01 and need2 > _RESIDUAL_EPS:
                x = 1.0 if need2 > 1.0 else need2
                alloc[t] = (0.0, x)
                need2 -= x
        for t in block:
            if pattern[t] != S11:
                continue
            x1 = x2 = 0.0
            if need1 > _RESIDUAL_EPS:
                x1 = 1.0 if need1 > 1.0 else need1
                need1 -= x1
            room = 1.0 - x1
            if need2 > _RESIDUAL_EPS and room > 0.0:
                x2 = room if need2 > room else need2
                need2 -= x2
            if x1 or x2:
                alloc[t] = (x1, x2)

    return _outcome(pattern, config, alloc, "greedy_full")


def _check_causal(pattern: Sequence[int], config: DeadlineConfig) -> tuple[int, int]:
    _check_length(pattern, config)
    if config.T1 != config.T2:
        raise ConfigError(f"causal policies need equal deadlines, got T1={config.T1}, T2={config.T2}")
    lam1, lam2 = config.lambda1, config.lambda2
    if lam1 != int(lam1) or lam2 != int(lam2):
        raise ConfigError(f"causal policies move whole packets; got lambda=({lam1}, {lam2})")
    return int(lam1), int(lam2)


def current_csi_policy(pattern: Sequence[int], config: DeadlineConfig, cost: CostToGoTable) -> FrameOutcome:
    """Slot-by-slot scheduling that sees only the current slot's state.

    When both users hear the slot and both still have packets, the user whose
    service leaves the lower residual outage probability is served, with ties
    going to user 2.  A user with nothing left to send never wins the slot.
    """
    pattern = _as_pattern(pattern)
    r1, r2 = _check_causal(pattern, config)
    T = config.T
    alloc = [(0.0, 0.0)] * T

    for t, s in enumerate(pattern):
        t_rem = T - t
        up1, up2 = s & 2, s & 1
        if r1 > 0 and up1:
            if not up2 or r2 == 0:
                serve1 = True
            else:
                serve1 = cost(r1 - 1, r2, t_rem - 1) < cost(r1, r2 - 1, t_rem - 1)
        else:
            serve1 = False
        if serve1:
            alloc[t] = (1.0, 0.0)
            r1 = max(0, r1 - 1)
        elif up2 and r2 > 0:
            alloc[t] = (0.0, 1.0)
            r2 = max(0, r2 - 1)

    return _outcome(pattern, config, alloc, "current_csi")


def past_csi_expected_costs(
    r1: int, r2: int, t_rem: int, eps: ErasureProbs, cost: CostToGoTable
) -> tuple[float, float]:
    """Expected residual outage after sending to user 1 or user 2, before the slot is seen."""
    stay = cost(r1, r2, t_rem - 1)
    ok1 = eps.eps10 + eps.eps11
    ok2 = eps.eps01 + eps.eps11
    x1 = cost(r1 - 1, r2, t_rem - 1) * ok1 + stay * (eps.eps00 + eps.eps01)
    x2 = cost(r1, r2 - 1, t_rem - 1) * ok2 + stay * (eps.eps00 + eps.eps10)
    return x1, x2


def past_csi_policy(
    pattern: Sequence[int], config: DeadlineConfig, eps: ErasureProbs, cost: CostToGoTable
) -> FrameOutcome:
    """Blind transmission with immediate ACK/NACK feedback.

    The schedule records what was sent, so a failed transmission shows up as
    an allocation on a slot that the target user did not hear.  The packet is
    resent until it is acknowledged.
    """
    pattern = _as_pattern(pattern)
    r1, r2 = _check_causal(pattern, config)
    T = config.T
    alloc = [(0.0, 0.0)] * T

    for t, s in enumerate(pattern):
        if r1 == 0 and r2 == 0:
            break
        if r2 == 0:
            target = 1
        elif r1 == 0:
            target = 2
        else:
            x1, x2 = past_csi_expected_costs(r1, r2, T - t, eps, cost)
            target = 1 if x1 < x2 else 2
        if target == 1:
            alloc[t] = (1.0, 0.0)
            if s & 2:
                r1 -= 1
        else:
            alloc[t] = (0.0, 1.0)
            if s & 1:
                r2 -= 1

    return _outcome(pattern, config, alloc, "past_csi")


POLICY_MODES = {
    "greedy_full": CsiMode.FULL,
    "current_csi": CsiMode.CURRENT,
    "past_csi": CsiMode.PAST,
}
