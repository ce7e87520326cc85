"""Per-pattern cut-set region for the two-user channel with ``T2 = N * T1``.

For a realised pattern, a rate pair is supportable iff

    lambda1 <= min_k a_k
    lambda2 <= v_0 - sum_k (lambda1 - n_{k,10})^+

where ``a_k``/``b_k`` count the slots usable by user 1/2 in block ``k`` and
``v_0 = sum_k b_k``.  The same region written with one inequality per subset
size is ``k * lambda1 + lambda2 <= v_k``; :func:`equivalent_feasible` checks
that form and exists only as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import BlockStats

# Absolute slack when comparing real rates to integer slot counts.
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class BlockCapacities:
    a: int
    b: int
    c: int


@dataclass(frozen=True)
class RegionCoefficients:
    a_min: int
    v: tuple[int, ...]


def block_capacities(stats: BlockStats) -> BlockCapacities:
    """Slots usable by user 1 alone, user 2 alone, and a receiver hearing both."""
    return BlockCapacities(
        a=stats.n10 + stats.n11,
        b=stats.n01 + stats.n11,
        c=stats.n10 + stats.n01 + stats.n11,
    )


def region_coefficients(all_stats: Sequence[BlockStats]) -> RegionCoefficients:
    """``a_min`` and the subset-minimum sums ``v_0 .. v_N``.

    ``v_k`` is the minimum over k-subsets S of ``sum_S c + sum_{not S} b``.
    Since ``c_j - b_j = n_{j,10}``, the minimising subset holds the k blocks
    with the fewest user-1-only slots, so sorting replaces subset search.
    """
    if not all_stats:
        raise ValueError("need at least one block")
    caps = [block_capacities(s) for s in all_stats]
    v0 = sum(cp.b for cp in caps)
    gains = sorted(cp.c - cp.b for cp in caps)
    v = [v0]
    for g in gains:
        v.append(v[-1] + g)
    return RegionCoefficients(a_min=min(cp.a for cp in caps), v=tuple(v))


def is_feasible(all_stats: Sequence[BlockStats], lambda1: float, lambda2: float) -> bool:
    a_min = min(s.n10 + s.n11 for s in all_stats)
    if lambda1 > a_min + FEAS_TOL:
        return False
    budget = 0.0
    for s in all_stats:
        budget += s.n01 + s.n11
        excess = lambda1 - s.n10
        if excess > 0:
            budget -= excess
    return lambda2 <= budget + FEAS_TOL


def equivalent_feasible(all_stats: Sequence[BlockStats], lambda1: float, lambda2: float) -> bool:
    coeffs = region_coefficients(all_stats)
    if lambda1 > coeffs.a_min + FEAS_TOL:
        return False
    bound = min(vk - k * lambda1 for k, vk in enumerate(coeffs.v))
    return lambda2 <= bound + FEAS_TOL


def feasible_mask(counts: np.ndarray, lambda1: float, lambda2: float) -> np.ndarray:
    """Vectorised :func:`is_feasible` over leading axes.

    ``counts`` has shape ``(..., N, 4)`` holding ``n00, n01, n10, n11`` per block.
    """
    n01 = counts[..., 1]
    n10 = counts[..., 2]
    n11 = counts[..., 3]
    ok1 = np.all(n10 + n11 >= lambda1 - FEAS_TOL, axis=-1)
    budget = np.sum(n01 + n11, axis=-1) - np.sum(np.maximum(lambda1 - n10, 0.0), axis=-1)
    return ok1 & (lambda2 <= budget + FEAS_TOL)


def _collinear(p, q, r) -> bool:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]) == 0


def region_boundary(all_stats: Sequence[BlockStats]) -> list[tuple[float, float]]:
    """Corner points of the outer (Pareto) boundary, by increasing ``lambda1``.

    The walk starts at ``(0, v_0)`` and ends at ``(a_min, 0)``.  The origin is
    only reported when the region collapses onto it or onto an axis segment
    that ends there.
    """
    coeffs = region_coefficients(all_stats)
    a_min, v = coeffs.a_min, coeffs.v

    def upper(x: int) -> int:
        return min(vk - k * x for k, vk in enumerate(v))

    # Upper envelope kinks sit at v_k - v_{k-1}, the sorted n_{j,10}.
    xs = sorted({0, a_min} | {v[k] - v[k - 1] for k in range(1, len(v)) if 0 < v[k] - v[k - 1] < a_min})
    pts: list[tuple[int, int]] = [(x, upper(x)) for x in xs]
    if pts[-1][1] > 0:
        pts.append((a_min, 0))

    reduced: list[tuple[int, int]] = []
    for p in pts:
        if reduced and reduced[-1] == p:
            continue
        while len(reduced) >= 2 and _collinear(reduced[-2], reduced[-1], p):
            reduced.pop()
        reduced.append(p)
    return [(float(x), float(y)) for x, y in reduced]
