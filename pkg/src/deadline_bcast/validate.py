"""Desk-scale self-check: oracle equivalences and invariants.

Used by ``deadline-bcast validate``.  Each check returns a :class:`CheckResult`;
the run passes only if every check does.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import DeadlineConfig, ErasureProbs, block_stats, enumerate_patterns, pattern_probability
from .cutset import equivalent_feasible, is_feasible, region_boundary
from .outage import (
    brute_force_outage,
    build_cost_table,
    exact_outage,
    policy_outage_by_enumeration,
)
from .schedulers import greedy_full_csi

EPS_SET = (
    ErasureProbs(0.1, 0.2, 0.2, 0.5),
    ErasureProbs(0.25, 0.25, 0.25, 0.25),
    ErasureProbs(0.0, 0.0, 0.0, 1.0),
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def grid(stop: float, step: float) -> list[float]:
    n = int(round(stop / step))
    return [i * step for i in range(n + 1)]


def frame_shapes(Ts) -> list[tuple[int, int]]:
    """``(T, T1)`` pairs with ``T1 | T`` and at most three blocks."""
    return [(T, T1) for T in Ts for T1 in range(1, T + 1) if T % T1 == 0 and T // T1 <= 3]


def check_normalization(quick: bool) -> str | None:
    eps = EPS_SET[0]
    for T in range(1, 4 if quick else 6):
        total = math.fsum(pattern_probability(p, eps) for p in enumerate_patterns(T))
        if abs(total - 1.0) > 1e-12:
            return f"T={T}: pattern probabilities sum to {total!r}"
    return None


def check_exact_vs_brute(quick: bool) -> str | None:
    T1s = (1, 2) if quick else (1, 2, 3, 4)
    for T1, N, eps in itertools.product(T1s, (1, 2), EPS_SET):
        T = T1 * N
        for l1, l2 in itertools.product(grid(T, 0.5), repeat=2):
            cfg = DeadlineConfig(l1, l2, T1, T)
            a = exact_outage(cfg, eps).value
            b = brute_force_outage(cfg, eps).value
            if abs(a - b) > 1e-12:
                return f"{cfg} eps={eps}: exact={a!r} bruteforce={b!r}"
    return None


def _exhaustive(Ts, step: float, fn: Callable) -> str | None:
    for T, T1 in frame_shapes(Ts):
        lams = list(itertools.product(grid(T, step), repeat=2))
        configs = [DeadlineConfig(l1, l2, T1, T) for l1, l2 in lams]
        for pattern in enumerate_patterns(T):
            stats = block_stats(pattern, T1)
            for cfg in configs:
                msg = fn(pattern, stats, cfg)
                if msg:
                    return msg
    return None


def check_greedy_vs_cutset(quick: bool) -> str | None:
    def one(pattern, stats, cfg):
        met = greedy_full_csi(pattern, cfg).met_deadlines
        if met != is_feasible(stats, cfg.lambda1, cfg.lambda2):
            return f"pattern {pattern} {cfg}: greedy met={met}"

    return _exhaustive((2, 3) if quick else (2, 3, 4, 6), 0.5, one)


def check_feasibility_forms(quick: bool) -> str | None:
    def one(pattern, stats, cfg):
        if is_feasible(stats, cfg.lambda1, cfg.lambda2) != equivalent_feasible(stats, cfg.lambda1, cfg.lambda2):
            return f"pattern {pattern} {cfg}: feasibility forms disagree"

    return _exhaustive((2, 3) if quick else (2, 3, 4, 6), 0.25, one)


def check_cost_table(quick: bool) -> str | None:
    Tmax, lmax = (4, 2) if quick else (6, 3)
    eps = EPS_SET[0]
    table = build_cost_table(Tmax, lmax, lmax, eps)
    for l1, l2, t in itertools.product(range(lmax + 1), range(lmax + 1), range(1, Tmax + 1)):
        ref = brute_force_outage(DeadlineConfig(l1, l2, t, t), eps).value
        if abs(table(l1, l2, t) - ref) > 1e-12:
            return f"entry ({l1},{l2},{t}) = {table(l1, l2, t)!r}, brute force {ref!r}"
    return None


def check_monotonicity(quick: bool) -> str | None:
    eps = EPS_SET[0]
    Tmax = 4 if quick else 6
    lams = grid(Tmax + 1, 0.5)
    prev_by_lam: dict[tuple[float, float], float] = {}
    for T in range(1, Tmax + 1):
        surf = np.array([[exact_outage(DeadlineConfig(l1, l2, T, T), eps).value for l2 in lams] for l1 in lams])
        if surf[0, 0] != 0.0:
            return f"T={T}: outage at zero rate is {surf[0, 0]!r}"
        if np.any(np.diff(surf, axis=0) < -1e-12) or np.any(np.diff(surf, axis=1) < -1e-12):
            return f"T={T}: outage decreases in a rate"
        for (i, l1), (j, l2) in itertools.product(enumerate(lams), repeat=2):
            before = prev_by_lam.get((l1, l2))
            if before is not None and surf[i, j] > before + 1e-12:
                return f"outage at ({l1},{l2}) grows from T={T - 1} to T={T}"
            prev_by_lam[(l1, l2)] = surf[i, j]
    return None


def check_policy_ordering(quick: bool) -> str | None:
    eps = EPS_SET[0]
    for T in range(1, 5 if quick else 7):
        cfg = DeadlineConfig(1, 1, T, T)
        full, cur, past = (
            policy_outage_by_enumeration(p, cfg, eps).value for p in ("greedy_full", "current_csi", "past_csi")
        )
        if not (full <= cur + 1e-12 and cur <= past + 1e-12):
            return f"T={T}: full={full:.6g} current={cur:.6g} past={past:.6g}"
    return None


def check_region_boundary(quick: bool) -> str | None:
    for T, T1 in frame_shapes((2, 3, 4) if quick else (2, 3, 4, 6)):
        for pattern in enumerate_patterns(T):
            stats = block_stats(pattern, T1)
            for l1, l2 in region_boundary(stats):
                if not equivalent_feasible(stats, l1, l2):
                    return f"vertex ({l1},{l2}) of {pattern} infeasible"
                if equivalent_feasible(stats, l1 + 1e-6, l2 + 1e-6):
                    return f"vertex ({l1},{l2}) of {pattern} not on the boundary"
    return None


CHECKS: list[tuple[str, Callable[[bool], str | None]]] = [
    ("pattern-normalization", check_normalization),
    ("exact-vs-bruteforce", check_exact_vs_brute),
    ("greedy-vs-cutset", check_greedy_vs_cutset),
    ("feasibility-forms", check_feasibility_forms),
    ("cost-table", check_cost_table),
    ("monotonicity", check_monotonicity),
    ("policy-ordering", check_policy_ordering),
    ("region-boundary", check_region_boundary),
]


def run_checks(quick: bool = False) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            msg = fn(quick)
        except Exception as exc:  # a crash is a failure of that check, not of the run
            msg = f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, msg is None, msg or "ok", time.perf_counter() - start))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
