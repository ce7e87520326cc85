"""Global deadline outage probability: exact, brute force and Monte Carlo.

The exact route sums multinomial-weighted block configurations; the brute
force route walks every erasure pattern.  They share nothing but the
cut-set test, and are expected to agree to round-off.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from . import __version__
from .channel import (
    GENERATOR_NAME,
    DeadlineConfig,
    ErasurePattern,
    ErasureProbs,
    enumerate_block_configs,
    make_rng,
    pattern_array,
    sample_patterns,
)
from .cutset import feasible_mask
from .errors import ConfigError, GuardError, OracleMismatchError
from .schedulers import _check_causal, current_csi_policy, greedy_full_csi, past_csi_policy

MAX_EXACT_T1 = 12
MAX_EXACT_N = 3
MAX_BRUTE_T = 10
MC_CHUNK = 8192
POLICIES = ("greedy_full", "current_csi", "past_csi")
# Rows per vectorised slab in exact_outage.
_SLAB_ROWS = 1 << 20


@dataclass(frozen=True)
class OutageResult:
    value: float
    method: str
    config: DeadlineConfig
    eps: ErasureProbs
    trials: int | None = None
    seed: int | None = None
    stderr: float | None = None
    generator: str | None = None
    policy: str | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "trials": self.trials,
            "seed": self.seed,
            "stderr": self.stderr,
            "config": {
                "lambda1": self.config.lambda1,
                "lambda2": self.config.lambda2,
                "T1": self.config.T1,
                "T2": self.config.T2,
            },
            "eps": list(self.eps.as_tuple()),
            "generator": self.generator,
            "policy": self.policy,
            "version": __version__,
        }


@lru_cache(maxsize=32)
def _block_table(T1: int) -> tuple[np.ndarray, np.ndarray]:
    """All block configurations of length ``T1``: counts ``(M, 4)`` and weights ``(M,)``."""
    rows = list(enumerate_block_configs(T1))
    counts = np.array([s.as_tuple() for s, _ in rows], dtype=np.int16)
    weights = np.array([float(w) for _, w in rows])
    counts.flags.writeable = False
    weights.flags.writeable = False
    return counts, weights


def _block_probs(T1: int, eps: ErasureProbs) -> tuple[np.ndarray, np.ndarray]:
    counts, weights = _block_table(T1)
    # 0**0 == 1 keeps zero-probability symbols harmless when absent.
    return counts, weights * np.prod(eps.as_array() ** counts, axis=1)


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def exact_outage(config: DeadlineConfig, eps: ErasureProbs) -> OutageResult:
    """Outage probability by summing over per-block symbol counts.

    Each block's counts are multinomially distributed and blocks are iid, so
    the frame is a Cartesian product of ``C(T1+3, 3)`` configurations per
    block.  The product is enumerated slab by slab.
    """
    T1, N = config.T1, config.N
    if T1 > MAX_EXACT_T1 or N > MAX_EXACT_N:
        raise GuardError(f"exact enumeration limited to T1<={MAX_EXACT_T1}, N<={MAX_EXACT_N}; got T1={T1}, N={N}")
    lam1, lam2 = config.lambda1, config.lambda2
    if lam1 == 0 and lam2 == 0:
        return OutageResult(0.0, "exact", config, eps)

    counts, probs = _block_probs(T1, eps)
    nz = probs > 0
    counts, probs = counts[nz], probs[nz]
    M = len(probs)

    # Trailing N-1 blocks as one flattened product, leading block looped in slabs.
    if N > 1:
        tail_idx = np.stack(
            [g.ravel() for g in np.meshgrid(*([np.arange(M)] * (N - 1)), indexing="ij")], axis=1
        )
        tail_counts = counts[tail_idx]  # (M**(N-1), N-1, 4)
        tail_probs = np.prod(probs[tail_idx], axis=1)
    else:
        tail_counts = np.zeros((1, 0, 4), dtype=counts.dtype)
        tail_probs = np.ones(1)

    per_slab = max(1, _SLAB_ROWS // len(tail_probs))
    # numpy's pairwise sum within a slab, exactly rounded fsum across slabs.
    parts: list[float] = []
    for lo in range(0, M, per_slab):
        head = np.arange(lo, min(M, lo + per_slab))
        frame_counts = np.concatenate(
            [
                np.broadcast_to(counts[head][:, None, None, :], (len(head), len(tail_probs), 1, 4)),
                np.broadcast_to(tail_counts[None], (len(head),) + tail_counts.shape),
            ],
            axis=2,
        )
        mask = feasible_mask(frame_counts, lam1, lam2)
        mass = probs[head][:, None] * tail_probs[None, :]
        parts.append(float(np.sum(mass[mask])))
    return OutageResult(_clamp(1.0 - math.fsum(parts)), "exact", config, eps)


@lru_cache(maxsize=16)
def _pattern_block_counts(T: int, T1: int) -> np.ndarray:
    pats = pattern_array(T)
    blocks = pats.reshape(len(pats), T // T1, T1)
    out = np.stack([(blocks == v).sum(axis=2) for v in range(4)], axis=-1).astype(np.int16)
    out.flags.writeable = False
    return out


def brute_force_outage(config: DeadlineConfig, eps: ErasureProbs, strict: bool = False) -> OutageResult:
    """Outage probability by walking all ``4**T`` erasure patterns.

    With ``strict=True`` the greedy policy is also run on every pattern and
    must succeed exactly where the cut-set test says the rates fit.
    """
    T = config.T
    if T > MAX_BRUTE_T:
        raise GuardError(f"brute force limited to T<={MAX_BRUTE_T}; got T={T}")
    pats = pattern_array(T)
    probs = np.prod(eps.as_array()[pats], axis=1)
    mask = feasible_mask(_pattern_block_counts(T, config.T1), config.lambda1, config.lambda2)
    if strict:
        for i, row in enumerate(pats.tolist()):
            met = greedy_full_csi(ErasurePattern.trusted(row), config).met_deadlines
            if met != bool(mask[i]):
                raise OracleMismatchError(
                    f"greedy met={met} but cut-set feasible={bool(mask[i])} on pattern "
                    f"{ErasurePattern.trusted(row)} for {config}"
                )
    value = _clamp(1.0 - math.fsum(probs[mask].tolist()))
    return OutageResult(value, "bruteforce", config, eps)


class CostToGoTable:
    """Outage probability of equal-deadline residual problems ``(l1, l2, t)``.

    Negative residuals are clamped to zero.  ``t = 0`` with anything left to
    send is an outage; nothing left to send never is.
    """

    def __init__(self, table: np.ndarray, eps: ErasureProbs):
        self.table = table
        self.table.flags.writeable = False
        self.eps = eps

    @property
    def bounds(self) -> tuple[int, int, int]:
        l1, l2, t = self.table.shape
        return l1 - 1, l2 - 1, t - 1

    def __call__(self, l1: int, l2: int, t: int) -> float:
        l1 = l1 if l1 > 0 else 0
        l2 = l2 if l2 > 0 else 0
        return float(self.table[l1, l2, t])


def build_cost_table(Tmax: int, l1max: int, l2max: int, eps: ErasureProbs) -> CostToGoTable:
    """Dense cost-to-go table for ``0 <= t <= Tmax`` and residuals up to the given maxima.

    With equal deadlines the full-CSI outcome of ``t`` slots depends only on
    the counts, so each entry is ``1 - Pr[a >= l1, b >= l2, c >= l1 + l2]``.
    """
    if min(Tmax, l1max, l2max) < 0:
        raise ConfigError("cost table bounds must be nonnegative")
    table = np.ones((l1max + 1, l2max + 1, Tmax + 1))
    table[0, 0, :] = 0.0
    for t in range(1, Tmax + 1):
        counts, probs = _block_probs(t, eps)
        a = counts[:, 2] + counts[:, 3]
        b = counts[:, 1] + counts[:, 3]
        c = counts[:, 1] + counts[:, 2] + counts[:, 3]
        for l1, l2 in itertools.product(range(l1max + 1), range(l2max + 1)):
            if l1 == 0 and l2 == 0:
                continue
            ok = (a >= l1) & (b >= l2) & (c >= l1 + l2)
            table[l1, l2, t] = _clamp(1.0 - math.fsum(probs[ok].tolist()))
    return CostToGoTable(table, eps)


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        try:
            workers = int(os.environ.get("DEADLINE_BCAST_THREADS", "1"))
        except ValueError:
            workers = 1
    return max(1, workers)


def _policy_runner(policy: str, config: DeadlineConfig, eps: ErasureProbs) -> Callable:
    if policy == "greedy_full":
        return lambda pat: greedy_full_csi(pat, config).met_deadlines
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")
    l1, l2 = _check_causal([0] * config.T, config)
    cost = build_cost_table(config.T, l1, l2, eps)
    if policy == "current_csi":
        return lambda pat: current_csi_policy(pat, config, cost).met_deadlines
    return lambda pat: past_csi_policy(pat, config, eps, cost).met_deadlines


def _mc_chunk(policy: str, config: DeadlineConfig, eps: ErasureProbs, size: int, seed_seq) -> int:
    run = _policy_runner(policy, config, eps)
    pats = sample_patterns(eps, config.T, size, make_rng(seed_seq))
    # Policies are pure, so repeated patterns reuse their verdict.
    seen: dict[tuple, bool] = {}
    failures = 0
    for row in map(tuple, pats.tolist()):
        met = seen.get(row)
        if met is None:
            met = run(ErasurePattern.trusted(row))
            seen[row] = met
        failures += not met
    return failures


def monte_carlo_outage(
    policy: str,
    config: DeadlineConfig,
    eps: ErasureProbs,
    trials: int,
    seed: int,
    workers: int | None = None,
) -> OutageResult:
    """Fraction of sampled frames on which ``policy`` misses a deadline.

    Trials are split into fixed-size chunks with independent child seeds, so
    the estimate does not depend on the worker count.
    """
    if trials < 1:
        raise ConfigError(f"trials={trials} must be >= 1")
    _policy_runner(policy, config, eps)  # validate before fanning out
    sizes = [min(MC_CHUNK, trials - lo) for lo in range(0, trials, MC_CHUNK)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = min(_resolve_workers(workers), len(sizes))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_mc_chunk, policy, config, eps, n, ss) for n, ss in zip(sizes, children)]
            failures = sum(f.result() for f in futs)
    else:
        failures = sum(_mc_chunk(policy, config, eps, n, ss) for n, ss in zip(sizes, children))
    p_hat = failures / trials
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return OutageResult(
        p_hat, "montecarlo", config, eps,
        trials=trials, seed=seed, stderr=stderr, generator=GENERATOR_NAME, policy=policy,
    )


def policy_outage_by_enumeration(policy: str, config: DeadlineConfig, eps: ErasureProbs) -> OutageResult:
    """Exact outage of any policy, by running it on every pattern of the frame."""
    if config.T > MAX_BRUTE_T:
        raise GuardError(f"pattern enumeration limited to T<={MAX_BRUTE_T}; got T={config.T}")
    run = _policy_runner(policy, config, eps)
    pats = pattern_array(config.T)
    probs = np.prod(eps.as_array()[pats], axis=1)
    ok = [run(ErasurePattern.trusted(row)) for row in pats.tolist()]
    value = _clamp(1.0 - math.fsum(probs[np.array(ok, dtype=bool)].tolist()))
    return OutageResult(value, "bruteforce", config, eps, policy=policy)


@dataclass(frozen=True)
class RateSolution:
    lambda1: float
    lambda2: float
    pout: float
    next_breakpoint: float | None
    next_pout: float | None
    degenerate: bool
    candidates: list[float] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "pout": self.pout,
            "next_breakpoint": self.next_breakpoint,
            "next_pout": self.next_pout,
            "degenerate": self.degenerate,
        }


def ray_breakpoints(T1: int, T2: int, m: float) -> list[Fraction]:
    """Values of ``lambda2`` where outage along ``lambda1 = m * lambda2`` can jump.

    For a fixed pattern the largest supportable ``lambda2`` on the ray is
    ``min(a_min / m, min_k v_k / (1 + k m))`` with integer ``a_min`` and ``v_k``,
    so the jumps lie in ``{i / m} | {i / (1 + k m)}``.  Candidates are capped at
    the largest rate any pattern could support.
    """
    N = T2 // T1
    mf = Fraction(m)
    cap = Fraction(T2)
    if mf > 0:
        cap = min(cap, Fraction(T1) / mf)
    out = {Fraction(0)}
    if mf > 0:
        out.update(Fraction(i) / mf for i in range(1, T1 + 1))
    for k in range(N + 1):
        den = 1 + k * mf
        out.update(Fraction(i) / den for i in range(1, math.floor(cap * den) + 1))
    return sorted(x for x in out if x <= cap)


def rate_solver(eps: ErasureProbs, T1: int, T2: int, p: float, m: float) -> RateSolution:
    """Largest ``lambda2`` on the ray ``lambda1 = m * lambda2`` with outage at most ``p``.

    Outage along the ray is a nondecreasing step function that holds its value
    on ``(b_j, b_{j+1}]``, so the answer is always a breakpoint and a binary
    search over the sorted candidates finds it.
    """
    if not 0 <= p < 1:
        raise ConfigError(f"target p={p} must lie in [0, 1)")
    if not m >= 0 or not math.isfinite(m):
        raise ConfigError(f"ray slope m={m} must be a nonnegative real")
    DeadlineConfig(0, 0, T1, T2)
    cands = [float(x) for x in ray_breakpoints(T1, T2, m)]

    def pout(lam2: float) -> float:
        return exact_outage(DeadlineConfig(m * lam2, lam2, T1, T2), eps).value

    lo, hi = 0, len(cands) - 1  # pout(cands[lo]) <= p is an invariant
    if pout(cands[hi]) <= p:
        lo = hi
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pout(cands[mid]) <= p:
                lo = mid
            else:
                hi = mid
    lam2 = cands[lo]
    nxt = cands[lo + 1] if lo + 1 < len(cands) else None
    return RateSolution(
        lambda1=m * lam2,
        lambda2=lam2,
        pout=pout(lam2),
        next_breakpoint=nxt,
        next_pout=pout(nxt) if nxt is not None else None,
        degenerate=lo == 0,
        candidates=cands,
    )
