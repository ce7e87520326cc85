import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from deadline_bcast.channel import DeadlineConfig, ErasureProbs, enumerate_patterns
from deadline_bcast.errors import ConfigError, GuardError
from deadline_bcast.outage import (
    CostToGoTable,
    brute_force_outage,
    build_cost_table,
    exact_outage,
    monte_carlo_outage,
    policy_outage_by_enumeration,
    ray_breakpoints,
    rate_solver,
)

EPS_FRAC = [Fraction(1, 10), Fraction(2, 10), Fraction(2, 10), Fraction(5, 10)]


def rational_outage_equal_deadlines(T, l1, l2):
    """Independent oracle: rational arithmetic over every pattern, N = 1."""
    ok = Fraction(0)
    for p in itertools.product(range(4), repeat=T):
        a = sum(1 for s in p if s & 2)
        b = sum(1 for s in p if s & 1)
        c = sum(1 for s in p if s)
        if a >= l1 and b >= l2 and c >= l1 + l2:
            ok += math.prod(EPS_FRAC[s] for s in p)
    return 1 - ok


def test_oracle_values():
    assert rational_outage_equal_deadlines(4, 1, 1) == Fraction(181, 10000)
    assert rational_outage_equal_deadlines(2, 1, 1) == Fraction(27, 100)


def test_exact_examples(eps):
    assert exact_outage(DeadlineConfig(0, 0, 3, 6), eps).value == 0.0
    assert exact_outage(DeadlineConfig(1, 0, 1, 1), eps).value == pytest.approx(0.3, abs=1e-15)
    assert exact_outage(DeadlineConfig(1, 1, 4, 4), eps).value == pytest.approx(0.0181, abs=1e-14)
    assert exact_outage(DeadlineConfig(1, 1, 6, 6), eps).value == pytest.approx(0.001487, abs=1e-14)
    assert exact_outage(DeadlineConfig(6, 6.5, 12, 12), eps).value == 1.0


def test_exact_guards(eps):
    with pytest.raises(GuardError):
        exact_outage(DeadlineConfig(1, 1, 13, 13), eps)
    with pytest.raises(GuardError):
        exact_outage(DeadlineConfig(1, 1, 2, 8), eps)
    with pytest.raises(GuardError):
        brute_force_outage(DeadlineConfig(1, 1, 11, 11), eps)


def test_brute_force_examples():
    dead = ErasureProbs(1, 0, 0, 0)
    assert brute_force_outage(DeadlineConfig(0.5, 0, 2, 4), dead).value == 1.0
    clean = ErasureProbs(0, 0, 0, 1)
    for l1, l2 in [(1, 2), (0, 3), (3, 0), (1.5, 1.5)]:
        assert brute_force_outage(DeadlineConfig(l1, l2, 3, 3), clean).value == 0.0


@pytest.mark.parametrize("T1,N", [(1, 1), (2, 1), (3, 1), (1, 2), (2, 2), (3, 2), (1, 3), (2, 3)])
def test_exact_matches_brute_force(T1, N, eps):
    T = T1 * N
    for l1, l2 in itertools.product(np.arange(0, T1 + 1, 0.5), np.arange(0, T + 1, 0.5)):
        cfg = DeadlineConfig(l1, l2, T1, T)
        assert exact_outage(cfg, eps).value == pytest.approx(brute_force_outage(cfg, eps).value, abs=1e-12)


@pytest.mark.parametrize("T1,N", [(2, 1), (1, 2), (2, 2), (3, 2), (2, 3)])
def test_strict_brute_force_runs_greedy(T1, N, eps):
    for l1, l2 in [(0.5, 1), (1, 1.5), (1, 2), (2, 0.25)]:
        cfg = DeadlineConfig(l1, l2, T1, T1 * N)
        assert brute_force_outage(cfg, eps, strict=True).value == brute_force_outage(cfg, eps).value


def test_cost_table_entries(eps):
    table = build_cost_table(6, 2, 2, eps)
    assert isinstance(table, CostToGoTable) and table.bounds == (2, 2, 6)
    assert all(table(0, 0, t) == 0.0 for t in range(7))
    assert table(1, 0, 1) == pytest.approx(0.3)
    assert table(1, 1, 2) == pytest.approx(0.27, abs=1e-14)
    assert table(1, 1, 0) == 1.0 and table(0, 2, 0) == 1.0
    assert table(-1, 1, 1) == table(0, 1, 1)
    for l1, l2, t in itertools.product(range(3), range(3), range(1, 7)):
        if (l1, l2) != (0, 0):
            ref = rational_outage_equal_deadlines(t, l1, l2) if t <= 4 else None
            if ref is not None:
                assert table(l1, l2, t) == pytest.approx(float(ref), abs=1e-13)
    arr = table.table
    assert np.all(np.diff(arr, axis=2) <= 1e-15)
    assert np.all(np.diff(arr, axis=0) >= -1e-15) and np.all(np.diff(arr, axis=1) >= -1e-15)


def test_monte_carlo_agrees_with_exact(eps):
    cfg = DeadlineConfig(1, 1, 4, 4)
    res = monte_carlo_outage("greedy_full", cfg, eps, 20000, seed=11)
    exact = exact_outage(cfg, eps).value
    assert res.stderr == pytest.approx(math.sqrt(res.value * (1 - res.value) / 20000))
    assert abs(res.value - exact) <= 4 * res.stderr
    assert (res.method, res.trials, res.seed, res.generator) == ("montecarlo", 20000, 11, "numpy.PCG64")


def test_monte_carlo_degenerate_and_deterministic(eps):
    clean = ErasureProbs(0, 0, 0, 1)
    assert monte_carlo_outage("current_csi", DeadlineConfig(2, 1, 3, 3), clean, 500, seed=1).value == 0.0
    a = monte_carlo_outage("past_csi", DeadlineConfig(1, 1, 5, 5), eps, 10000, seed=42)
    b = monte_carlo_outage("past_csi", DeadlineConfig(1, 1, 5, 5), eps, 10000, seed=42)
    assert a == b


def test_monte_carlo_independent_of_worker_count(eps):
    cfg = DeadlineConfig(1, 1, 3, 3)
    one = monte_carlo_outage("current_csi", cfg, eps, 20000, seed=5, workers=1)
    two = monte_carlo_outage("current_csi", cfg, eps, 20000, seed=5, workers=2)
    assert one.value == two.value


def test_monte_carlo_rejects_bad_input(eps):
    with pytest.raises(ConfigError):
        monte_carlo_outage("oracle", DeadlineConfig(1, 1, 3, 3), eps, 10, seed=0)
    with pytest.raises(ConfigError):
        monte_carlo_outage("greedy_full", DeadlineConfig(1, 1, 3, 3), eps, 0, seed=0)
    with pytest.raises(ConfigError):
        monte_carlo_outage("current_csi", DeadlineConfig(1, 1, 3, 6), eps, 10, seed=0)


def test_outage_result_json(eps):
    res = monte_carlo_outage("greedy_full", DeadlineConfig(1, 1, 2, 2), eps, 100, seed=3)
    doc = json.loads(json.dumps(res.to_dict()))
    assert {"value", "method", "trials", "seed", "stderr", "config", "eps", "generator"} <= set(doc)
    assert doc["config"] == {"lambda1": 1.0, "lambda2": 1.0, "T1": 2, "T2": 2}
    assert doc["eps"] == [0.1, 0.2, 0.2, 0.5]


def test_policy_enumeration_hand_values(eps):
    # Two slots, one packet each.  Current CSI: every slot-1 state except 00
    # serves someone, and the other user then needs slot 2 (prob 0.7).
    cfg = DeadlineConfig(1, 1, 2, 2)
    assert policy_outage_by_enumeration("greedy_full", cfg, eps).value == pytest.approx(0.27)
    assert policy_outage_by_enumeration("current_csi", cfg, eps).value == pytest.approx(1 - 0.9 * 0.7)
    assert policy_outage_by_enumeration("past_csi", cfg, eps).value == pytest.approx(0.51)


@pytest.mark.parametrize("T", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("lams", [(1, 1), (2, 1), (1, 2)])
def test_policy_dominance_exhaustive(T, lams, eps):
    cfg = DeadlineConfig(*lams, T, T)
    full, cur, past = (policy_outage_by_enumeration(p, cfg, eps).value for p in ("greedy_full", "current_csi", "past_csi"))
    assert full == pytest.approx(exact_outage(cfg, eps).value, abs=1e-12)
    assert full <= cur + 1e-12
    assert cur <= past + 1e-12


def dense_ray_scan(T1, T2, m, eps, step):
    lams = np.arange(0, T2 + step, step)
    return lams, np.array([exact_outage(DeadlineConfig(m * x, x, T1, T2), eps).value for x in lams])


def test_ray_breakpoints_contain_the_jumps(eps):
    for T1, T2, m in [(4, 4, 1.0), (2, 4, 0.5), (3, 6, 2.0), (4, 4, 0.0)]:
        bps = [float(b) for b in ray_breakpoints(T1, T2, m)]
        lams, vals = dense_ray_scan(T1, T2, m, eps, 1 / 48)
        for i in np.nonzero(np.diff(vals) > 1e-14)[0]:
            lo, hi = lams[i], lams[i + 1]
            assert any(lo - 1e-12 <= b < hi - 1e-12 for b in bps), (T1, T2, m, lo, hi)


def test_rate_solver_between_breakpoints(eps):
    sol = rate_solver(eps, 4, 4, p=0.05, m=1)
    assert (sol.lambda1, sol.lambda2) == (1.0, 1.0)
    assert sol.pout == pytest.approx(0.0181) and sol.pout <= 0.05
    assert sol.next_breakpoint == 1.5 and sol.next_pout > 0.05
    assert not sol.degenerate


def test_rate_solver_cap(eps):
    # Four packets need four unerased slots; nothing beyond lambda = 2 fits.
    sol = rate_solver(eps, 4, 4, p=0.95, m=1)
    assert sol.lambda2 == 2.0
    assert sol.pout == pytest.approx(float(rational_outage_equal_deadlines(4, 2, 2)), abs=1e-14)
    assert sol.next_pout == 1.0


def test_rate_solver_single_user(eps):
    # lambda1 = 0: outage is Pr[Binomial(4, 0.7) < lambda2].
    def binom_cdf_below(k):
        return sum(math.comb(4, j) * 0.7**j * 0.3 ** (4 - j) for j in range(k))

    for p in [0.005, 0.05, 0.1, 0.5, 0.9]:
        want = max(k for k in range(5) if binom_cdf_below(k) <= p)
        assert rate_solver(eps, 4, 4, p=p, m=0).lambda2 == want


def test_rate_solver_degenerate(eps):
    sol = rate_solver(eps, 4, 4, p=0.0, m=1)
    assert sol.degenerate and (sol.lambda1, sol.lambda2) == (0.0, 0.0)


@pytest.mark.parametrize("T1,T2,m,p", [(4, 4, 1.0, 0.2), (2, 4, 0.5, 0.1), (3, 6, 2.0, 0.3), (4, 4, 0.25, 0.01)])
def test_rate_solver_against_dense_scan(T1, T2, m, p, eps):
    sol = rate_solver(eps, T1, T2, p=p, m=m)
    lams, vals = dense_ray_scan(T1, T2, m, eps, 1 / 120)
    assert np.all(vals[lams <= sol.lambda2 + 1e-12] <= p)
    assert np.all(vals[lams > sol.lambda2 + 1e-6] > p)


def test_rate_solver_rejects_bad_targets(eps):
    for kw in [dict(p=1.0, m=1), dict(p=-0.1, m=1), dict(p=0.1, m=-1)]:
        with pytest.raises(ConfigError):
            rate_solver(eps, 4, 4, **kw)
