"""Acceptance suite: each test checks one criterion at its stated tolerance and
time budget, and records a single PASS/FAIL line (printed in the terminal summary).

Seeds are fixed up front (0 unless stated) and never tuned to the outcome.
"""

import math
import time

import numpy as np
import pytest

from dsigma.audit import audit_composition, audit_dsigma, audit_semantic, product_prior, random_correlated_prior
from dsigma.datasets import generate_syn
from dsigma.evaluation import AttackConfig, ball, endpoint_reports, sweep
from dsigma.groups import (
    AuxInfo,
    GroupAssignment,
    compute_groups,
    group_widths,
    identity_plan,
    plan_from_assignment,
    select_root,
    uniform_plan,
)
from dsigma.ldp import RandomizerConfig, ldp_ratio_audit
from dsigma.mallows import MallowsParams, exact_pmf, log_normalizer, sample_batch
from dsigma.mechanism import shuffle, shuffle_with_fixed_draw, sigma_star_batch
from dsigma.perm import (
    Permutation,
    enumerate_permutations,
    hamming,
    identity,
    index_of_permutations,
    item_kendall_tau,
    kendall_tau,
)
from dsigma.preservation import (
    brute_force_counts,
    brute_force_delta_hamming,
    c_h,
    exact_delta_hamming,
    failure_threshold,
)

from conftest import FRIEND_EDGES, ILLUSTRATION_GROUPS

SEED = 0


def tv_from_draws(draws: np.ndarray, pmf: np.ndarray) -> float:
    emp = np.bincount(index_of_permutations(draws), minlength=pmf.size) / draws.shape[0]
    return 0.5 * float(np.abs(emp - pmf).sum())


def monotone_with_slack(values, increasing: bool, slack: float = 0.02) -> bool:
    """At most one adjacent inversion, of size at most ``slack``."""
    steps = np.diff(values) if increasing else -np.diff(values)
    bad = steps[steps < 0]
    return bad.size <= 1 and bool(np.all(-bad <= slack))


def test_criterion_01_worked_example(verdict):
    t0 = time.perf_counter()
    g = GroupAssignment.from_groups([ILLUSTRATION_GROUPS[i] for i in range(1, 9)], one_based=True)
    plan = plan_from_assignment(g, 1.0, tie_break="listed")
    widths = group_widths(plan.sigma0, g)
    y = [f"y{i}" for i in range(1, 9)]
    z = shuffle_with_fixed_draw(plan, y, Permutation.parse("3 2 5 4 8 1 7 6")).z
    elapsed = time.perf_counter() - t0
    checks = {
        "root": select_root(g) + 1 == 5,
        "w_G5": widths[4] == 4,
        "w_G4": widths[3] == 7,
        "delta": plan.sensitivity == 28,
        "theta": plan.theta == 1.0 / 28,
        "z": z == ["y1", "y2", "y5", "y8", "y3", "y7", "y6", "y4"],
        "time": elapsed < 1.0,
    }
    failed = [k for k, ok in checks.items() if not ok]
    verdict(1, not failed, f"root/widths/sensitivity/theta/z exact, {elapsed:.3f}s" + (f" failed={failed}" if failed else ""))


def test_criterion_02_distance_goldens(verdict):
    t0 = time.perf_counter()
    sigma = identity(10)
    pi = Permutation.parse("1 2 3 6 5 4 7 8 9 10")
    kt, hd = kendall_tau(sigma, pi), hamming(sigma, pi)
    friends = AuxInfo.from_edges(10, [(u - 1, v - 1) for u, v in FRIEND_EDGES])
    w = group_widths(Permutation.parse("1 3 7 8 6 4 5 2 9 10"), compute_groups(friends, 2))[0]
    elapsed = time.perf_counter() - t0
    ok = kt == 3 and hd == 2 and w == 7 and elapsed < 1.0
    verdict(2, ok, f"kendall={kt} hamming={hd} width={w}, {elapsed:.3f}s")


def test_criterion_03_mallows_exactness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    s0 = Permutation(rng.permutation(5))
    tvs = []
    for theta in (0.0, 0.5, 2.0):
        p = MallowsParams(theta, s0)
        tvs.append(tv_from_draws(sample_batch(p, 200_000, rng), exact_pmf(p)))
    worst_norm = 0.0
    for n in range(1, 7):
        for theta in (0.0, 0.25, 0.5, 1.0, 2.0, 5.0):
            direct = math.fsum(math.exp(-theta * item_kendall_tau(s, identity(n))) for s in enumerate_permutations(n))
            worst_norm = max(worst_norm, abs(math.exp(log_normalizer(theta, n)) - direct) / direct)
    elapsed = time.perf_counter() - t0
    ok = max(tvs) <= 0.01 and worst_norm <= 1e-12 and elapsed < 30
    verdict(3, ok, f"TV={[round(v, 5) for v in tvs]} (<=0.01), normalizer rel err={worst_norm:.1e}, {elapsed:.1f}s")


def _random_grouping(rng, n):
    pts = rng.uniform(0, 1, size=(n, rng.integers(1, 3)))
    return compute_groups(AuxInfo.from_points(pts), float(rng.uniform(0.1, 0.9)))


def test_criterion_04_dsigma_audit(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_excess, fails = -math.inf, 0
    for c in range(20):
        alpha = (0.5, 1.0, 2.0)[c % 3]
        rep = audit_dsigma(plan_from_assignment(_random_grouping(rng, 5), alpha))
        worst_excess = max(worst_excess, rep.max_log_ratio_observed - alpha)
        fails += not rep.max_log_ratio_observed <= alpha + 1e-9
    elapsed = time.perf_counter() - t0
    ok = fails == 0 and elapsed < 120
    verdict(4, ok, f"20 configs, {fails} over bound, max(ratio - alpha)={worst_excess:.2e}, {elapsed:.1f}s")


def test_criterion_05_semantic_audit(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    alpha = 1.0
    corr_gaps, prod_gaps = [], []
    for _ in range(5):
        g = _random_grouping(rng, 4)
        plan = plan_from_assignment(g, alpha)
        owner = int(rng.integers(4))
        corr_gaps.append(audit_semantic(plan, random_correlated_prior(4, rng, g.group(owner))).max_log_ratio_observed)
        prod_gaps.append(audit_semantic(plan, product_prior(rng.uniform(0.2, 0.8, 4))).max_log_ratio_observed)
    elapsed = time.perf_counter() - t0
    corr_ok = max(corr_gaps) <= alpha + 1e-9
    prod_ok = max(prod_gaps) <= 1e-9
    ok = corr_ok and prod_ok and elapsed < 120
    verdict(5, ok, f"correlated max gap={max(corr_gaps):.4f} (<= {alpha}) {'ok' if corr_ok else 'FAILED'}; "
                   f"product max gap={max(prod_gaps):.4f} (<= 1e-9) {'ok' if prod_ok else 'FAILED'}; {elapsed:.1f}s")


def test_criterion_06_composition(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    g = _random_grouping(rng, 4)
    while g.sizes().max() < 3:
        g = _random_grouping(rng, 4)
    a, b = plan_from_assignment(g, 0.5), plan_from_assignment(g, 0.5)
    rep = audit_composition(a, b)
    elapsed = time.perf_counter() - t0
    ok = rep.max_log_ratio_observed <= 1.0 + 1e-9 and elapsed < 60
    verdict(6, ok, f"joint max log-ratio={rep.max_log_ratio_observed:.6f} (<= 1.0), {elapsed:.1f}s")


def test_criterion_07_preservation_formula(verdict):
    t0 = time.perf_counter()
    worst, cells, structural = 0.0, 0, True
    for n in (6, 7, 8):
        for size in range(2, n):
            for eta in (0.5, 0.75, 1.0):
                k = failure_threshold(size, eta)
                counts = brute_force_counts(n, size, eta)
                for h in range(0, min(2 * k + 1, n) + 1):
                    structural &= c_h(h, n, size, k) == 0 == counts[h]
                for theta in (0.0, 0.5, 1.0):
                    diff = abs(exact_delta_hamming(theta, n, size, eta) - brute_force_delta_hamming(theta, n, size, eta))
                    worst = max(worst, diff)
                    cells += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and structural and cells == 135 and elapsed < 180
    verdict(7, ok, f"{cells} cells, max |exact - brute|={worst:.1e}, c_h=0 below 2k+2: {structural}, {elapsed:.1f}s")


def test_criterion_08_endpoints(verdict):
    t0 = time.perf_counter()
    y = np.random.default_rng(SEED).integers(0, 5, 50)
    same = np.array_equal(shuffle(identity_plan(50), y, SEED).z, y)
    draws = sigma_star_batch(uniform_plan(5), 200_000, np.random.default_rng(SEED))
    tv = tv_from_draws(draws, np.full(120, 1 / 120))
    elapsed = time.perf_counter() - t0
    ok = same and tv <= 0.01 and elapsed < 30
    verdict(8, ok, f"identity plan z==y: {same}; uniform sigma* TV={tv:.5f} (<=0.01), {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_09_trend(verdict):
    t0 = time.perf_counter()
    ds = generate_syn(5000, SEED)
    cfg = AttackConfig(k_neighbors=25, trials=50, epsilon=2.5, r_star=0.1)
    radii = [0.0, 0.002, 0.02, 100.0]
    rows = sweep(ds, [1.0], radii, cfg, SEED)
    rho = [r["rho"] for r in rows]
    lam = [r["lambda"] for r in rows]
    ends = endpoint_reports(ds, cfg, SEED, ball(ds, cfg.r_star))
    gap = ends["identity"]["rho"] - ends["uniform"]["rho"]
    elapsed = time.perf_counter() - t0
    ok = (monotone_with_slack(rho, increasing=False) and monotone_with_slack(lam, increasing=True)
          and gap >= 0.2 and elapsed < 600)
    verdict(9, ok, f"r={radii} rho={[round(v, 4) for v in rho]} lambda={[round(v, 4) for v in lam]} "
                   f"rho(identity)-rho(uniform)={gap:.4f}, {elapsed:.0f}s")


def test_criterion_10_ldp_audit(verdict):
    t0 = time.perf_counter()
    worst = max(abs(ldp_ratio_audit(RandomizerConfig(e, k)) - e) for k in (2, 5) for e in (0.5, 1.0, 2.5))
    elapsed = time.perf_counter() - t0
    verdict(10, worst <= 1e-12 and elapsed < 1.0, f"max |ratio - epsilon|={worst:.1e}, {elapsed:.3f}s")
