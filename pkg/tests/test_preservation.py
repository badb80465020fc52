import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsigma.groups import GroupAssignment, identity_plan, make_plan, uniform_plan
from dsigma.groups import AuxInfo
from dsigma.perm import Permutation
from dsigma.preservation import (
    PreservationError,
    brute_force_counts,
    brute_force_delta_hamming,
    c_h,
    derangements,
    eta_at_delta,
    estimate_preservation,
    exact_delta_hamming,
    f_inclusion_exclusion,
    f_table,
    failure_threshold,
    hamming_distance_counts,
    overlap_fraction,
)


def test_overlap_example():
    sigma = Permutation.parse("5 3 2 6 7 9 8 1 4 10")
    assert overlap_fraction(sigma, [0, 3, 4, 6, 7]) == 0.8


def test_uniform_strict_preservation_count():
    # theta = 0, |S| = 3, eta = 1: fails whenever any member of S leaves S
    stay = math.factorial(3) * math.factorial(3)
    assert exact_delta_hamming(0.0, 6, 3, 1.0) == pytest.approx((720 - stay) / 720, abs=1e-15)
    assert exact_delta_hamming(1.3, 6, 3, 0.0) == 0.0


def test_derangements():
    assert [derangements(p) for p in range(8)] == [1, 0, 1, 2, 9, 44, 265, 1854]
    for p in range(1, 8):
        brute = sum(all(s[i] != i for i in range(p)) for s in permutations(range(p)))
        assert derangements(p) == brute
    with pytest.raises(PreservationError):
        derangements(21)


def brute_f(p, m):
    # slots 0..p-1 are the homes of A-items 0..p-1; items p.. are B-items
    return sum(all(s[i] != i for i in range(p)) for s in permutations(range(p + m)))


def test_f_recursion():
    for p in range(5):
        for m in range(5):
            assert f_table(p, m) == f_inclusion_exclusion(p, m) == brute_f(p, m)
    assert f_table(3, 0) == 2
    assert f_table(0, 3) == 6
    for p in range(12):
        for m in range(20 - p):
            assert f_table(p, m) == f_inclusion_exclusion(p, m)


def test_failure_threshold():
    assert failure_threshold(4, 0.75) == 1
    assert failure_threshold(3, 0.5) == 1
    assert failure_threshold(5, 1.0) == 0
    assert failure_threshold(10, 0.7) == 3  # exact arithmetic, not 0.3 * 10 in floats


def test_hamming_counts_sum():
    for n in range(1, 10):
        assert sum(hamming_distance_counts(n)) == math.factorial(n)


@pytest.mark.parametrize("n", [5, 6, 7])
def test_c_h_matches_enumeration(n):
    for size in range(1, n):
        for eta in (0.5, 0.75, 1.0):
            k = failure_threshold(size, eta)
            counts = brute_force_counts(n, size, eta)
            assert [c_h(h, n, size, k) for h in range(n + 1)] == counts
            assert all(counts[h] == 0 for h in range(min(2 * k + 2, n + 1)))


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(2, 7),
    theta=st.floats(0, 3),
    eta=st.sampled_from([0.25, 0.5, 0.6, 0.75, 0.9, 1.0]),
    data=st.data(),
)
def test_exact_matches_brute_force(n, theta, eta, data):
    size = data.draw(st.integers(1, n))
    exact = exact_delta_hamming(theta, n, size, eta)
    assert exact == pytest.approx(brute_force_delta_hamming(theta, n, size, eta), abs=1e-12)


def test_only_size_matters():
    a = exact_delta_hamming(0.5, 6, [0, 2, 4], 0.75)
    b = brute_force_delta_hamming(0.5, 6, [1, 3, 5], 0.75)
    assert a == pytest.approx(b, abs=1e-12)
    assert a == exact_delta_hamming(0.5, 6, 3, 0.75)


def test_delta_decreasing_in_theta():
    values = [exact_delta_hamming(t, 12, 5, 0.8) for t in np.linspace(0, 4, 9)]
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def test_delta_monotone_in_eta():
    values = [exact_delta_hamming(0.7, 10, 6, e) for e in (0.0, 0.5, 2 / 3, 5 / 6, 1.0)]
    assert values[0] == 0.0
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_monte_carlo_endpoints():
    S = list(range(10))
    rep = estimate_preservation(identity_plan(40), S, 1.0, 200, 0)
    assert rep.delta == 0.0 and rep.extra["mean_overlap"] == 1.0
    rep = estimate_preservation(uniform_plan(40), S, 0.9, 2000, 0, delta=0.05)
    assert rep.delta > 0.99
    assert rep.extra["mean_overlap"] == pytest.approx(0.25, abs=0.02)
    assert 0 <= rep.extra["eta_at_delta"] <= 1


def test_monte_carlo_deterministic():
    g = GroupAssignment.from_groups([[0, 1, 2], [1, 0, 2], [2, 0, 1, 3], [3, 2, 4], [4, 3]])
    from dsigma.groups import plan_from_assignment

    plan = plan_from_assignment(g, 1.0)
    a = estimate_preservation(plan, [0, 1, 2], 0.66, 500, 9)
    b = estimate_preservation(plan, [0, 1, 2], 0.66, 500, 9)
    assert a.delta == b.delta


def test_wider_groups_preserve_less():
    pts = np.linspace(0, 1, 200)[:, None]
    aux = AuxInfo.from_points(pts)
    S = list(range(80, 120))
    etas = []
    for r in (0.01, 0.05, 0.2):
        plan = make_plan(aux, r, 1.0)
        etas.append(estimate_preservation(plan, S, 0.5, 300, 1, delta=0.1).extra["eta_at_delta"])
    assert etas[0] >= etas[1] >= etas[2]


def test_eta_at_delta():
    counts = np.array([10, 9, 8, 7, 6, 5, 4, 3, 2, 1])
    assert eta_at_delta(counts, 10, 0.0) == 0.1
    assert eta_at_delta(counts, 10, 0.2) == 0.3
    with pytest.raises(PreservationError):
        eta_at_delta(counts, 10, 1.5)


def test_validation():
    with pytest.raises(PreservationError):
        exact_delta_hamming(1.0, 21, 3, 0.5)
    with pytest.raises(PreservationError):
        brute_force_delta_hamming(1.0, 9, 3, 0.5)
    with pytest.raises(PreservationError):
        overlap_fraction(Permutation([0, 1]), [])
    with pytest.raises(PreservationError):
        failure_threshold(3, 1.5)
