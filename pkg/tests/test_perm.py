import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsigma import _pykernels, kernels
from dsigma.perm import (
    Permutation,
    PermutationError,
    all_permutations_array,
    apply,
    compose,
    enumerate_permutations,
    hamming,
    identity,
    index_of_permutations,
    inverse,
    inversions_batch,
    item_kendall_tau,
    kendall_tau,
    kendall_tau_reference,
)


def perms_of(n):
    return st.permutations(list(range(n))).map(Permutation)


sized_pair = st.integers(1, 9).flatmap(lambda n: st.tuples(perms_of(n), perms_of(n)))


def test_identity_basics():
    assert identity(3).mapping.tolist() == [0, 1, 2]
    x = [4, 1, 9, 9, 2]
    assert apply(identity(5), x) == x
    assert kendall_tau(identity(4), identity(4)) == 0
    with pytest.raises(PermutationError):
        identity(0)


def test_apply_examples():
    sigma = Permutation.from_one_based([1, 3, 5, 4, 2])
    assert apply(sigma, [21, 33, 45, 65, 67]) == [21, 45, 67, 65, 33]
    y = ["y1", "y2", "y3", "y4", "y5"]
    assert apply(Permutation.parse("4 5 2 3 1"), y) == ["y4", "y5", "y2", "y3", "y1"]


def test_apply_length_mismatch():
    with pytest.raises(PermutationError):
        apply(identity(3), [1, 2])


def test_inverse_example():
    sigma = Permutation.from_one_based([1, 3, 5, 4, 2])
    assert inverse(sigma).one_based() == [1, 5, 2, 4, 3]
    assert inverse(identity(6)) == identity(6)


def test_inverse_involution_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = Permutation(rng.permutation(8))
        assert inverse(inverse(s)) == s


def test_rank_distance_goldens():
    sigma = identity(10)
    pi = Permutation.from_one_based([1, 2, 3, 6, 5, 4, 7, 8, 9, 10])
    assert kendall_tau(sigma, pi) == 3
    assert hamming(sigma, pi) == 2
    assert kendall_tau(Permutation.parse("1 2 3"), Permutation.parse("3 2 1")) == 3


def test_invalid_mappings_rejected():
    for bad in ([0, 0, 1], [1, 2, 3], [], [[0, 1]]):
        with pytest.raises(PermutationError):
            Permutation(bad)
    with pytest.raises(PermutationError):
        Permutation.parse("1 two 3")


def test_format_round_trip():
    s = Permutation.parse("3 1 2 5 4")
    assert Permutation.parse(s.format()) == s


def test_compose_identity_and_inverse():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = Permutation(rng.permutation(7))
        assert compose(s, identity(7)) == s
        assert compose(inverse(s), s) == identity(7)
        assert compose(s, inverse(s)) == identity(7)


def test_compose_size_mismatch():
    with pytest.raises(PermutationError):
        compose(identity(3), identity(4))


@settings(max_examples=200)
@given(st.tuples(perms_of(6), perms_of(6)), st.lists(st.integers(), min_size=6, max_size=6))
def test_compose_convention(ab, x):
    a, b = ab
    assert apply(compose(a, b), x) == apply(a, apply(b, x))


def test_enumerate_counts():
    assert len(list(enumerate_permutations(3))) == 6
    five = list(enumerate_permutations(5))
    assert len(five) == 120 and len(set(five)) == 120
    derangements = [p for p in enumerate_permutations(4) if not np.any(p.mapping == np.arange(4))]
    assert len(derangements) == 9
    with pytest.raises(PermutationError):
        next(enumerate_permutations(11))


def test_hamming_never_one():
    hist = np.bincount([hamming(p, identity(4)) for p in enumerate_permutations(4)], minlength=5)
    assert hist[1] == 0
    assert hist.sum() == 24


def test_triangle_inequality_exhaustive_n4():
    perms = list(enumerate_permutations(4))
    kt = {(a, b): kendall_tau(a, b) for a in perms for b in perms}
    hm = {(a, b): hamming(a, b) for a in perms for b in perms}
    for a, b, c in itertools.product(perms, repeat=3):
        assert kt[a, c] <= kt[a, b] + kt[b, c]
        assert hm[a, c] <= hm[a, b] + hm[b, c]


@settings(max_examples=300)
@given(sized_pair)
def test_kendall_matches_reference_and_is_symmetric(pair):
    s, p = pair
    d = kendall_tau(s, p)
    assert d == kendall_tau_reference(s, p)
    assert d == kendall_tau(p, s)
    assert (d == 0) == (s == p)
    assert d <= s.n * (s.n - 1) // 2
    assert hamming(s, p) == hamming(p, s)


@settings(max_examples=200)
@given(sized_pair)
def test_item_kendall_is_kendall_of_inverses(pair):
    s, p = pair
    assert item_kendall_tau(s, p) == kendall_tau_reference(inverse(s), inverse(p))


@pytest.mark.parametrize("n", [1, 2, 3, 17, 64, 1000, 4099])
def test_inversion_kernels_agree(n):
    rng = np.random.default_rng(n)
    v = rng.permutation(n)
    expected = int(np.count_nonzero(np.triu(v[:, None] > v[None, :], k=1)))
    assert _pykernels.count_inversions(v) == expected
    assert kernels.count_inversions(v) == expected


def test_rim_kernels_agree():
    rng = np.random.default_rng(1)
    n = 40
    offsets = np.stack([rng.integers(0, np.arange(1, n + 1)) for _ in range(30)])
    assert np.array_equal(kernels.rim_insert(offsets), _pykernels.rim_insert(offsets))


def test_bfs_kernels_agree():
    indptr = np.array([0, 2, 3, 4, 4, 5, 6])
    indices = np.array([2, 1, 0, 0, 5, 4])
    assert kernels.bfs_order(indptr, indices, 0).tolist() == [0, 2, 1, 3, 4, 5]
    assert _pykernels.bfs_order(indptr, indices, 0).tolist() == [0, 2, 1, 3, 4, 5]


def test_batch_helpers():
    arr = all_permutations_array(4)
    assert arr.shape == (24, 4)
    assert index_of_permutations(arr).tolist() == list(range(24))
    expected = [kendall_tau(Permutation(r), identity(4)) for r in arr]
    assert inversions_batch(arr).tolist() == expected


def test_permutations_hashable():
    assert len({identity(3), Permutation([0, 1, 2]), Permutation([1, 0, 2])}) == 2
