import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from blindtrace.crypto import (
    PairwisePermutation,
    PositionPermutation,
    SeededRandomSource,
    SystemRandomSource,
    apply,
    invert,
    sample_pairwise,
    sample_pairwise_arrays,
    sample_position_perm,
)
from blindtrace.errors import ParameterError, RandomnessError
from blindtrace.field import DEFAULT_FIELD, Field


def test_apply_invert_vectors(f7):
    p = PairwisePermutation(3, 2, f7)
    assert p.apply(5) == 3
    assert p.invert(3) == 5
    assert [p.apply(x) for x in range(7)] == [2, 5, 1, 4, 0, 3, 6]
    ident = PairwisePermutation(1, 0, f7)
    assert all(ident.apply(x) == x == ident.invert(x) for x in range(7))
    assert apply(p, 5) == 3 and invert(p, 3) == 5


def test_zero_multiplier_rejected(f7):
    with pytest.raises(ParameterError):
        PairwisePermutation(0, 1, f7)


def test_pairwise_exact_at_p7(f7):
    maps = [PairwisePermutation(a, b, f7) for a in range(1, 7) for b in range(7)]
    assert len(maps) == 42
    for x1, x2 in itertools.permutations(range(7), 2):
        counts = Counter((m.apply(x1), m.apply(x2)) for m in maps)
        assert len(counts) == 42 and set(counts.values()) == {1}


def test_seeded_determinism(f7):
    a = sample_pairwise(SeededRandomSource("S0"), f7)
    b = sample_pairwise(SeededRandomSource("S0"), f7)
    assert a == b
    q1 = sample_position_perm(SeededRandomSource(5), 50)
    q2 = sample_position_perm(SeededRandomSource(5), 50)
    assert q1 == q2 and hash(q1) == hash(q2)
    assert sample_position_perm(SeededRandomSource(6), 50) != q1


def test_sampled_multipliers_nonzero(rng):
    a, b = sample_pairwise_arrays(rng, Field(3), 5000)
    assert (a != 0).all() and set(a.tolist()) == {1, 2} and set(b.tolist()) == {0, 1, 2}


def test_below_is_unbiased_small_bound(rng):
    draws = rng.below(3, 30_000)
    _, p = stats.chisquare(np.bincount(draws.astype(int), minlength=3))
    assert p > 1e-4


def test_below_each_respects_bounds(rng):
    bounds = np.arange(1, 200, dtype=np.uint64)
    for _ in range(20):
        assert (rng.below_each(bounds) < bounds).all()


def test_system_source_bytes():
    src = SystemRandomSource()
    assert len(src.random_bytes(32)) == 32


def test_randomness_failure_surfaces():
    class Broken(SeededRandomSource):
        def random_bytes(self, k):
            raise RandomnessError("entropy source failed")

    with pytest.raises(RandomnessError):
        sample_position_perm(Broken(1), 4)


def test_position_perm_basics(rng):
    assert sample_position_perm(rng, 1).mapping.tolist() == [0]
    with pytest.raises(ParameterError):
        sample_position_perm(rng, 0)
    with pytest.raises(ParameterError):
        PositionPermutation([0, 0, 1])
    q = sample_position_perm(rng, 100)
    assert sorted(q.mapping.tolist()) == list(range(100))
    assert (q.inverse().mapping[q.mapping] == np.arange(100)).all()
    with pytest.raises(ValueError):
        q.mapping[0] = 1


@pytest.mark.parametrize("n", [3, 4])
def test_position_perm_uniform(n):
    rng = SeededRandomSource(f"perm{n}")
    perms = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    trials = 200 * len(perms)
    counts = np.zeros(len(perms))
    for _ in range(trials):
        counts[index[tuple(sample_position_perm(rng, n).mapping.tolist())]] += 1
    _, p = stats.chisquare(counts)
    assert p >= 1e-3


def test_fisher_yates_exact_with_scripted_draws():
    # every path of draws gives a distinct permutation with equal weight
    from blindtrace.harness import enumerate_outcomes

    dist = Counter()
    for perm, pr in enumerate_outcomes(lambda src: tuple(sample_position_perm(src, 4).mapping.tolist())):
        dist[perm] += pr
    assert len(dist) == 24 and set(dist.values()) == {Fraction(1, 24)}


def test_pairwise_default_field_roundtrip(rng):
    for _ in range(100):
        p = sample_pairwise(rng)
        x = rng.randbelow(DEFAULT_FIELD.modulus)
        assert p.invert(p.apply(x)) == x
    assert len(p.to_bytes()) == 16
