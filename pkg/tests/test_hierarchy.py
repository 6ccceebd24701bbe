import itertools
import math

import numpy as np
import pytest

from spinboson2q.bath import BathSpec, correlation_expansion
from spinboson2q.hierarchy import (
    ResourceError,
    build_hierarchy,
    enumerate_indices,
    hierarchy_size,
)


def make_expansions(n_terms=1, scheme="matsubara", alpha=(0.1, 0.2)):
    spec1 = BathSpec(alpha[0], 0.1, 1.04)
    spec2 = BathSpec(alpha[1], 0.16, 1.39)
    return (
        correlation_expansion(spec1, n_terms, scheme),
        correlation_expansion(spec2, n_terms, scheme),
    )


def brute_force_count(n_modes, depth):
    """Exhaustive enumeration oracle, independent of the production code."""
    count = 0
    for combo in itertools.product(range(depth + 1), repeat=n_modes):
        if sum(combo) <= depth:
            count += 1
    return count


class TestEnumeration:
    def test_depth_zero_single_entry(self):
        exp1, exp2 = make_expansions(3)
        h = build_hierarchy(exp1, exp2, 0)
        assert h.n_ados == 1
        assert np.all(h.counts == 0)

    def test_counts_match_binomial_and_brute_force(self):
        for n_modes, depth in [(2, 2), (3, 3), (4, 2), (5, 3)]:
            expected = brute_force_count(n_modes, depth)
            assert hierarchy_size(n_modes, depth) == expected
            assert len(enumerate_indices(n_modes, depth)) == expected

    def test_production_sizes(self):
        # two baths x (4 + Drude) exponents
        assert hierarchy_size(10, 2) != hierarchy_size(10, 6)
        assert hierarchy_size(12, 2) == math.comb(14, 2) == 91
        exp1, exp2 = make_expansions(4)
        h2 = build_hierarchy(exp1, exp2, 2)
        assert h2.n_ados == math.comb(12, 2) == 66
        h6_count = hierarchy_size(10, 6)
        assert h6_count == math.comb(16, 6) == 8008

    def test_deterministic_layout(self):
        exp1, exp2 = make_expansions(2)
        h_a = build_hierarchy(exp1, exp2, 3)
        h_b = build_hierarchy(exp1, exp2, 3)
        assert np.array_equal(h_a.counts, h_b.counts)
        assert np.array_equal(h_a.up, h_b.up)
        assert np.array_equal(h_a.down, h_b.down)


class TestNeighborTables:
    def test_up_then_down_returns_origin(self):
        exp1, exp2 = make_expansions(2)
        h = build_hierarchy(exp1, exp2, 3)
        for a in range(h.n_ados):
            for j in range(h.n_modes):
                u = h.up[a, j]
                if u >= 0:
                    assert h.down[u, j] == a

    def test_down_matches_counts(self):
        exp1, exp2 = make_expansions(2)
        h = build_hierarchy(exp1, exp2, 3)
        assert np.all((h.down >= 0) == (h.counts > 0))

    def test_first_tier_positions(self):
        exp1, exp2 = make_expansions(2)
        h = build_hierarchy(exp1, exp2, 2)
        for bath in (0, 1):
            for j, pos in zip(
                np.flatnonzero(h.mode_bath == bath), h.first_tier_positions(bath)
            ):
                expected = np.zeros(h.n_modes, dtype=int)
                expected[j] = 1
                assert np.array_equal(h.counts[pos], expected)

    def test_position_lookup(self):
        exp1, exp2 = make_expansions(1)
        h = build_hierarchy(exp1, exp2, 2)
        idx = tuple(h.counts[5])
        assert h.position(idx) == 5
        with pytest.raises(KeyError):
            h.position((9,) * h.n_modes)


class TestDampingAndBudget:
    def test_damping_is_count_weighted_rates(self):
        exp1, exp2 = make_expansions(2)
        h = build_hierarchy(exp1, exp2, 3)
        ref = h.counts @ h.rates
        assert np.allclose(h.damping, ref)
        assert np.all(h.damping[h.tiers > 0] > 0)

    def test_memory_budget(self):
        exp1, exp2 = make_expansions(4)
        with pytest.raises(ResourceError, match="budget"):
            build_hierarchy(exp1, exp2, 6, max_bytes=1024)

    def test_rejects_negative_depth(self):
        exp1, exp2 = make_expansions(1)
        with pytest.raises(ValueError):
            build_hierarchy(exp1, exp2, -1)
