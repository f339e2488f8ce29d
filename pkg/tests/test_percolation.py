from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percoflow import dist, percolation
from percoflow.graphs import IntegerLattice, Lattice, Tree
from percoflow.percolation import Coverage, CoveredAlmostSurely


def covered_by_definition(window, y):
    """Double loop over (x, z): z is covered iff d(x, z) < Y_x for some x."""
    flat = np.asarray(y).ravel()
    out = np.zeros(window.size, dtype=bool)
    verts = list(window.vertices())
    for z in verts:
        for x in verts:
            if window.distance(x, z) < flat[window.index(x)]:
                out[window.index(z)] = True
                break
    return out.reshape(window.shape)


def test_line_example():
    s = percolation.sample_cover(Lattice(1, 5), dist.uniform(2), y=[2, 0, 0, 1, 0])
    assert list(np.flatnonzero(s.covered)) == [0, 1, 3]
    assert s.uncovered_vertices() == [(2,), (4,)]


def test_forced_zero_field_covers_nothing():
    for w in (Lattice(2, 4), Tree(3, 2)):
        s = percolation.sample_cover(w, dist.uniform(2), y=np.zeros(w.size, dtype=int))
        assert not s.covered.any()


def test_tree_root_radius_three_covers_depth_two():
    y = np.zeros(7, dtype=int)
    y[0] = 3
    assert percolation.sample_cover(Tree(2, 2), dist.uniform(2), y=y).covered.all()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["N1", "N2", "N3", "T2", "T3"]))
def test_reach_matches_definition(seed, kind):
    window = {"N1": Lattice(1, 12), "N2": Lattice(2, 5), "N3": Lattice(3, 3),
              "T2": Tree(2, 4), "T3": Tree(3, 3)}[kind]
    spec = dist.finite([0.5, 0.2, 0.1, 0.1, 0.1])
    s = percolation.sample_cover(window, spec, seed)
    assert np.array_equal(s.covered, covered_by_definition(window, s.y))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 40))
def test_coverage_is_monotone_in_the_field(seed, bump_at):
    w = Lattice(2, 7)
    spec = dist.geometric(0.4)
    s = percolation.sample_cover(w, spec, seed)
    y2 = s.y.copy().ravel()
    y2[bump_at % w.size] += 3
    s2 = percolation.sample_cover(w, spec, y=y2)
    assert np.all(s2.covered >= s.covered)


def test_positive_radius_covers_itself():
    w = Lattice(2, 6)
    s = percolation.sample_cover(w, dist.geometric(0.5), 4)
    assert np.all(s.covered[s.y > 0])


@pytest.mark.parametrize("spec", [dist.uniform(3), dist.geometric(0.6), dist.power_tail(2.0, 8)])
def test_coupling_holds(spec):
    for t in range(5):
        assert percolation.coupling_check(spec, 2000, seed=21, trial=t)


def test_coupling_zero_field():
    assert percolation.coupling_check(dist.uniform(2), 9, y=np.zeros(10, dtype=int))


def test_q_sequence_examples():
    q = percolation.q_sequence(dist.uniform(2), 20)
    assert np.allclose(q, 0.5)
    q2 = percolation.q_sequence(dist.finite([0.5, 0.0, 0.5]), 2)
    assert np.allclose(q2, [0.5, 0.25, 0.25])
    s = dist.geometric(0.3)
    assert percolation.q_sequence(s, 0)[0] == pytest.approx(s.mu0)


def test_q_sequence_matches_exhaustive_enumeration():
    spec = dist.finite([0.5, 0.0, 0.5])
    w = Lattice(1, 3)
    unc = np.zeros(3)
    for ys in np.ndindex(2, 2, 2):
        y = 2 * np.array(ys)
        unc += ~percolation.sample_cover(w, spec, y=y).covered / 8
    assert np.allclose(unc, percolation.q_sequence(spec, 2))


def test_expected_uncovered_line():
    assert percolation.expected_uncovered_line(dist.power_tail(2.0, 8), 10**5).converged
    res = percolation.expected_uncovered_line(dist.uniform(2), 1000)
    assert not res.converged and math.isinf(res.value)


def test_coverage_criterion_examples():
    assert percolation.coverage_criterion(dist.power_tail(1.0, 8), "Z", 1) is Coverage.COVERED_AS
    assert percolation.coverage_criterion(dist.geometric(0.5), "Z", 3) is Coverage.NOT_COVERED_AS
    assert percolation.coverage_criterion(dist.power_tail(3.0, 8), "Z", 5) is Coverage.COVERED_AS
    assert percolation.coverage_criterion(dist.power_tail(3.0, 8), "N0", 2) is Coverage.NOT_COVERED_AS


def test_z_truncation_bound():
    assert percolation.z_truncation_bound(IntegerLattice(1, 20, 5), dist.uniform(4)) == 0.0
    assert math.isinf(percolation.z_truncation_bound(IntegerLattice(1, 20, 10**4),
                                                     dist.power_tail(2.0, 8)))
    b = percolation.z_truncation_bound(IntegerLattice(1, 20, 60), dist.geometric(0.5))
    assert 0 < b < 2.0**-58


def test_z_window_refuses_when_covered():
    with pytest.raises(CoveredAlmostSurely):
        percolation.sample_cover(IntegerLattice(1, 10, 10), dist.power_tail(2.0, 8))


def test_z_window_matches_definition():
    w = IntegerLattice(1, 8, 4)
    s = percolation.sample_cover(w, dist.uniform(3), 3)
    assert np.array_equal(s.covered, covered_by_definition(w, s.y))


def test_census_forced_zero_counts_everything():
    spec = dist.finite([1 - 1e-15, 1e-15])
    st_ = percolation.uncovered_census(Lattice(2, 4), spec, 20, seed=1)
    assert np.all(st_.counts == 16)


def test_census_mean_matches_q_series():
    spec = dist.finite([0.3, 0.2, 0.5])
    # on a finite window the expected count is the partial q sum
    w = Lattice(1, 30)
    stats = percolation.uncovered_census(w, spec, 20000, seed=4)
    expect = percolation.q_sequence(spec, 29).sum()
    assert abs(stats.mean - expect) < 4 * stats.stderr


def test_census_independent_of_workers():
    spec = dist.power_tail(2.0, 8, mu0=0.6)
    a = percolation.uncovered_census(Lattice(1, 500), spec, 3000, seed=9, workers=1)
    b = percolation.uncovered_census(Lattice(1, 500), spec, 3000, seed=9, workers=4)
    assert np.array_equal(a.counts, b.counts) and np.array_equal(a.censored, b.censored)


def test_components_counted():
    spec = dist.geometric(0.3)
    st_ = percolation.uncovered_census(Lattice(2, 20), spec, 50, seed=2, count_components=True)
    assert np.all(st_.components <= st_.counts)


def test_geometric_fit_accepts_geometric_data():
    rng = np.random.default_rng(0)
    counts = rng.geometric(0.3, 20000) - 1
    fit = percolation.geometric_fit(counts)
    assert fit.p_hat == pytest.approx(0.3, abs=0.02)
    assert fit.pvalue > 0.001
