import numpy as np
import pytest
from brute_force import eps_nondominated
from hypothesis import given
from hypothesis import strategies as st

from resopt.moea import EpsilonArchive, Individual, InsertResult, box_index, corner_distance

EPS4 = (50.0, 50.0, 0.01, 0.01)


def ind(*f):
    return Individual(np.zeros(1), np.array(f, dtype=float))


class TestBoxIndex:
    def test_floor(self):
        assert box_index((120, 30), (50, 50)).tolist() == [2, 0]

    def test_corner(self):
        assert box_index((100, 50), (50, 50)).tolist() == [2, 1]

    def test_identity_grid(self):
        assert box_index((3, -4, 7), (1, 1, 1)).tolist() == [3, -4, 7]

    def test_non_finite(self):
        with pytest.raises(ValueError):
            box_index((np.inf, 0), (1, 1))

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            EpsilonArchive((1.0, 0.0))


class TestInsert:
    def test_dominating_box_evicts(self):
        a = EpsilonArchive((50, 50))
        assert a.insert(ind(120, 10)) is InsertResult.ACCEPTED
        assert a.insert(ind(60, 10)) is InsertResult.ACCEPTED
        assert [m.objectives.tolist() for m in a] == [[60, 10]]

    def test_same_box_farther_rejected(self):
        a = EpsilonArchive((50, 50))
        a.insert(ind(120, 30))
        assert corner_distance((120, 30), (50, 50)) * 50 == pytest.approx(36.0555, abs=1e-4)
        assert corner_distance((140, 40), (50, 50)) * 50 == pytest.approx(56.5685, abs=1e-4)
        assert a.insert(ind(140, 40)) is InsertResult.SAME_BOX_REJECTED
        assert a.members[0].objectives.tolist() == [120, 30]

    def test_same_box_nearer_replaces(self):
        a = EpsilonArchive((50, 50))
        a.insert(ind(140, 40))
        assert a.insert(ind(120, 30)) is InsertResult.SAME_BOX_REPLACED
        assert a.improvements == 1

    def test_duplicate_rejected_without_progress(self):
        a = EpsilonArchive((50, 50))
        a.insert(ind(120, 30))
        assert a.insert(ind(120, 30)) is InsertResult.SAME_BOX_REJECTED
        assert a.improvements == 1 and len(a) == 1

    def test_dominated_candidate(self):
        a = EpsilonArchive((1, 1))
        a.insert(ind(0.5, 0.5))
        assert a.insert(ind(1.5, 0.5)) is InsertResult.DOMINATED
        assert not InsertResult.DOMINATED.stored


def _random_points(rng, n=200):
    # spread over a few boxes per axis so every insert outcome occurs
    scale = np.array(EPS4) * rng.uniform(2, 8, 4)
    pts = rng.uniform(0, 1, (n, 4)) * scale
    # anti-correlate two axes so a nontrivial front exists
    pts[:, 1] = scale[1] - pts[:, 0] * scale[1] / scale[0] + rng.normal(0, EPS4[1], n)
    return pts


@given(st.integers(0, 2**32 - 1))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = _random_points(rng)
    a = EpsilonArchive(EPS4)
    for i, p in enumerate(pts):
        a.insert(Individual(np.array([float(i)]), p))
        a.check_invariant()
    got = sorted(int(m.genome[0]) for m in a)
    assert got == eps_nondominated(pts.tolist(), EPS4)


@given(st.integers(0, 2**32 - 1))
def test_order_robust(seed):
    rng = np.random.default_rng(seed)
    pts = _random_points(rng, 80)

    def final(order):
        a = EpsilonArchive(EPS4)
        for i in order:
            a.insert(Individual(np.array([float(i)]), pts[i]))
        return sorted(int(m.genome[0]) for m in a)
    # continuous draws make corner distances distinct almost surely
    assert final(range(80)) == final(rng.permutation(80))


def test_progress_counts_new_boxes_only():
    a = EpsilonArchive((1, 1))
    for f in [(5.5, 5.5), (5.2, 5.2), (4.5, 6.5), (9, 9), (3.5, 3.5)]:
        a.insert(ind(*f))
    # new boxes: (5,5), (4,6), (3,3); (5.2,5.2) only replaces and (9,9) is dominated
    assert a.improvements == 3
    assert len(a) == 1
