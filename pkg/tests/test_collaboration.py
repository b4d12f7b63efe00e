"""
Unit tests for partner selection and data sharing.

Tests cover:
- Benefit matrices in plaintext and private mode
- Global-maximization partner selection
- The three sharing strategies and log augmentation
"""

import itertools
import random
import unittest

import numpy as np

from core.collaboration import (
    BenefitMatrix,
    Mode,
    PartnershipRound,
    SharedData,
    Strategy,
    WindowPolicy,
    augment,
    benefit_matrix,
    collaborate,
    pair_count,
    policy_window,
    repartner_due,
    select_partners,
    share,
    share_private,
)
from core.errors import InputError
from core.events import AttackEvent, VictimLog, parse_address
from core.similarity import Metric

ORIGIN = 1356998400
DAY = 86400
BASE = parse_address("61.160.213.0")


def _event(victim, offset, day=1, seconds=0, port=22):
    return AttackEvent(victim, BASE + offset, port, ORIGIN + (day - 1) * DAY + seconds)


def _log(victim, *events):
    return VictimLog(victim, ORIGIN, tuple(events))


def _logs(sources_by_victim, day=1):
    return {
        victim: _log(victim, *(_event(victim, offset, day) for offset in offsets))
        for victim, offsets in sources_by_victim.items()
    }


def _matrix(values, victims=None):
    values = np.asarray(values, dtype=float)
    victims = victims or tuple(f"v{i:03d}" for i in range(len(values)))
    return BenefitMatrix(tuple(victims), values, Metric.JACCARD, 6)


def _random_matrix(n, seed):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)), 1)
    values = upper + upper.T
    np.fill_diagonal(values, np.nan)
    return values


class TestBenefitMatrix(unittest.TestCase):
    """Test pairwise benefit estimation."""

    def test_intersection_size(self):
        """Test the two-victim example."""
        matrix = benefit_matrix(_logs({"a": [1, 2], "b": [2, 3]}), Metric.INTERSECTION_SIZE, day=2)

        self.assertEqual(matrix.score("a", "b"), 1.0)
        self.assertEqual(matrix.score("b", "a"), 1.0)
        self.assertIsNone(matrix.score("a", "a"))

    def test_window_excludes_current_day(self):
        """Test that sets come from days before the current day."""
        logs = _logs({"a": [1, 2], "b": [2, 3]}, day=3)
        matrix = benefit_matrix(logs, Metric.INTERSECTION_SIZE, day=3)
        self.assertEqual(matrix.score("a", "b"), 0.0)

    def test_private_equals_plaintext(self):
        """Test that every metric gives the same matrix in both modes."""
        rng = random.Random(6)
        logs = _logs({v: rng.sample(range(300), rng.randint(1, 6)) for v in ("a", "b", "c")})
        for metric in Metric:
            plain = benefit_matrix(logs, metric, Mode.PLAINTEXT, day=2)
            private = benefit_matrix(logs, metric, Mode.PRIVATE, day=2)
            np.testing.assert_array_equal(plain.values, private.values)

    def test_pair_count(self):
        """Test that every unordered pair is scored once."""
        logs = _logs({f"v{i}": [i, i + 1] for i in range(100)})
        matrix = benefit_matrix(logs, Metric.INTERSECTION_SIZE, day=2)
        self.assertEqual(len(list(matrix.pairs())), 4950)

    def test_undefined_is_missing(self):
        """Test that an undefined Pearson score is recorded as missing."""
        logs = {"a": _log("a", _event("a", 1)), "b": _log("b", _event("b", 2)), "c": _log("c")}
        matrix = benefit_matrix(logs, Metric.PEARSON, day=2)

        self.assertIsNone(matrix.score("a", "c"))
        self.assertIsNotNone(matrix.score("a", "b"))

    def test_too_few_victims(self):
        """Test that one victim has no pairs."""
        with self.assertRaises(InputError):
            benefit_matrix(_logs({"a": [1]}), Metric.JACCARD, day=2)

    def test_to_frame(self):
        """Test the partnerships table."""
        matrix = benefit_matrix(_logs({"a": [1, 2], "b": [2, 3], "c": [3]}), Metric.INTERSECTION_SIZE, day=2)
        frame = matrix.to_frame(select_partners(matrix, 0.3))
        self.assertEqual(list(frame.columns), ["victim_a", "victim_b", "metric", "score", "selected"])
        self.assertEqual(int(frame["selected"].sum()), 1)


class TestSelectPartners(unittest.TestCase):
    """Test global-maximization partner selection."""

    def test_top_one_percent(self):
        """Test that 100 victims at 1% give 50 pairs."""
        partnership = select_partners(_matrix(_random_matrix(100, 1)), 0.01)
        self.assertEqual(len(partnership.pairs), 50)
        self.assertEqual(pair_count(100, 0.01), 50)

    def test_unique_maximum(self):
        """Test that a single pair picks the argmax."""
        values = _random_matrix(4, 2) * 0.5
        values[1, 3] = values[3, 1] = 0.9
        partnership = select_partners(_matrix(values), 0.1)
        self.assertEqual(partnership.pairs, (("v001", "v003"),))
        self.assertEqual(partnership.partners("v003"), frozenset({"v001"}))
        self.assertEqual(partnership.collaborators, frozenset({"v001", "v003"}))

    def test_matches_full_sort(self):
        """Test against a brute-force sort of all pairs."""
        values = _random_matrix(20, 3)
        matrix = _matrix(values)
        ranked = sorted(
            itertools.combinations(range(20), 2),
            key=lambda ij: (-values[ij[0], ij[1]], ij),
        )
        expected = tuple(sorted((matrix.victims[i], matrix.victims[j]) for i, j in ranked[:pair_count(20, 0.05)]))
        self.assertEqual(select_partners(matrix, 0.05).pairs, expected)

    def test_ties_break_on_pair_id(self):
        """Test deterministic tie breaking."""
        values = np.ones((4, 4))
        np.fill_diagonal(values, np.nan)
        self.assertEqual(select_partners(_matrix(values), 0.1).pairs, (("v000", "v001"),))

    def test_affine_invariance(self):
        """Test that a positive affine rescaling selects the same pairs."""
        values = _random_matrix(30, 4)
        self.assertEqual(
            select_partners(_matrix(values), 0.02).pairs,
            select_partners(_matrix(3.0 * values + 2.0), 0.02).pairs,
        )

    def test_missing_scores(self):
        """Test that missing scores are never selected."""
        values = np.full((3, 3), np.nan)
        values[0, 1] = values[1, 0] = 0.1
        partnership = select_partners(_matrix(values), 1.0)
        self.assertEqual(partnership.pairs, (("v000", "v001"),))
        self.assertFalse(partnership.all_missing)

        empty = select_partners(_matrix(np.full((3, 3), np.nan)), 1.0)
        self.assertEqual(empty.pairs, ())
        self.assertTrue(empty.all_missing)

    def test_fraction_bounds(self):
        """Test fraction validation and the zero fraction."""
        matrix = _matrix(_random_matrix(5, 5))
        self.assertEqual(select_partners(matrix, 0).pairs, ())
        with self.assertRaises(InputError):
            select_partners(matrix, 1.5)


class TestShare(unittest.TestCase):
    """Test the sharing strategies."""

    def setUp(self):
        """Set up i with a@t1, b@t2 and j with a@t3."""
        self.a1 = _event("i", 1, seconds=10)
        self.b2 = _event("i", 2, seconds=20)
        self.a3 = _event("j", 1, seconds=30)
        self.log_i = _log("i", self.a1, self.b2)
        self.log_j = _log("j", self.a3)

    def test_intersection_with_data(self):
        """Test that each side receives the other's events on common sources."""
        to_i, to_j = share(self.log_i, self.log_j, Strategy.INTERSECTION_WITH_DATA, day=2)
        self.assertEqual(to_i.events, (self.a3,))
        self.assertEqual(to_j.events, (self.a1,))
        self.assertEqual(to_i.sender, "j")

    def test_intersection_addresses_only(self):
        """Test that plain intersection shares addresses, no events."""
        to_i, to_j = share(self.log_i, self.log_j, Strategy.INTERSECTION, day=2)
        self.assertEqual(to_i.sources, frozenset({BASE + 1}))
        self.assertEqual(to_j.sources, to_i.sources)
        self.assertEqual(to_i.events, ())

    def test_union_with_data(self):
        """Test that union sharing hands over everything before the day."""
        to_i, to_j = share(self.log_i, self.log_j, Strategy.UNION_WITH_DATA, day=2)
        self.assertEqual(to_i.events, (self.a3,))
        self.assertEqual(to_j.events, (self.a1, self.b2))

    def test_disjoint(self):
        """Test that disjoint sets share nothing under intersection."""
        to_i, to_j = share(self.log_i, _log("k", _event("k", 9)), Strategy.INTERSECTION_WITH_DATA, day=2)
        self.assertEqual((to_i.events, to_j.events), ((), ()))

    def test_current_day_not_shared(self):
        """Test that events of the current day stay private."""
        later = _log("j", self.a3, _event("j", 2, day=2))
        to_i, _ = share(self.log_i, later, Strategy.UNION_WITH_DATA, day=2)
        self.assertEqual(to_i.events, (self.a3,))

    def test_intersection_subset_of_union(self):
        """Test containment of intersection sharing in union sharing."""
        rng = random.Random(12)
        log_i = _log("i", *(_event("i", rng.randrange(15), rng.randint(1, 4), rng.randrange(DAY)) for _ in range(25)))
        log_j = _log("j", *(_event("j", rng.randrange(15), rng.randint(1, 4), rng.randrange(DAY)) for _ in range(25)))
        inter = share(log_i, log_j, Strategy.INTERSECTION_WITH_DATA, day=5)
        union = share(log_i, log_j, Strategy.UNION_WITH_DATA, day=5)
        common = log_i.sources(1, 4) & log_j.sources(1, 4)
        for small, large in zip(inter, union):
            self.assertTrue(set(small.events) <= set(large.events))
            self.assertTrue(all(e.source_ip in common for e in small.events))

    def test_private_equals_plaintext(self):
        """Test that PSI and PSI-DT sharing deliver the plaintext result."""
        for strategy in (Strategy.INTERSECTION, Strategy.INTERSECTION_WITH_DATA):
            self.assertEqual(
                share_private(self.log_i, self.log_j, strategy, day=2),
                share(self.log_i, self.log_j, strategy, day=2),
            )


class TestAugment(unittest.TestCase):
    """Test merging received data into a log."""

    def setUp(self):
        """Set up a log and two partners that saw the same attack."""
        self.own = _event("v", 1, seconds=5)
        self.log = _log("v", self.own)
        self.dup_a = _event("p", 2, seconds=50)
        self.dup_b = _event("q", 2, seconds=50)

    def test_empty_coalition(self):
        """Test that nothing received leaves the log unchanged."""
        self.assertEqual(augment(self.log, []), self.log)

    def test_dedupe(self):
        """Test that the same event from two partners appears once."""
        augmented = augment(self.log, [SharedData("p", (self.dup_a,)), SharedData("q", (self.dup_b,))])
        self.assertEqual(len(augmented.foreign), 1)
        self.assertEqual(augmented.events, (self.own,))

    def test_native_duplicate_dropped(self):
        """Test that an event the victim already has is not added."""
        echo = AttackEvent("p", self.own.source_ip, self.own.target_port, self.own.timestamp)
        self.assertEqual(augment(self.log, [SharedData("p", (echo,))]).foreign, ())

    def test_brute_force_union(self):
        """Test the augmented count against a multiset union."""
        rng = random.Random(3)
        r1 = tuple(_event("p", rng.randrange(5), 1, rng.randrange(3)) for _ in range(10))
        r2 = tuple(_event("q", rng.randrange(5), 1, rng.randrange(3)) for _ in range(10))
        augmented = augment(self.log, [SharedData("p", r1), SharedData("q", r2)])
        expected = {e.share_key for e in (self.own,) + r1 + r2}
        self.assertEqual(len(augmented.all_events), len(expected))

    def test_foreign_not_reshared(self):
        """Test that received events never travel on to another partner."""
        augmented = augment(self.log, [SharedData("p", (self.dup_a,))])
        to_k, _ = share(_log("k", _event("k", 2)), augmented, Strategy.UNION_WITH_DATA, day=2)
        self.assertEqual(to_k.events, (self.own,))


class TestCollaborate(unittest.TestCase):
    """Test a full round of exchanges."""

    def test_round(self):
        """Test that partners gain data and others keep their logs."""
        logs = _logs({"a": [1, 2], "b": [2, 3], "c": [7]})
        partnership = PartnershipRound(2, ("a", "b", "c"), (("a", "b"),))
        augmented = collaborate(logs, partnership, Strategy.UNION_WITH_DATA, day=2)

        self.assertEqual(augmented["c"], logs["c"])
        # b's event for BASE + 2 repeats a's own event and is dropped
        self.assertEqual({e.source_ip for e in augmented["a"].foreign}, {BASE + 3})
        self.assertEqual(len(augmented["a"].all_events), 3)
        self.assertEqual(
            collaborate(logs, partnership, Strategy.INTERSECTION_WITH_DATA, day=2, mode=Mode.PRIVATE),
            collaborate(logs, partnership, Strategy.INTERSECTION_WITH_DATA, day=2),
        )

    def test_windows_and_schedule(self):
        """Test window policies and the repartner schedule."""
        self.assertEqual(policy_window(WindowPolicy.HISTORY_BEFORE, 8, 5), (1, 7))
        self.assertEqual(policy_window(WindowPolicy.TRAIN_WINDOW, 8, 5), (3, 7))
        self.assertEqual(policy_window(WindowPolicy.TRAIN_WINDOW, 3, 5), (1, 2))
        self.assertTrue(repartner_due(6, 6))
        self.assertFalse(repartner_due(7, 6, every=7))
        self.assertTrue(repartner_due(13, 6, every=7))
        with self.assertRaises(InputError):
            repartner_due(6, 6, every=0)


if __name__ == '__main__':
    unittest.main()
