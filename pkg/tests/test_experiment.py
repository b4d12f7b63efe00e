"""
Unit tests for the experiment orchestrator.

Tests cover:
- Configuration loading and validation
- Byte-identical CSV output across reruns
- Zero collaboration matching the baseline
- True positive bounds, conservation and private-mode equivalence
- Direction of collaboration gains
- Summary spread columns and knowledge quartiles
- The alpha sweep and statistics export
"""

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from core.collaboration import Mode, Strategy
from core.config import DATA_DIR, load_model
from core.errors import ConfigurationError
from core.events import AttackEvent, Dataset, parse_address
from core.experiment import (
    BASELINE,
    GWOL,
    LWOL,
    QUARTILE_COLUMNS,
    STATISTICS,
    SUMMARY_COLUMNS,
    VICTIM_DAY_COLUMNS,
    ExperimentConfig,
    export_stats,
    knowledge_quartiles,
    run_experiment,
    sample_victims,
    sweep_alpha,
    write_report,
)
from core.similarity import Metric
from core.synth import SynthConfig, generate


def _config(**overrides) -> ExperimentConfig:
    values = {
        "synth": SynthConfig(n_victims=24, n_attackers=120, n_days=8, hitlist_size=4, rng_seed=3),
        "sample_size": 10,
        "iterations": 2,
        "metrics": [Metric.JACCARD, Metric.COSINE],
        "strategies": [Strategy.INTERSECTION_WITH_DATA],
        "pair_fraction": 0.1,
        "first_day": 6,
        "last_day": 7,
    }
    values.update(overrides)
    return ExperimentConfig(**values)


class TestExperimentConfig(unittest.TestCase):
    """Test experiment configuration."""

    def test_load_shipped_file(self):
        """Test loading the bundled experiment file with flat keys."""
        config = load_model(ExperimentConfig, str(DATA_DIR / "experiment.env"))
        self.assertEqual(config.sample_size, 40)
        self.assertEqual(config.prediction.alpha, 0.9)
        self.assertEqual(config.synth.n_victims, 200)
        self.assertEqual(config.synth.rng_seed, 7)
        self.assertEqual(len(config.metrics), 4)

    def test_overrides_win(self):
        """Test that overrides replace file values."""
        config = load_model(ExperimentConfig, str(DATA_DIR / "experiment.env"), {"iterations": 1, "alpha": 0.5})
        self.assertEqual(config.iterations, 1)
        self.assertEqual(config.prediction.alpha, 0.5)

    def test_duplicate_metrics_dropped(self):
        """Test that repeated metrics run once."""
        config = ExperimentConfig(metrics="jaccard,jaccard,cosine")
        self.assertEqual(config.metrics, [Metric.JACCARD, Metric.COSINE])

    def test_invalid_day_range(self):
        """Test that the first day needs a full training window."""
        with self.assertRaises(ConfigurationError):
            load_model(ExperimentConfig, overrides={"first_day": 3, "t_train": 5})
        with self.assertRaises(ConfigurationError):
            load_model(ExperimentConfig, overrides={"first_day": 8, "last_day": 7})

    def test_fingerprint_ignores_output(self):
        """Test that the run id does not depend on the output directory."""
        self.assertEqual(_config(output_dir="a").resolved_run_id, _config(output_dir="b").resolved_run_id)
        self.assertNotEqual(_config().fingerprint(), _config(rng_seed=1).fingerprint())


class TestRunExperiment(unittest.TestCase):
    """Test end-to-end runs on a small synthetic log."""

    def setUp(self):
        """Set up a generated dataset."""
        self.config = _config()
        self.dataset = generate(self.config.synth)

    def test_tables(self):
        """Test the produced tables and victim-day rows."""
        report = run_experiment(self.config, self.dataset)

        self.assertEqual(list(report.victim_days.columns), VICTIM_DAY_COLUMNS)
        for name in ("victim_days", "bounds", "partnerships", "stability", "daily", "roc", "summary", "knowledge_quartiles"):
            self.assertIn(name, report.tables)
        # baseline, lwol, gwol and one row per metric/strategy
        expected = 2 * 2 * 10 * (3 + 2)
        self.assertEqual(len(report.victim_days), expected)
        self.assertEqual(report.seeds, [0, 1])

    def test_confusion_counts_fill_universe(self):
        """Test that every row partitions its universe."""
        frame = run_experiment(self.config, self.dataset).victim_days
        totals = frame["tp"] + frame["fp"] + frame["tn"] + frame["fn"]
        self.assertTrue((totals == frame["universe_size"]).all())

    def test_rerun_is_byte_identical(self):
        """Test that two runs write identical CSVs."""
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            dir_a = write_report(run_experiment(self.config, self.dataset), first)
            dir_b = write_report(run_experiment(self.config, self.dataset), second)

            for csv in sorted(dir_a.glob("*.csv")):
                self.assertEqual(csv.read_bytes(), (dir_b / csv.name).read_bytes(), csv.name)
            manifest = json.loads((dir_a / "manifest.json").read_text())
            self.assertEqual(manifest["run_id"], self.config.resolved_run_id)
            self.assertIn("timing_seconds", manifest)

    def test_no_partners_matches_baseline(self):
        """Test that pair fraction 0 leaves every prediction unchanged."""
        frame = run_experiment(_config(pair_fraction=0.0), self.dataset).victim_days
        baseline = frame[frame["series"] == BASELINE].set_index(["iteration", "day", "victim"])
        collab = frame[frame["metric"] != ""]

        self.assertEqual(collab["collaborator"].sum(), 0)
        for _, row in collab.iterrows():
            reference = baseline.loc[(row["iteration"], row["day"], row["victim"])]
            self.assertEqual((row["tp"], row["fp"]), (reference["tp"], reference["fp"]))

    def test_sample_too_large(self):
        """Test that a sample larger than the population is rejected."""
        with self.assertRaises(ConfigurationError):
            run_experiment(_config(sample_size=500), self.dataset)

    def test_dataset_too_short(self):
        """Test that test days past the log end are rejected."""
        with self.assertRaises(ConfigurationError):
            run_experiment(_config(last_day=9), self.dataset)

    def test_sampling_is_seeded(self):
        """Test that victim samples depend only on the seed."""
        self.assertEqual(sample_victims(self.dataset, 5, 4), sample_victims(self.dataset, 5, 4))
        self.assertEqual(len(set(sample_victims(self.dataset, 5, 4))), 5)

    def test_true_positives_within_bounds(self):
        """Test TP <= LUB for local series and TP <= GUB for every series."""
        report = run_experiment(_config(pair_fraction=0.3), self.dataset)
        frame = report.victim_days.merge(report.tables["bounds"], on=["iteration", "day", "victim"], how="left")

        self.assertFalse(frame["lub"].isna().any())
        local = frame[frame["series"].isin([BASELINE, LWOL])]
        self.assertTrue((local["tp"] <= local["lub"]).all())
        self.assertTrue((frame["tp"] <= frame["gub"]).all())
        self.assertTrue((frame["lub"] <= frame["gub"]).all())

    def test_conservation(self):
        """Test that non-collaborators keep their baseline and totals split by population."""
        report = run_experiment(_config(pair_fraction=0.3), self.dataset)
        frame = report.victim_days
        collab = frame[frame["metric"] != ""]

        outsiders = collab[collab["collaborator"] == 0]
        self.assertTrue((outsiders["tp"] == outsiders["baseline_tp"]).all())
        self.assertTrue((outsiders["coalition_size"] == 0).all())

        for _, group in collab.groupby(["iteration", "day", "metric", "strategy"]):
            self.assertEqual(len(group), 10)
            members = group[group["collaborator"] == 1]
            self.assertEqual(
                group["tp"].sum(),
                members["tp"].sum() + group.loc[group["collaborator"] == 0, "baseline_tp"].sum(),
            )

        summary = report.summary.set_index(["metric", "strategy", "population"])
        for metric, strategy, _ in summary.index:
            everyone = summary.loc[(metric, strategy, "all")]
            members = summary.loc[(metric, strategy, "collaborators")]
            rows = collab[(collab["metric"] == metric) & (collab["strategy"] == strategy) & (collab["collaborator"] == 0)]
            self.assertEqual(everyone["sum_tp"], members["sum_tp"] + rows["tp"].sum())

    def test_private_mode_matches_plaintext(self):
        """Test that private benefit estimation and sharing reproduce the plaintext run."""
        overrides = {
            "sample_size": 6,
            "iterations": 1,
            "metrics": [Metric.INTERSECTION_SIZE, Metric.JACCARD],
            "pair_fraction": 0.2,
            "last_day": 6,
        }
        plain = run_experiment(_config(mode=Mode.PLAINTEXT, **overrides), self.dataset)
        private = run_experiment(_config(mode=Mode.PRIVATE, **overrides), self.dataset)

        pd.testing.assert_frame_equal(plain.victim_days, private.victim_days)
        pd.testing.assert_frame_equal(plain.tables["partnerships"], private.tables["partnerships"])

    def test_collaboration_never_loses_true_positives(self):
        """Test per-victim TP and pooled TPR against the baseline."""
        report = run_experiment(_config(pair_fraction=0.3), self.dataset)
        collab = report.victim_days[report.victim_days["metric"] != ""]
        self.assertTrue((collab["tp"] >= collab["baseline_tp"]).all())
        self.assertTrue((collab["improvement"].dropna() >= 0).all())

        roc = report.tables["roc"].set_index(["iteration", "day", "series"])
        for (iteration, day, series), row in roc.iterrows():
            if series in (BASELINE, LWOL, GWOL) or np.isnan(row["tpr"]):
                continue
            self.assertGreaterEqual(row["tpr"], roc.loc[(iteration, day, BASELINE), "tpr"])

    def test_summary_spread_and_quartiles(self):
        """Test the spread columns and the knowledge quartile table."""
        report = run_experiment(_config(pair_fraction=0.3), self.dataset)

        self.assertEqual(list(report.summary.columns), SUMMARY_COLUMNS)
        self.assertTrue((report.summary["sd_collaborators"] >= 0).all())
        self.assertTrue((report.summary["sd_coalition_size"] >= 0).all())

        quartiles = report.tables["knowledge_quartiles"]
        self.assertEqual(list(quartiles.columns), QUARTILE_COLUMNS)
        self.assertEqual(sorted(quartiles["metric"]), ["cosine", "jaccard"])
        for _, row in quartiles[quartiles["count"] > 0].iterrows():
            self.assertLessEqual(row["min"], row["q1"])
            self.assertLessEqual(row["q1"], row["median"])
            self.assertLessEqual(row["median"], row["q3"])
            self.assertLessEqual(row["q3"], row["max"])


class TestCollaborationGain(unittest.TestCase):
    """Test a hand-built case where a partner's history adds a true positive."""

    def setUp(self):
        """Set up two victims sharing one attacker seen at different times."""
        origin = 1356998400
        shared, own, other = parse_address("8.8.8.8"), parse_address("9.9.9.9"), parse_address("7.7.7.7")

        def at(victim, source, day):
            return AttackEvent(victim, source, 22, origin + (day - 1) * 86400 + 3600)

        # a saw the shared attacker early; b saw it the day before the test day
        events = [at("a", shared, day) for day in (1, 2, 3)]
        events += [at("a", own, 5), at("a", own, 6), at("a", shared, 6)]
        events += [at("b", shared, 5), at("b", other, 5), at("b", shared, 6)]
        self.dataset = Dataset.from_events(events, origin=origin)
        self.config = ExperimentConfig(
            sample_size=2,
            iterations=1,
            metrics=[Metric.INTERSECTION_SIZE],
            strategies=[Strategy.INTERSECTION_WITH_DATA],
            pair_fraction=1.0,
            first_day=6,
            last_day=6,
        )

    def test_mean_improvement_positive(self):
        """Test that the shared history lifts a's true positives."""
        report = run_experiment(self.config, self.dataset)
        frame = report.victim_days.set_index(["series", "victim"])
        series = "intersection_size/intersection_with_data"

        self.assertEqual(frame.loc[(BASELINE, "a"), "tp"], 1)
        self.assertEqual(frame.loc[(series, "a"), "tp"], 2)
        self.assertEqual(frame.loc[(series, "a"), "improvement"], 1.0)
        self.assertEqual(frame.loc[(series, "b"), "improvement"], 0.0)

        summary = report.summary.set_index("population")
        self.assertAlmostEqual(summary.loc["collaborators", "mean_improvement"], 0.5)
        roc = report.tables["roc"].set_index("series")
        self.assertGreater(roc.loc[series, "tpr"], roc.loc[BASELINE, "tpr"])


class TestKnowledgeQuartiles(unittest.TestCase):
    """Test quartiles of collaborator knowledge."""

    def test_quartiles(self):
        """Test five sizes and a metric without collaborators."""
        frame = knowledge_quartiles({"jaccard": [5, 1, 4, 2, 3], "cosine": []}).set_index("metric")

        self.assertEqual(frame.loc["jaccard", "count"], 5)
        self.assertEqual(frame.loc["jaccard", "min"], 1.0)
        self.assertEqual(frame.loc["jaccard", "q1"], 2.0)
        self.assertEqual(frame.loc["jaccard", "median"], 3.0)
        self.assertEqual(frame.loc["jaccard", "q3"], 4.0)
        self.assertEqual(frame.loc["jaccard", "max"], 5.0)
        self.assertEqual(frame.loc["cosine", "count"], 0)
        self.assertTrue(np.isnan(frame.loc["cosine", "median"]))


class TestSweepAndStats(unittest.TestCase):
    """Test the alpha sweep and statistics export."""

    def setUp(self):
        """Set up a generated dataset."""
        self.config = _config(iterations=1)
        self.dataset = generate(self.config.synth)

    def test_sweep_alpha(self):
        """Test one row per alpha, listing and day with duplicates dropped."""
        with self.assertLogs("core.experiment", level="WARNING"):
            frame = sweep_alpha(self.config, [0.1, 0.5, 0.9, 0.5], self.dataset)

        self.assertEqual(len(frame), 3 * 2 * 2)
        self.assertEqual(sorted(frame["alpha"].unique()), [0.1, 0.5, 0.9])
        self.assertEqual(set(frame["listing"]), {"threshold", "budget"})

    def test_sweep_invalid_alpha(self):
        """Test that alpha outside (0, 1] is rejected."""
        with self.assertRaises(ConfigurationError):
            sweep_alpha(self.config, [0.0], self.dataset)

    def test_export_all(self):
        """Test that every statistic is written."""
        with tempfile.TemporaryDirectory() as tmp:
            written = export_stats(self.dataset, ["all"], tmp)
            self.assertEqual([path.stem for path in written], list(STATISTICS))
            daily = pd.read_csv(Path(tmp) / "daily.csv")
            self.assertEqual(len(daily), self.dataset.n_days)

    def test_export_empty_dataset(self):
        """Test header-only tables for an empty dataset."""
        with tempfile.TemporaryDirectory() as tmp:
            export_stats(Dataset(), ["daily", "top_ports"], tmp)
            self.assertEqual((Path(tmp) / "daily.csv").read_text(), "day,total_attacks,unique_targets,unique_sources\n")
            self.assertEqual((Path(tmp) / "top_ports.csv").read_text(), "target_port,attacks\n")

    def test_export_unknown(self):
        """Test that unknown statistic names are rejected."""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                export_stats(self.dataset, ["nonsense"], tmp)


if __name__ == '__main__':
    unittest.main()
