"""
Unit tests for the command-line interface and protocol benchmarks.

Tests cover:
- Ingest output files
- Exit codes for configuration and data errors
- Benchmark rows and input validation
"""

import json
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from cli import main
from core.benchmark import BENCH_COLUMNS, bench_protocols, run_once
from core.config import DATA_DIR
from core.errors import InputError, UndefinedMetricError
from core.events import SourceSet


class TestCli(unittest.TestCase):
    """Test subcommands and exit codes."""

    def setUp(self):
        """Set up a scratch output directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def test_ingest_sample(self):
        """Test ingesting the bundled DShield sample."""
        code = main(["ingest", str(DATA_DIR / "sample_dshield.csv"), "--output-dir", str(self.out)])
        self.assertEqual(code, 0)

        parse_report = json.loads((self.out / "parse_report.json").read_text())
        self.assertEqual(parse_report["rejected"], 2)
        dataset = pd.read_csv(self.out / "dataset.csv")
        self.assertEqual(len(dataset), 18)

    def test_synth_then_stats(self):
        """Test generating a log and exporting one statistic from it."""
        log = self.out / "synth.csv"
        self.assertEqual(main(["synth", "--output", str(log), "--n-victims", "20", "--n-attackers", "80", "--n-days", "3"]), 0)
        self.assertEqual(main(["stats", str(log), "--which", "daily", "--output-dir", str(self.out / "stats")]), 0)
        self.assertEqual(len(pd.read_csv(self.out / "stats" / "daily.csv")), 3)

    def test_configuration_error_exit_code(self):
        """Test exit code 1 for an invalid configuration."""
        code = main(["experiment", "--first-day", "2", "--t-train", "5", "--output-dir", str(self.out)])
        self.assertEqual(code, 1)

    def test_missing_config_file(self):
        """Test exit code 1 for a config file that does not exist."""
        self.assertEqual(main(["synth", "--config", str(self.out / "absent.env"), "--output", str(self.out / "x.csv")]), 1)

    def test_missing_dataset_exit_code(self):
        """Test exit code 2 for an unreadable dataset."""
        self.assertEqual(main(["ingest", str(self.out / "absent.csv"), "--output-dir", str(self.out)]), 2)

    def test_bad_alpha_list(self):
        """Test exit code 1 for a malformed alpha list."""
        self.assertEqual(main(["sweep-alpha", "--alphas", "0.1,abc", "--output-dir", str(self.out)]), 1)

    def test_bench_output(self):
        """Test that the benchmark writes one row per protocol."""
        target = self.out / "bench.csv"
        code = main(["bench", "--sizes", "4", "--repetitions", "1", "--protocols", "psi_ca,psi", "--output", str(target)])
        self.assertEqual(code, 0)
        self.assertEqual(pd.read_csv(target)["protocol"].tolist(), ["psi_ca", "psi"])


class TestBenchProtocols(unittest.TestCase):
    """Test protocol timing."""

    def test_rows(self):
        """Test columns, pair projection and client element counts."""
        frame = bench_protocols([6], repetitions=1, protocols=["psi_ca"], sample_size=10)
        self.assertEqual(list(frame.columns), BENCH_COLUMNS)
        row = frame.iloc[0]
        self.assertEqual(row["pairs"], 45)
        self.assertEqual(row["client_elements"], 6)
        self.assertAlmostEqual(row["all_pairs_seconds"], row["mean_ms"] / 1000 * 45)

    def test_every_protocol(self):
        """Test one row per protocol at the smallest size."""
        frame = bench_protocols([1], repetitions=1)
        self.assertEqual(frame["protocol"].tolist(), ["psi", "psi_ca", "psi_dt", "pjs"])
        self.assertTrue((frame["client_elements"] == 1).all())

    def test_undefined_run_raises(self):
        """Test that PJS on two empty sets is not timed as a run."""
        empty = SourceSet("s", frozenset(), (0, 0))
        with self.assertRaises(UndefinedMetricError):
            run_once("pjs", empty, empty)

    def test_invalid_input(self):
        """Test rejected protocol names, sizes and repetitions."""
        with self.assertRaises(InputError):
            bench_protocols([4], protocols=["rsa"])
        with self.assertRaises(InputError):
            bench_protocols([0])
        with self.assertRaises(InputError):
            bench_protocols([4], repetitions=0)


if __name__ == '__main__':
    unittest.main()
