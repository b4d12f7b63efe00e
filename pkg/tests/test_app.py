"""
Unit tests for the HTTP API.
"""

import unittest

from fastapi.testclient import TestClient

from app import app

ORIGIN = 1356998400
DAY = 86400


class TestApi(unittest.TestCase):
    """Test the FastAPI endpoints."""

    def setUp(self):
        """Set up a test client."""
        self.client = TestClient(app)

    def test_root_and_health(self):
        """Test the informational endpoints."""
        self.assertEqual(self.client.get("/").status_code, 200)
        health = self.client.get("/health").json()
        self.assertEqual(health["status"], "healthy")
        self.assertEqual(health["components"]["protocols"], ["pjs", "psi", "psi_ca", "psi_dt"])

    def test_similarity(self):
        """Test a Jaccard score over dotted quads."""
        response = self.client.post("/similarity", json={
            "metric": "jaccard",
            "a": ["61.160.213.1", "61.160.213.2", "61.160.213.3"],
            "b": ["61.160.213.2", "61.160.213.3", "61.160.213.4"],
        })
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.json()["value"], 0.5)
        self.assertTrue(response.json()["defined"])

    def test_similarity_undefined(self):
        """Test that Jaccard of two empty sets is reported as undefined."""
        body = self.client.post("/similarity", json={"metric": "jaccard", "a": [], "b": []}).json()
        self.assertIsNone(body["value"])
        self.assertFalse(body["defined"])

    def test_psi_ca(self):
        """Test the intersection size on both sides after the result report."""
        response = self.client.post("/protocols/psi_ca", json={
            "server": ["61.160.213.1", "61.160.213.2", "61.160.213.3"],
            "client": ["61.160.213.2", "61.160.213.3", "61.160.213.4"],
        })
        self.assertEqual(response.status_code, 200)
        body = response.json()
        self.assertEqual(body["client_output"], 2)
        self.assertEqual(body["server_output"], 2)

    def test_psi(self):
        """Test that PSI returns the intersecting addresses."""
        body = self.client.post("/protocols/psi", json={
            "server": ["61.160.213.1", "218.92.0.144"],
            "client": ["218.92.0.144", "222.186.34.90"],
        }).json()
        self.assertEqual(body["client_output"], ["218.92.0.144"])

    def test_protocol_errors(self):
        """Test unknown protocols and malformed addresses."""
        self.assertEqual(self.client.post("/protocols/nope", json={}).status_code, 404)
        response = self.client.post("/protocols/psi_ca", json={"server": ["999.1.1.1"], "client": []})
        self.assertEqual(response.status_code, 400)

    def test_predict(self):
        """Test the EWMA watchlist for two attacks five days apart."""
        events = [
            {"contributor_id": "v", "source_ip": "61.160.213.18", "target_port": 22, "timestamp": ORIGIN + 600},
            {"contributor_id": "v", "source_ip": "61.160.213.18", "target_port": 22, "timestamp": ORIGIN + 4 * DAY + 600},
        ]
        response = self.client.post("/predict", json={"victim": "v", "test_day": 6, "events": events, "origin": ORIGIN})
        self.assertEqual(response.status_code, 200)
        entries = response.json()["entries"]
        self.assertEqual([e["source_ip"] for e in entries], ["61.160.213.18"])
        self.assertAlmostEqual(entries[0]["score"], 0.90009)

    def test_predict_no_events(self):
        """Test that no events give an empty watchlist."""
        body = self.client.post("/predict", json={"victim": "v", "test_day": 6, "events": []}).json()
        self.assertEqual(body["entries"], [])

    def test_experiment_rejects_large_sample(self):
        """Test that an unsatisfiable sample size is a client error."""
        response = self.client.post("/experiment", json={
            "sample_size": 500,
            "iterations": 1,
            "last_day": 7,
            "synth": {"n_victims": 20, "n_attackers": 60, "n_days": 8, "hitlist_size": 4},
        })
        self.assertEqual(response.status_code, 400)


if __name__ == '__main__':
    unittest.main()
