import numpy as np
from fastapi.testclient import TestClient

from proxmkl.data import synth_ringnorm
from proxmkl.service.app import app

client = TestClient(app)


def toy_payload(n=40, seed=0, **overrides):
    ds = synth_ringnorm(n, 4, seed=seed)
    req = {
        "X": ds.X.tolist(),
        "y": ds.y.tolist(),
        "loss": "logistic",
        "C": 0.05,
        "solver": "spicy",
        "bank": {"mode": "random", "n_kernels": 8, "seed": 1},
    }
    req.update(overrides)
    return req


class TestHealth:
    def test_health(self):
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"


class TestTrainEndpoint:
    def test_train_round_trip(self):
        r = client.post("/train", json=toy_payload())
        assert r.status_code == 200
        runs = r.json()["runs"]
        assert len(runs) == 1
        summary = runs[0]["summary"]
        assert summary["converged"]
        assert summary["final_gap"] <= 0.01
        assert summary["active_kernels"] >= 0
        assert runs[0]["trace"]
        assert runs[0]["model_payload"]["format_version"] == 1

    def test_c_grid_returns_multiple_runs(self):
        r = client.post("/train", json=toy_payload(C=[0.05, 0.5]))
        assert r.status_code == 200
        runs = r.json()["runs"]
        assert [run["summary"]["C"] for run in runs] == [0.05, 0.5]

    def test_split_reports_accuracy(self):
        r = client.post("/train", json=toy_payload(n=100, split_fraction=0.8))
        assert r.status_code == 200
        summary = r.json()["runs"][0]["summary"]
        assert summary["accuracy"] is not None
        assert 0.0 <= summary["accuracy"] <= 1.0

    def test_invalid_loss_rejected(self):
        r = client.post("/train", json=toy_payload(loss="absolute"))
        assert r.status_code == 422

    def test_missing_data_rejected(self):
        r = client.post("/train", json={"loss": "logistic", "C": 0.1})
        assert r.status_code == 422

    def test_mismatched_dimensions_rejected(self):
        bad = toy_payload()
        bad["y"] = bad["y"][:-3]
        r = client.post("/train", json=bad)
        assert r.status_code == 400

    def test_ist_solver(self):
        r = client.post("/train", json=toy_payload(solver="ist", C=0.3))
        assert r.status_code == 200
        summary = r.json()["runs"][0]["summary"]
        assert summary["solver"] == "ist"
        assert summary["final_gap"] <= 0.01


class TestPredictEndpoint:
    def test_predict_with_model_id_and_payload(self):
        train_req = toy_payload(n=60)
        r = client.post("/train", json=train_req)
        run = r.json()["runs"][0]
        X = train_req["X"]
        y = train_req["y"]

        by_id = client.post("/predict", json={"model_id": run["model_id"],
                                              "X": X, "y": y})
        assert by_id.status_code == 200
        acc_id = by_id.json()["accuracy"]

        by_payload = client.post("/predict",
                                 json={"model_payload": run["model_payload"],
                                       "X": X, "y": y})
        assert by_payload.status_code == 200
        assert by_payload.json()["accuracy"] == acc_id
        assert np.allclose(by_payload.json()["scores"], by_id.json()["scores"])
        assert by_id.json()["labels"] is not None

    def test_unknown_model_id(self):
        r = client.post("/predict", json={"model_id": "nope", "X": [[0.0], [1.0]]})
        assert r.status_code == 400

    def test_models_listing(self):
        r = client.post("/train", json=toy_payload(n=30))
        mid = r.json()["runs"][0]["model_id"]
        listed = client.get("/models").json()["models"]
        assert mid in listed


class TestBenchEndpoint:
    def test_small_sweep_row_counts(self):
        req = {
            "axis": "kernels",
            "values": [3, 5],
            "reps": 2,
            "solvers": ["spicy"],
            "loss": "logistic",
            "C": 0.3,
            "n_samples": 30,
            "n_features": 4,
            "seed": 0,
            "tol": 0.05,
        }
        r = client.post("/bench", json=req)
        assert r.status_code == 200
        body = r.json()
        assert len(body["rows"]) == 4                 # 2 values x 2 reps
        assert len(body["aggregates"]) == 2           # one per (value, solver)
        assert all(row["status"] == "ok" for row in body["rows"])

    def test_deterministic_active_counts(self):
        req = {
            "axis": "kernels", "values": [4], "reps": 1, "solvers": ["spicy"],
            "loss": "logistic", "C": 0.3, "n_samples": 30, "n_features": 4,
            "seed": 3, "tol": 0.05,
        }
        a = client.post("/bench", json=req).json()["rows"][0]["active_kernels"]
        b = client.post("/bench", json=req).json()["rows"][0]["active_kernels"]
        assert a == b
