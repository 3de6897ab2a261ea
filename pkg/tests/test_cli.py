"""
Tests for the recsteal command line
"""
import csv
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from recsteal.main import cli_main  # noqa: E402
from recsteal.models.result_models import CSV_COLUMNS  # noqa: E402

TRAIN = {"learning_rate": 0.02, "batch_size": 128, "embedding_dim": 4, "epochs": 2}
CONFIG = {
    "experiment_id": "cli",
    "dataset": {"synthetic": {"num_users": 50, "num_items": 60, "num_clusters": 3, "latent_dim": 4,
                              "min_user_interactions": 8, "max_user_interactions": 12, "seed": 5}},
    "available_fraction": 0.3,
    "k": 5,
    "attacks": [{"method": "ptd"}, {"method": "ptq"}],
    "target_train": TRAIN,
    "aux_train": TRAIN,
    "clone_train": TRAIN,
    "finetune": {**TRAIN, "epochs": 1},
    "seeds": [0, 1],
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CONFIG), encoding="utf-8")
    return str(path)


def _json_output(capsys):
    out = capsys.readouterr().out
    return json.loads(out[out.index("{"):])


def test_run_and_report(tmp_path, config_path, capsys):
    out = tmp_path / "results.csv"
    assert cli_main(["run", "--config", config_path, "--out", str(out)]) == 0
    with open(out, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 2
    capsys.readouterr()

    assert cli_main(["report", str(out)]) == 0
    table = capsys.readouterr().out
    assert "ptd" in table and "ptq" in table


def test_run_single_seed_with_json(tmp_path, config_path):
    out, mirror = tmp_path / "r.csv", tmp_path / "r.json"
    code = cli_main(["run", "--config", config_path, "--seed", "7", "--out", str(out), "--json", str(mirror),
                     "--timings"])
    assert code == 0
    data = json.loads(mirror.read_text(encoding="utf-8"))
    assert {row["seed"] for row in data} == {7}
    assert out.read_text(encoding="utf-8").splitlines()[0].endswith(",seconds")


def test_missing_config_exits_2(tmp_path, capsys):
    missing = str(tmp_path / "absent.json")
    assert cli_main(["run", "--config", missing, "--out", str(tmp_path / "r.csv")]) == 2
    assert "absent.json" in capsys.readouterr().err


def test_usage_errors_exit_1(config_path):
    assert cli_main(["frobnicate"]) == 1
    assert cli_main(["run", "--config", config_path, "--bogus"]) == 1
    assert cli_main(["run", "--config", config_path]) == 1


def test_report_on_non_result_file(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    assert cli_main(["report", str(path)]) == 2


def test_version(capsys):
    assert cli_main(["--version"]) == 0
    assert "recsteal" in capsys.readouterr().out


def test_ingest(tmp_path, capsys):
    path = tmp_path / "log.csv"
    path.write_text("user_id,item_id\na,x\na,y\nb,x\nb,x\n", encoding="utf-8")
    assert cli_main(["ingest", str(path), "--min-interactions", "1"]) == 0
    payload = _json_output(capsys)
    assert payload["raw"]["num_interactions"] == 3
    assert payload["filtered"]["num_users"] == 2


def test_ingest_malformed_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("a,x\nb\n", encoding="utf-8")
    assert cli_main(["ingest", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_train_then_attack(tmp_path, config_path, capsys):
    target = tmp_path / "target.npz"
    aux = tmp_path / "aux.npz"
    assert cli_main(["train", "--config", config_path, "--out", str(target)]) == 0
    assert cli_main(["train", "--config", config_path, "--role", "auxiliary", "--out", str(aux)]) == 0
    capsys.readouterr()

    clone = tmp_path / "clone.npz"
    log = tmp_path / "queries.csv"
    code = cli_main([
        "attack", "--config", config_path, "--target", str(target), "--aux", str(aux),
        "--method", "ptaq", "--out", str(clone), "--query-log", str(log),
    ])
    assert code == 0
    summary = _json_output(capsys)
    assert summary["method"] == "ptaq"
    assert 0.0 <= summary["agreement"] <= 1.0
    assert summary["queries_spent"] == summary["queried_users"]
    assert summary["users"] >= 1 and summary["queried_users"] >= 1
    assert clone.exists()
    assert len(log.read_text(encoding="utf-8").splitlines()) == 1 + summary["queries_spent"]


def test_attack_rejects_mismatched_target(tmp_path, config_path):
    other = dict(CONFIG, dataset={"synthetic": {**CONFIG["dataset"]["synthetic"], "num_users": 40}})
    other_path = tmp_path / "other.json"
    other_path.write_text(json.dumps(other), encoding="utf-8")
    target = tmp_path / "target.npz"
    assert cli_main(["train", "--config", str(other_path), "--out", str(target)]) == 0
    assert cli_main(["attack", "--config", config_path, "--target", str(target), "--method", "ptd"]) == 2


def test_attack_rejects_aux_of_another_kind(tmp_path, config_path, capsys):
    target = tmp_path / "target.npz"
    aux = tmp_path / "aux.npz"
    assert cli_main(["train", "--config", config_path, "--out", str(target)]) == 0
    assert cli_main(["train", "--config", config_path, "--role", "auxiliary", "--out", str(aux)]) == 0
    capsys.readouterr()
    code = cli_main([
        "attack", "--config", config_path, "--target", str(target), "--aux", str(aux),
        "--method", "pta", "--clone-kind", "gmf",
    ])
    assert code == 2
    assert "gmf" in capsys.readouterr().err
