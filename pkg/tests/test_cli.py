import csv

import numpy as np
import pytest

from lstm_demand.cli import main
from lstm_demand.kvfile import read_kv
from lstm_demand.nn import ModelConfig, load_model
from lstm_demand.tune import GRID

TINY = {"max_epochs": 3, "lstm_units": 8, "dense_units": "[8]", "rf_trees": 3}


def write_cfg(path, **values):
    path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
    return path


def read_rows(path):
    with open(path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_cfg(root / "synth.txt", n_products=2, months=28, seed=4)
    assert main(["synth", "--config", str(cfg), "--out", str(root / "data")]) == 0
    return root


def run_cfg(root, name="run.txt", **extra):
    values = {"sales": "data/sales.csv", "holidays": "data/holidays.csv", "products": "data/products.csv", **TINY}
    values.update(extra)
    return write_cfg(root / name, **values)


def test_synth_writes_three_files_deterministically(tmp_path):
    cfg = write_cfg(tmp_path / "s.txt", n_products=1, months=28)
    assert main(["synth", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["holidays.csv", "products.csv", "sales.csv"]
    for n in names:
        a, b = (tmp_path / "a" / n).read_bytes(), (tmp_path / "b" / n).read_bytes()
        assert a == b
        assert a.startswith(b"# ") and b"seed=9" in a.splitlines()[0]


def test_synth_config_errors(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "missing.txt")]) == 2
    assert "not found" in capsys.readouterr().err
    bad = write_cfg(tmp_path / "bad.txt", months=12)
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["synth", "--set", "colour=1", "--out", str(tmp_path)]) == 2


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_train_univariate(data_dir):
    cfg = run_cfg(data_dir, variant="univariate")
    out = data_dir / "uni"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    model = load_model(out / "models" / "LSTM-univariate" / "P000__W00.npz")
    assert model.feature_columns == ("prev_demand",)
    hist_path = out / "history" / "LSTM-univariate" / "P000__W00.csv"
    assert hist_path.read_text().splitlines()[1] == "epoch,train_loss,val_loss"
    rows = read_rows(hist_path)
    assert 1 <= len(rows) <= 70
    assert [int(r["epoch"]) for r in rows] == list(range(1, len(rows) + 1))


def test_train_validation_errors(data_dir):
    assert main(["train", "--config", str(run_cfg(data_dir, "b1.txt", feature_set="nope")), "--out", str(data_dir / "x")]) == 2
    assert main(["train", "--config", str(run_cfg(data_dir, "b2.txt", variant="nope")), "--out", str(data_dir / "x")]) == 2
    assert main(["train", "--config", str(run_cfg(data_dir, "b3.txt", lstm_unit=4)), "--out", str(data_dir / "x")]) == 2
    assert main(["train", "--config", str(run_cfg(data_dir, "b4.txt", sales="data/none.csv")), "--out", str(data_dir / "x")]) == 1


def test_train_parallel_single_file(data_dir):
    out = data_dir / "par"
    assert main(["train", "--config", str(run_cfg(data_dir, "p.txt", variant="parallel")), "--out", str(out)]) == 0
    model = load_model(out / "models" / "LSTM-parallel" / "parallel__all.npz")
    assert model.params.n_outputs == 12


def test_tune_three_trials(data_dir):
    cfg = run_cfg(data_dir, "t.txt", n_trials=3, max_epochs=1, product_ids="P000", variant="univariate")
    outs = [data_dir / "tune_a", data_dir / "tune_b"]
    for out in outs:
        assert main(["tune", "--config", str(cfg), "--seed", "11", "--out", str(out)]) == 0
    assert (outs[0] / "tuning.csv").read_bytes() == (outs[1] / "tuning.csv").read_bytes()
    assert len(read_rows(outs[0] / "tuning.csv")) == 3
    best = read_kv(outs[0] / "best_config.txt")
    best.pop("trial_id"), best.pop("val_mmape")
    assert GRID.contains(ModelConfig.from_dict(best))


def test_evaluate_six_models_and_plots(data_dir):
    train_out = data_dir / "ev"
    cfg = run_cfg(data_dir, "e.txt", models="ev/models/LSTM-optimal")
    assert main(["train", "--config", str(cfg), "--out", str(train_out)]) == 0
    assert main(["evaluate", "--config", str(cfg), "--out", str(train_out)]) == 0
    summary = read_rows(train_out / "summary.csv")
    assert sorted(r["model"] for r in summary) == sorted(["LSTM-optimal", "ETS", "MPQ", "MDPQ", "LR", "RF"])
    assert {r["category"] for r in summary} == {"food"}
    rows = read_rows(train_out / "evaluation.csv")
    assert len(rows) == 6 * 2 * 6
    svg = (train_out / "plots" / "comparison_food.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    assert read_rows(train_out / "boxplot.csv")


def test_evaluate_oracle_is_zero(data_dir):
    cfg = run_cfg(data_dir, "o.txt", baselines="ORACLE", plots="false")
    assert main(["evaluate", "--config", str(cfg), "--out", str(data_dir / "oracle")]) == 0
    for r in read_rows(data_dir / "oracle" / "evaluation.csv"):
        assert float(r["mae"]) == 0.0 and float(r["mmape"]) == 0.0
    assert main(["evaluate", "--config", str(run_cfg(data_dir, "o2.txt", baselines="XYZ")), "--out", str(data_dir / "o")]) == 2


def test_evaluate_jobs_do_not_change_output(data_dir):
    cfg = run_cfg(data_dir, "j.txt", baselines="MPQ,RF", plots="false")
    assert main(["evaluate", "--config", str(cfg), "--out", str(data_dir / "j1")]) == 0
    assert main(["evaluate", "--config", str(cfg), "--jobs", "2", "--out", str(data_dir / "j2")]) == 0
    assert (data_dir / "j1" / "evaluation.csv").read_bytes() == (data_dir / "j2" / "evaluation.csv").read_bytes()


def test_forecast_rows(data_dir):
    out = data_dir / "fc"
    cfg = run_cfg(data_dir, "f.txt", model="fc/models/LSTM-optimal", origin_date="2018-10-01")
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["forecast", "--config", str(cfg), "--out", str(out)]) == 0
    text = (out / "forecast.csv").read_text().splitlines()
    assert text[1] == "product_id,warehouse_id,origin_date,lookahead,forecast"
    rows = read_rows(out / "forecast.csv")
    assert len(rows) == 6 * 2
    assert [int(r["lookahead"]) for r in rows[:6]] == [1, 2, 3, 4, 5, 6]
    assert all(float(r["forecast"]) >= 0 for r in rows)
    # a Sunday is never a forecast origin
    assert main(["forecast", "--config", str(cfg), "--set", "origin_date=2018-09-30", "--out", str(out)]) == 2
