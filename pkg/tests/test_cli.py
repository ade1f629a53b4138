import json
from pathlib import Path

import pytest

from dggan.cli import main
from dggan.table import write_csv
from dggan.toy import imbalanced_table

DATA = Path(__file__).parent / "data"
TINY = ["--noise-dim", "4", "--gen-hidden", "8", "--disc-hidden", "8", "--batch-size", "16",
        "--epochs", "3", "--seed", "5"]


@pytest.fixture
def toy(tmp_path):
    # a toy table routed through `prepare` so that a schema sidecar exists
    raw = tmp_path / "raw.csv"
    write_csv(imbalanced_table(80, seed=4), raw)
    assert main(["prepare", "--input", str(raw), "--output", str(tmp_path / "real.csv"),
                 "--schema-out", str(tmp_path / "schema.json")]) == 0
    return tmp_path


def train(d, *extra, tag="a"):
    return main(["train", "--data", str(d / "real.csv"), "--schema", str(d / "schema.json"),
                 "--out-model", str(d / f"{tag}.ck"), "--out-synth", str(d / f"{tag}.csv"),
                 "--log", str(d / f"{tag}.jsonl"), *TINY, *extra])


def test_prepare_generic_reports_counts(toy, capsys):
    assert main(["prepare", "--input", str(toy / "raw.csv"), "--output", str(toy / "p.csv")]) == 0
    assert "80 rows, 3 columns" in capsys.readouterr().out


def test_prepare_olympic_fixture(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main(["prepare", "--input", str(DATA / "olympic_raw_20.csv"), "--recipe", "olympic",
                 "--output", str(out), "--schema-out", str(tmp_path / "o.json")]) == 0
    assert "15 rows, 11 columns" in capsys.readouterr().out
    schema = json.loads((tmp_path / "o.json").read_text())
    assert [c["name"] for c in schema][:3] == ["age", "height", "weight"]


def test_prepare_census_headerless(tmp_path):
    lines = (DATA / "census_small.csv").read_text().splitlines()
    body = tmp_path / "adult.data"
    # headerless file in the full 15-column layout
    full = []
    for line in lines[1:]:
        age, work, fnl, edu, occ, sex, hours, inc = [c.strip() for c in line.split(",")]
        full.append(", ".join([age, work, fnl, edu, "13", "Never-married", occ, "Own-child", "White",
                               sex, "0", "0", hours, "United-States", inc]))
    body.write_text("\n".join(full) + "\n")
    out = tmp_path / "c.csv"
    assert main(["prepare", "--input", str(body), "--recipe", "census", "--no-header",
                 "--output", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[0] == "age" and len(header) == 15


def test_prepare_missing_input_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["prepare", "--input", str(missing), "--output", str(tmp_path / "o.csv")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_prepare_error_is_nonzero_and_cleans_up(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("ID,Name\n1,a\n")
    out = tmp_path / "o.csv"
    assert main(["prepare", "--input", str(bad), "--recipe", "olympic", "--output", str(out)]) == 1
    assert not out.exists()


def test_train_is_byte_deterministic(toy):
    assert train(toy, tag="a") == 0
    assert train(toy, tag="b") == 0
    assert (toy / "a.csv").read_bytes() == (toy / "b.csv").read_bytes()
    assert (toy / "a.ck").read_bytes() == (toy / "b.ck").read_bytes()
    assert len((toy / "a.jsonl").read_text().splitlines()) == 3


def test_train_schedule_flags(toy, capsys):
    assert train(toy, "--schedule", "geometric", "--first-item", "20", "--synthetic-count", "50") == 0
    effective = json.loads(capsys.readouterr().out.splitlines()[0])
    assert effective["schedule"]["mode"] == "geometric"
    assert sum(effective["schedule"]["quotas"]) == 50
    assert len((toy / "a.csv").read_text().splitlines()) == 51


def test_config_file_precedence(toy, capsys):
    cfg = toy / "run.json"
    cfg.write_text(json.dumps({"schedule": "uniform", "lr": 0.001, "epochs": 2}))
    assert train(toy, "--config", str(cfg)) == 0
    effective = json.loads(capsys.readouterr().out.splitlines()[0])
    assert effective["schedule"]["mode"] == "uniform"
    assert effective["gan"]["lr"] == 0.001
    assert effective["gan"]["epochs"] == 3  # the flag wins over the file


def test_unknown_config_key_exit_2(toy, capsys):
    cfg = toy / "run.json"
    cfg.write_text(json.dumps({"dropout": 0.1}))
    assert train(toy, "--config", str(cfg)) == 2
    assert "dropout" in capsys.readouterr().err


def test_schedule_error_exit_nonzero(toy):
    assert train(toy, "--schedule", "geometric", "--first-item", "90") == 1
    assert not (toy / "a.csv").exists() and not (toy / "a.ck").exists()


def test_generate(toy):
    assert train(toy) == 0
    a, b, z = toy / "g1.csv", toy / "g2.csv", toy / "g0.csv"
    for path in (a, b):
        assert main(["generate", "--model", str(toy / "a.ck"), "--count", "25", "--out", str(path),
                     "--seed", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["generate", "--model", str(toy / "a.ck"), "--count", "0", "--out", str(z)]) == 0
    assert z.read_text() == (toy / "real.csv").read_text().splitlines()[0] + "\n"


def test_generate_corrupt_checkpoint(toy):
    bad = toy / "bad.ck"
    bad.write_bytes(b"NOTACKPT" + b"\0" * 20)
    assert main(["generate", "--model", str(bad), "--count", "3", "--out", str(toy / "x.csv")]) == 1
    assert not (toy / "x.csv").exists()


def test_evaluate_identity_and_charts(toy):
    rep, charts = toy / "r.json", toy / "charts"
    assert main(["evaluate", "--real", str(toy / "real.csv"), "--synth", str(toy / "real.csv"),
                 "--schema", str(toy / "schema.json"), "--report", str(rep), "--charts", str(charts)]) == 0
    obj = json.loads(rep.read_text())
    assert obj["averages"]["overall"] == 1.0
    assert obj["config"] == {"bins": 10, "small_threshold": 15}
    names = sorted(p.name for p in charts.iterdir())
    assert "heatmap.svg" in names and "pair_scores.csv" in names
    assert "column_00_value.csv" in names and "column_02_level.svg" in names
    first = {p.name: p.read_bytes() for p in charts.iterdir()}
    assert main(["evaluate", "--real", str(toy / "real.csv"), "--synth", str(toy / "real.csv"),
                 "--schema", str(toy / "schema.json"), "--report", str(toy / "r2.json"),
                 "--charts", str(charts)]) == 0
    assert first == {p.name: p.read_bytes() for p in charts.iterdir()}
    assert rep.read_bytes() == (toy / "r2.json").read_bytes()


def test_evaluate_trained_output(toy):
    assert train(toy) == 0
    rep = toy / "r.json"
    assert main(["evaluate", "--real", str(toy / "real.csv"), "--synth", str(toy / "a.csv"),
                 "--schema", str(toy / "schema.json"), "--report", str(rep)]) == 0
    assert 0.0 <= json.loads(rep.read_text())["averages"]["overall"] <= 1.0


def test_evaluate_schema_mismatch(toy):
    other = toy / "other.csv"
    other.write_text("a,b\n1,2\n")
    rep = toy / "r.json"
    code = main(["evaluate", "--real", str(toy / "real.csv"), "--synth", str(other),
                 "--schema", str(toy / "schema.json"), "--report", str(rep)])
    assert code != 0 and not rep.exists()


def test_tune_one_by_two(toy):
    rep = toy / "t.json"
    assert main(["tune", "--data", str(toy / "real.csv"), "--schema", str(toy / "schema.json"),
                 "--epoch-grid", "2", "--first-item-grid", "10,20", "--report", str(rep), *TINY]) == 0
    obj = json.loads(rep.read_text())
    assert len(obj["scores"]) == 1 and len(obj["scores"][0]) == 2
    assert obj["best"]["epochs"] == 2


def test_tune_empty_grid_exit_2(toy):
    assert main(["tune", "--data", str(toy / "real.csv"), "--epoch-grid", "",
                 "--report", str(toy / "t.json")]) == 2


@pytest.mark.parametrize("cmd", ["prepare", "train", "generate", "evaluate", "tune"])
def test_help_lists_defaults(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert "default" in capsys.readouterr().out
