import csv
import json

import pytest

from stripwalk import cli
from stripwalk.config import Manifest, coerce, parse_manifest, to_text
from stripwalk.errors import ConfigError
from stripwalk.experiments import get_experiment, list_experiments
from stripwalk.report import run_manifest

EXPECTED_IDS = {
    "range-fixed-start", "range-uniform-start", "range-asymmetric-geometric", "entropy-expected-range",
    "point-visited", "rayknight-equivalence", "diffusion-limit", "parity-single", "parity-joint",
    "asym-stationary",
}


def test_parse_manifest():
    m = parse_manifest("# comment\nexperiment = point-visited\n\nN = 100  # inline\nbetas = 0.25, 0.5\n")
    assert m.values == {"experiment": "point-visited", "N": "100", "betas": "0.25, 0.5"}
    assert m.echo().startswith("# comment")
    with pytest.raises(ConfigError):
        parse_manifest("no equals sign")
    with pytest.raises(ConfigError):
        parse_manifest("a = 1\na = 2")


def test_coerce():
    assert coerce("replicas", "1e5", 10) == 100_000
    assert coerce("alpha", "0.3", 0.5) == 0.3
    assert coerce("betas", "0.1, 0.2", (0.5,)) == (0.1, 0.2)
    assert coerce("flag", "yes", False) is True
    with pytest.raises(ConfigError):
        coerce("N", "abc", 1)
    assert to_text((0.1, 0.2)) == "0.1,0.2"


def test_with_values_appends_overrides():
    m = parse_manifest("experiment = point-visited\n").with_values(seed=5, replicas=None)
    assert m.get("seed") == "5" and "replicas" not in m
    assert m.echo() == "experiment = point-visited\nseed = 5\n"


def test_catalog():
    exps = list_experiments()
    ids = [e.id for e in exps]
    assert len(ids) >= 10 and len(set(ids)) == len(ids)
    assert EXPECTED_IDS <= set(ids)
    for exp in exps:
        text = exp.manifest().dump()
        again = parse_manifest(text)
        assert again.get("experiment") == exp.id
        assert exp.params(again) == exp.params(exp.manifest())


def test_params_validation():
    exp = get_experiment("point-visited")
    with pytest.raises(ConfigError):
        exp.params(Manifest({"experiment": "point-visited", "replicas": "0"}))
    with pytest.raises(ConfigError):
        exp.params(Manifest({"experiment": "point-visited", "bogus": "1"}))
    with pytest.raises(ConfigError):
        get_experiment("no-such-experiment")


def _write(tmp_path, text, name="m.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_compare_passes_and_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, "experiment = range-uniform-start\nkinds = symmetric\n")
    out = tmp_path / "out"
    assert cli.main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    assert "[PASS]" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["experiment"] == "range-uniform-start"
    assert summary["manifest"] == cfg.read_text()
    assert (out / "manifest.txt").read_text() == cfg.read_text()
    lines = (out / "samples.csv").read_text().splitlines()
    assert lines[:2] == ["# experiment = range-uniform-start", "# kinds = symmetric"]
    assert lines[2] == "replica_index,start,range"
    assert len(lines) == 3 + 100_000


def test_failing_criterion_exits_one(tmp_path):
    cfg = _write(tmp_path, "experiment = range-uniform-start\nkinds = symmetric\nreplicas = 500\n"
                           "tolerance = 1e-6\n")
    assert cli.main(["compare", "--config", str(cfg)]) == 1


@pytest.mark.parametrize("text", ["experiment = range-uniform-start\nreplicas = 0\n",
                                  "experiment = range-uniform-start\nfoo = 1\n",
                                  "experiment = nope\n",
                                  "not a manifest line\n"])
def test_config_errors_exit_two(tmp_path, text):
    assert cli.main(["compare", "--config", str(_write(tmp_path, text))]) == 2


def test_missing_config_exits_two(tmp_path):
    assert cli.main(["compare", "--config", str(tmp_path / "absent.txt")]) == 2


def test_summary_byte_identical_across_runs_and_workers(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "experiment = point-visited\nreplicas = 20000\nbetas = 0.5\n")
    outs = []
    for i, workers in enumerate(("1", "3", "1")):
        monkeypatch.setenv("STRIPWALK_WORKERS", workers)
        out = tmp_path / f"run{i}"
        cli.main(["compare", "--config", str(cfg), "--out", str(out)])
        outs.append(out)
    first = (outs[0] / "summary.json").read_bytes()
    for out in outs[1:]:
        assert (out / "summary.json").read_bytes() == first
        for name in ("samples.symmetric.csv", "samples.weak.csv", "samples.asymmetric.csv"):
            assert (out / name).read_bytes() == (outs[0] / name).read_bytes()


def test_seed_and_replicas_flags_override(tmp_path):
    cfg = _write(tmp_path, "experiment = range-uniform-start\nkinds = symmetric\n")
    out = tmp_path / "o"
    cli.main(["compare", "--config", str(cfg), "--seed", "9", "--replicas", "1000", "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["params"]["seed"] == 9 and summary["params"]["replicas"] == 1000
    assert summary["manifest"].endswith("seed = 9\nreplicas = 1000\n")


def test_simulate_csv_schema(tmp_path):
    out = tmp_path / "sim"
    rc = cli.main(["simulate", "--N", "50", "--start", "alpha:0.5", "--sites", "10,25", "--replicas", "5",
                   "--out", str(out)])
    assert rc == 0
    with (out / "samples.csv").open() as fh:
        rows = [r for r in csv.reader(fh) if not r[0].startswith("#")]
    assert rows[0] == ["replica_index", "exit_side", "exit_time", "range", "G_10", "G_25", "parity_10", "parity_25"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4"]
    assert rows[1][1] in ("left", "right")


def test_simulate_json_format(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--N", "20", "--replicas", "3", "--format", "json", "--out", str(out)]) == 0
    data = json.loads((out / "samples.json").read_text())
    assert data["rows"] == 3 and data["columns"][0] == "replica_index"


def test_simulate_stdout(capsys):
    assert cli.main(["simulate", "--N", "20", "--replicas", "10", "--seed", "3"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["params"]["N"] == 20


def test_bad_workers_env(monkeypatch):
    monkeypatch.setenv("STRIPWALK_WORKERS", "many")
    assert cli.main(["simulate", "--N", "20", "--replicas", "10"]) == 2


@pytest.mark.parametrize("argv,value", [
    (["ruin", "--a", "0", "--z", "1", "--b", "2"], 0.5),
    (["range-tail", "--N", "4", "--x", "2", "--m", "4"], 1 / 3),
    (["entropy", "--alpha", "0.5"], 0.6931471805599453),
    (["escape", "--N", "10", "--y", "5"], 0.2),
])
def test_exact_subcommand(argv, value, capsys):
    assert cli.main(["exact", *argv]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(value, rel=1e-9)


def test_exact_missing_argument():
    assert cli.main(["exact", "ruin", "--a", "0"]) == 2


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert all(i in out for i in EXPECTED_IDS)


def test_run_manifest_without_output():
    result, summary = run_manifest(Manifest({"experiment": "parity-single", "replicas": "2000"}))
    assert [v["name"] for v in summary["verdicts"]] == [v.name for v in result.verdicts]
