import json
from pathlib import Path

import jsonschema
import pytest

from conelab import cli
from conelab.cli import ConfigError, RunConfig, main


@pytest.fixture(autouse=True)
def _no_env_out(monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_info_jacobi(capsys):
    assert main(["info", "--cone", "3,3", "--op", "jacobi"]) == 0
    out = capsys.readouterr().out
    assert "kappa=6" in out and "1/24" in out
    assert len(out.split("modes:")[1].strip().splitlines()) == 11


def test_info_laplace_json(capsys):
    assert main(["info", "--cone", "2,4", "--op", "laplace", "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["lambda_star"] == pytest.approx(25 / 24, rel=1e-15)
    assert len(info["modes"]) == 10 and info["modes"][0]["mult"] == 1


def test_info_missing_cone(capsys):
    assert main(["info", "--op", "jacobi"]) == 2
    assert "--cone" in capsys.readouterr().err


def test_usage_errors():
    assert main(["run", "nonsense", "--cone", "3,3"]) == 2
    assert main(["info", "--cone", "3"]) == 2
    assert main(["info", "--cone", "1,4"]) == 2


def test_tolerance_zero_is_config_error(capsys, tmp_path):
    assert main(["all", "--tol-scale", "0", "--out", str(tmp_path)]) == 2
    assert "tol_scale" in capsys.readouterr().err


def test_tiny_tolerance_names_failing_invariant(capsys, tmp_path):
    rc = main(["run", "criticality", "--cone", "3,3", "--op", "jacobi", "--T", "2,4", "--N", "256",
               "--tol-scale", "1e-12", "--out", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "failed invariant(s): gap matches" in err
    summary = json.loads((tmp_path / "criticality" / "summary.json").read_text())
    assert not summary["passed"]


def test_config_roundtrip():
    cfg = RunConfig(p=2, q=4, op="laplace", lam=1 / 48, seed=9, T=[1.0, 3.0], spacing=7.5)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    assert RunConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()


def test_config_parse_error_has_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        RunConfig.from_json('{"p": 3,\n "q": }')


def test_config_unknown_and_invalid_fields():
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="'T'"):
        RunConfig.from_dict({"T": [4.0, 2.0]})
    with pytest.raises(ConfigError, match="'op'"):
        RunConfig.from_dict({"op": "wave"})


def test_config_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"p": 2, "q": 4, "seed": 5, "out": "from_file", "op": "laplace"}))
    args = cli.build_parser().parse_args(["run", "bhp", "--config", str(cfg_file), "--seed", "6"])
    cfg = cli.config_from_args(args)
    assert (cfg.p, cfg.q, cfg.seed, cfg.out, cfg.op) == (2, 4, 6, "from_file", "laplace")
    monkeypatch.setenv(cli.OUT_ENV, "from_env")
    assert cli.config_from_args(args).out == "from_env"
    args = cli.build_parser().parse_args(["run", "bhp", "--config", str(cfg_file), "--out", "from_flag"])
    assert cli.config_from_args(args).out == "from_flag"


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"p": 3,\n  "q" 3}')
    assert main(["info", "--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["info", "--config", str(tmp_path / "missing.json")]) == 2


def test_run_criticality(tmp_path, capsys):
    rc = main(["run", "criticality", "--cone", "3,3", "--op", "jacobi", "--T", "2,4,8,16", "--out", str(tmp_path), "--json"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    jsonschema.validate(summary, cli.load_schema("summary"))
    assert summary["passed"] and summary["config"]["T"] == [2.0, 4.0, 8.0, 16.0]
    report = json.loads((tmp_path / "criticality" / "report.json").read_text())
    jsonschema.validate(report, cli.load_schema("report"))
    text = json.dumps(report["report"])
    assert "0.0416666" in text


def test_run_martin_csv(tmp_path):
    assert main(["run", "martin", "--cone", "3,3", "--op", "laplace", "--dirs", "3", "--n", "12", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "martin" / "martin_tip.csv").read_text().splitlines()
    assert lines[0].startswith("# experiment=martin") and "theorem=" in lines[0]
    assert lines[1] == "n,r_n,direction_diff,consecutive_diff"
    assert len(lines) == 2 + 12
    last = lines[-1].split(",")
    assert float(last[1]) == 2.0 ** -12 and float(last[2]) < 1e-4


def test_every_output_names_its_theorem(tmp_path):
    assert main(["run", "fatou", "--cone", "3,3", "--op", "laplace", "--out", str(tmp_path)]) == 0
    for path in (tmp_path / "fatou").iterdir():
        text = path.read_text()
        if path.suffix == ".csv":
            assert "theorem=" in text.splitlines()[0]
        else:
            assert json.loads(text)["theorem"]


def test_run_bhp_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "bhp", "--seed", "7", "--trials", "20", "--out", str(a)]) == 0
    assert main(["run", "bhp", "--seed", "7", "--trials", "20", "--out", str(b)]) == 0
    ta, tb = _tree(a), _tree(b)
    assert ta and ta.keys() == tb.keys()
    for k in ta:
        if k.endswith("summary.json"):
            # the config block records the output directory
            sa, sb = json.loads(ta[k]), json.loads(tb[k])
            sa["config"].pop("out"), sb["config"].pop("out")
            assert sa == sb
        else:
            assert ta[k] == tb[k], k


def test_env_out_directory(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert main(["run", "dirichlet-hypotheses", "--cone", "3,3"]) == 0
    assert (tmp_path / "env" / "dirichlet-hypotheses" / "summary.json").exists()


@pytest.mark.parametrize("experiment", ["spectrum", "green", "hardy", "uniformity", "chains", "sobolev",
                                        "hyperbolicity", "dirichlet-hypotheses"])
def test_experiments_pass_with_defaults(experiment, tmp_path):
    extra = ["--quadruples", "20000"] if experiment == "hyperbolicity" else []
    assert main(["run", experiment, "--cone", "3,3", "--out", str(tmp_path), *extra]) == 0
    summary = json.loads((tmp_path / experiment / "summary.json").read_text())
    jsonschema.validate(summary, cli.load_schema("summary"))


def test_all_json_schema(tmp_path, capsys):
    assert main(["all", "--out", str(tmp_path), "--json"]) == 0
    table = json.loads(capsys.readouterr().out)
    jsonschema.validate(table, cli.load_schema("acceptance"))
    assert [r["criterion"] for r in table["criteria"]] == list(range(1, 10))
    assert table["passed"]


def test_all_tiny_tolerance_fails_cleanly(tmp_path, capsys):
    assert main(["all", "--out", str(tmp_path), "--tol-scale", "1e-30"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "failed:" in out
