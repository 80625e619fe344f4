import csv

import pytest

from jumpctl.cli import main


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_T_outputs(tmp_path):
    rc = main(["sweep", "--axis", "T", "--values", "0.5,1.0", "--n-paths", "2000", "--out", str(tmp_path)])
    assert rc == 0
    r = rows(tmp_path / "sweep_T.csv")
    assert len(r) == 6 and {x["policy"] for x in r} == {"sign", "linear", "threshold"}
    assert list(r[0]) == ["axis_value", "policy", "mean", "ci95", "n"]
    assert (tmp_path / "sweep_T.svg").read_text().count("<polyline") == 3
    assert (tmp_path / "manifest.json").exists()


def test_beta_check(tmp_path):
    assert main(["diagnostics", "--beta-check", "n=1", "t=4", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "beta_check.csv")
    assert float(r[0]["analytic"]) == 1.0
    assert list(r[0]) == ["n", "t", "mc", "analytic", "se"]


def test_repeat_is_byte_identical(tmp_path):
    args = ["sweep", "--axis", "tau", "--n-paths", "500"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b"), "--threads", "4"])
    assert (tmp_path / "a" / "sweep_tau.csv").read_bytes() == (tmp_path / "b" / "sweep_tau.csv").read_bytes()


def test_env_threads_override(tmp_path, monkeypatch):
    from jumpctl import cli

    monkeypatch.setenv("JUMPCTL_THREADS", "3")
    args = cli.build_parser().parse_args(["transform-check", "--threads", "1"])
    assert cli._threads(args) == 3


def test_transform_check_row(tmp_path):
    assert main(["transform-check", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "transform_check.csv")[0]
    assert float(r["c"]) == pytest.approx(0.3) and r["alpha"] == "-0.5 -0.5"


def test_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[sim]\ndt = 0.0\n")
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "config.ValidationError: dt > 0" in capsys.readouterr().err


def test_acceptance_failure_exit_2(tmp_path):
    # literal policy reading does not give the expected ordering
    cfg = tmp_path / "lit.toml"
    cfg.write_text('[experiment]\nconvention = "literal"\nvalues = [2.0]\n')
    assert main(["sweep", "--config", str(cfg), "--n-paths", "3000", "--out", str(tmp_path)]) == 2


def test_mollify_csv_columns(tmp_path):
    rc = main(["mollify-check", "--n-values", "4,16", "--n-paths", "50", "--dt", "0.01", "--out", str(tmp_path)])
    assert rc in (0, 2)
    assert list(rows(tmp_path / "mollify_check.csv")[0])[:4] == ["n", "coupling_error", "drift_error_integral",
                                                                  "ci95"]
