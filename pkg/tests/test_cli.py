import json

from nhevec.cli import main


def test_print_defaults(capsys):
    assert main(["--print-defaults", "mgf"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["kind"] == "mgf" and cfg["t_rule"]["mode"] == "power"


def test_print_all_defaults(capsys):
    assert main(["--print-defaults"]) == 0
    assert "evec-stats" in json.loads(capsys.readouterr().out)


def test_overrides(capsys):
    main(["--seed", "9", "--print-defaults", "evec-stats", "--N", "32", "--n-samples", "5",
          "--z", "0.1+0.2i", "--weights", "1", "0.25", "--param", "tau=0.1"])
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["master_seed"] == 9 and cfg["N_list"] == [32] and cfg["n_samples"] == 5
    assert cfg["targets"] == [{"z": [0.1, 0.2], "side": "right", "weights": [1.0, 0.25]}]
    assert cfg["params"]["tau"] == 0.1


def test_run_and_config_file(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["--out", str(out), "spectrum", "--N", "8", "--n-samples", "3"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps(summary["config"]))
    out2 = tmp_path / "o2"
    assert main(["--config", str(cfgfile), "--out", str(out2)]) == 0
    assert (out / "aggregates.json").read_bytes() == (out2 / "aggregates.json").read_bytes()


def test_bad_seed(capsys):
    assert main(["--seed", "-1", "spectrum"]) == 2
