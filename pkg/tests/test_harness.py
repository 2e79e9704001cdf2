import json

import numpy as np
import pytest

from nhevec import harness
from nhevec.errors import RunFailed, SeparationViolated
from nhevec.harness import KINDS, ExperimentConfig, default_config, emit_report, run_experiment


def _small(kind, **kw):
    cfg = default_config(kind).to_dict()
    cfg.update(kw)
    return ExperimentConfig.from_dict(cfg)


@pytest.mark.parametrize("kind", KINDS)
def test_default_configs_roundtrip(kind):
    cfg = default_config(kind)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back.to_dict() == cfg.to_dict()
    assert back.digest() == cfg.digest()


def test_digest_changes_with_seed():
    a = default_config("spectrum")
    b = ExperimentConfig.from_dict(dict(a.to_dict(), master_seed=1))
    assert a.digest() != b.digest()


def test_invalid_config():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(n_samples=-1)
    with pytest.raises(ValueError):
        ExperimentConfig(t_rule={"mode": "other"})
    with pytest.raises(ValueError):
        ExperimentConfig(targets=[{"z": [0, 0], "side": "up"}])


def test_t_rule():
    c = ExperimentConfig(t_rule={"mode": "power", "exponent": -1 / 3, "eps0": 0.05})
    assert np.isclose(c.t_for(256), 256 ** (-1 / 3 + 0.05))
    assert np.isclose(c.spec_for(256).t, c.t_for(256))


def test_empty_run_passes_with_warning():
    rec = run_experiment(_small("spectrum", n_samples=0, N_list=[8]))
    assert rec.aggregates["pass"] and "warning" in rec.aggregates


@pytest.mark.parametrize("kind,kw", [
    ("spectrum", {"N_list": [16], "n_samples": 6}),
    ("verify-a1", {"N_list": [32], "n_samples": 2}),
    ("verify-a3", {"N_list": [32], "n_samples": 2}),
    ("level-repulsion", {"N_list": [32], "n_samples": 20}),
    ("kq-ratio", {"N_list": [8, 16], "n_samples": 4}),
    ("jacobian-check", {"N_list": [2, 3], "n_samples": 3}),
    ("evec-stats", {"N_list": [16], "n_samples": 100}),
    ("evec-stats", {"N_list": [16], "n_samples": 12}),
])
def test_thread_count_does_not_change_aggregates(kind, kw):
    cfg = _small(kind, **kw)
    a = run_experiment(cfg, threads=1).aggregate_json()
    b = run_experiment(cfg, threads=4).aggregate_json()
    assert a == b


def test_discard_cap(monkeypatch):
    def flaky(cfg, n, i, ctx):
        if i % 2:
            raise SeparationViolated("forced")
        return {"fro2_over_N": 1.0, "digest": "x"}

    monkeypatch.setitem(harness.KERNELS, "sample", flaky)
    with pytest.raises(RunFailed):
        run_experiment(_small("sample", n_samples=10, N_list=[4]))
    rec = run_experiment(_small("sample", n_samples=10, N_list=[4], discard_cap=0.6))
    assert len(rec.discarded) == 5
    assert rec.aggregates["by_N"]["4"]["n_used"] == 5


def test_emit_report_files(tmp_path):
    cfg = _small("evec-stats", N_list=[16], n_samples=110)
    rec = run_experiment(cfg)
    emit_report(rec, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config_digest"] == cfg.digest()
    assert "wall_clock_s" in summary
    assert "wall_clock" not in (tmp_path / "aggregates.json").read_text()
    rows = [l for l in (tmp_path / "ecdf_target0_N16.dat").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 110 + 1
    lines = (tmp_path / "samples.csv").read_text().splitlines()
    assert len(lines) == 1 + 110


def test_scaling_reports_emit_dat(tmp_path):
    rec = run_experiment(_small("verify-a1", N_list=[16], n_samples=1))
    emit_report(rec, tmp_path)
    dat = sorted(p.name for p in tmp_path.glob("*.dat"))
    assert len(dat) == 5
    grid = default_config("verify-a1").eta_grid(16)
    body = [l for l in (tmp_path / dat[0]).read_text().splitlines() if not l.startswith("#")]
    assert len(body) == grid.size


def test_dse_table(tmp_path):
    rec = run_experiment(_small("dse-table", N_list=[8]))
    r = rec.aggregates["results"]["target0_N8"]
    assert abs(r["Im_m0"] - r["sqrt_1_minus_abs_z2"]) < 1e-8
    files = emit_report(rec, tmp_path)
    assert any(f.endswith("quantiles_target1_N8.csv") for f in files)


def test_sample_writes_cmat(tmp_path):
    from nhevec.ensemble import read_cmat, sample_iid
    cfg = _small("sample", N_list=[5], n_samples=2)
    run_experiment(cfg, write_samples=str(tmp_path))
    A = read_cmat(tmp_path / "sample_N5_000001.cmat")
    assert np.array_equal(A, sample_iid(cfg.spec_for(5), 1))
