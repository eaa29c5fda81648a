import json

import pytest

from skrate.cli import main
from skrate.experiment import (
    ConfigError,
    ExperimentConfig,
    columns,
    parse_config,
    preset,
    read_csv,
    run_sweep,
    write_csv,
)


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def toml(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_rates_training_only(capsys, tmp_path):
    cfg = toml(tmp_path, 'curves = ["training"]\n[system]\nT = 10\nrho = 0.95\nsnr_db = 30\n')
    rc, out, _ = run(capsys, "rates", "--config", cfg)
    assert rc == 0
    rep = json.loads(out)
    assert rep["totals"]["training"] == pytest.approx(0.33585, abs=5e-6)
    assert rep["manifest"]["seed"] == 0
    assert set(rep["manifest"]["versions"]) >= {"skrate", "numpy", "scipy", "python"}


def test_rates_rho_zero(capsys, tmp_path):
    cfg = toml(tmp_path, 'curves = ["training"]\n[system]\nrho = 0.0\n')
    rc, out, _ = run(capsys, "rates", "--config", cfg)
    assert json.loads(out)["totals"]["training"] == 0.0


def test_rates_high_snr_gap(capsys, tmp_path):
    cfg = toml(tmp_path, 'curves = ["upper", "lower_pd"]\n[system]\nT = 10\nrho = 0.95\nsnr_db = 60\n')
    rc, out, _ = run(capsys, "rates", "--config", cfg)
    t = json.loads(out)["totals"]
    gap = t["upper"] - t["lower_pd"]
    assert abs(gap / 0.28853900817779 - 1) <= 0.05


@pytest.mark.parametrize(
    "text,path",
    [
        ("bogus = 1\n", "bogus"),
        ("[eval]\nn_sampls = 5\n", "eval.n_sampls"),
        ('curves = []\n', "curves"),
        ('curves = ["upper", "nope"]\n', "curves[1]"),
        ('[sweep]\naxis = "snr_db"\nvalues = [10, 5]\n', "sweep.values"),
        ('[sweep]\naxis = "snr_db"\nvalues = [0]\n[system]\nsnr_db = 3\n', "system.snr_db"),
        ("[system]\nrho = 1.0\n", "system"),
        ('[system]\nT = "ten"\n', "system.T"),
        ('rnc = "psychic"\n', "rnc"),
        ('[optimizer]\ntau_logit_range = [1, 2, 3]\n', "optimizer.tau_logit_range"),
    ],
)
def test_config_errors(capsys, tmp_path, text, path):
    cfg = toml(tmp_path, text)
    rc, out, err = run(capsys, "rates", "--config", cfg)
    assert rc == 1
    assert f"config error: {path}:" in err
    assert out == ""


def test_empty_curves_fails_before_compute(capsys, tmp_path, monkeypatch):
    import skrate.experiment as ex

    monkeypatch.setattr(ex, "compute_rates", lambda *a: pytest.fail("computed"))
    cfg = toml(tmp_path, "curves = []\n")
    rc, _, err = run(capsys, "sweep", "--preset", "fig4", "--config", cfg)
    assert rc == 1 and "curves" in err


def test_bad_toml_and_missing_file(capsys, tmp_path):
    assert run(capsys, "rates", "--config", toml(tmp_path, "[[[\n"))[0] == 1
    assert run(capsys, "rates", "--config", str(tmp_path / "missing.toml"))[0] == 1


def test_env_overrides(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SKRATE_SEED", "42")
    cfg = toml(tmp_path, 'curves = ["training"]\n')
    rc, out, _ = run(capsys, "rates", "--config", cfg)
    assert json.loads(out)["manifest"]["seed"] == 42
    rc, out, _ = run(capsys, "rates", "--config", cfg, "--seed", "7")
    assert json.loads(out)["manifest"]["seed"] == 7
    monkeypatch.setenv("SKRATE_WORKERS", "many")
    assert run(capsys, "rates", "--config", cfg)[0] == 1


def test_sweep_csv_roundtrip_and_sentinel(tmp_path, capsys):
    cfg = toml(
        tmp_path,
        'curves = ["training", "lower_pd"]\n[sweep]\naxis = "coherence_T"\nvalues = [2, 5, 20]\n'
        "[system]\nrho = 0.99\nsnr_db = 30\n",
    )
    out = tmp_path / "s.csv"
    rc, _, _ = run(capsys, "sweep", "--config", cfg, "--out", str(out))
    assert rc == 0
    text = out.read_text()
    rows = read_csv(text)
    assert text.splitlines()[0].startswith("T,training,training_se")
    assert ",," not in text and "NA" in text  # Q1/Q2 of the discussion bound are absent
    assert write_csv(rows, text.splitlines()[0].split(",")) == text
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["n_rows"] == 3 and summary["failed"] == []
    assert "workers" not in json.dumps(summary["manifest"])


def test_in_memory_rows_equal_parsed_csv():
    cfg = preset("fig5")
    cfg = ExperimentConfig(**{**cfg.__dict__, "curves": ("training", "lower_pd"), "values": (2, 10)})
    rows = run_sweep(cfg)
    assert read_csv(write_csv(rows, columns(cfg))) == rows


def test_fig5_training_inverse_in_T():
    cfg = preset("fig5")
    cfg = ExperimentConfig(**{**cfg.__dict__, "curves": ("training",)})
    rows = run_sweep(cfg)
    k = [r["T"] * r["training"] for r in rows]
    assert max(k) - min(k) <= 1e-8 * max(k)
    assert preset("fig5", 35.0).snr_db == 35.0


def test_fig4_preset_shape():
    cfg = preset("fig4")
    assert cfg.values == tuple(float(v) for v in range(0, 55, 5))
    assert (cfg.T, cfg.rho, cfg.curves) == (10, 0.95, ("training", "upper", "lower_pd", "lower_nodisc"))


def test_failed_point_recorded(monkeypatch):
    import skrate.experiment as ex

    real = ex.compute_rates

    def flaky(cfg, T, snr):
        if snr == 10.0:
            raise ex.NumericalError("boom")
        return real(cfg, T, snr)

    monkeypatch.setattr(ex, "compute_rates", flaky)
    cfg = parse_config({"curves": ["training"], "sweep": {"axis": "snr_db", "values": [0, 10, 20]}})
    rows = ex.run_sweep(cfg)
    assert [r["status"] for r in rows] == ["ok", "error:NumericalError", "ok"]
    assert rows[1]["training"] is None
    assert "NA" in write_csv(rows, columns(cfg)).splitlines()[2]


def test_optimize_command(capsys, tmp_path):
    cfg = toml(tmp_path, 'curves = ["lower_pd"]\n[system]\nT = 10\nrho = 0.95\nsnr_db = 30\n')
    rc, out, _ = run(capsys, "optimize", "--config", cfg)
    res = json.loads(out)["results"]["lower_pd"]
    assert res["best_rate"]["total"] >= res["warm_start_rate"]
    assert "schedule" in res["warm_start_note"]
    cfg = toml(tmp_path, 'curves = ["training"]\n', "t.toml")
    assert run(capsys, "optimize", "--config", cfg)[0] == 1


def test_rnc_and_eps1_flags(capsys, tmp_path):
    cfg = toml(tmp_path, 'curves = ["lower_nodisc"]\n[system]\nsnr_db = 20\n')
    _, a, _ = run(capsys, "rates", "--config", cfg, "--rnc", "const:3")
    _, b, _ = run(capsys, "rates", "--config", cfg, "--rnc", "const:3", "--eps1-rule", "T")
    ra, rb = json.loads(a), json.loads(b)
    assert ra["manifest"]["config"]["rnc"] == "const:3.0"
    assert rb["totals"]["lower_nodisc"] >= ra["totals"]["lower_nodisc"]
    assert run(capsys, "rates", "--config", cfg, "--rnc", "bad")[0] == 1


@pytest.mark.slow
def test_validate_pass_and_fault(capsys):
    rc, out, _ = run(capsys, "validate")
    assert rc == 0, out
    assert "all checks passed" in out
    rc, out, _ = run(capsys, "validate", "--inject-fault", "q1-sign")
    assert rc == 2
    assert "[FAIL] closed-form MI identities" in out


@pytest.mark.slow
def test_validate_verdicts_seed_independent(capsys):
    verdicts = []
    for seed in ("1", "2"):
        _, out, _ = run(capsys, "validate", "--seed", seed)
        verdicts.append([line.split("]")[0] for line in out.splitlines() if line.startswith("[")])
    assert verdicts[0] == verdicts[1]
