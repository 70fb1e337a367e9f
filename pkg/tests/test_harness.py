import csv
import json

import numpy as np
import pytest

from phononmem import memory
from phononmem.errors import ConvergenceError, IngestionError, ValidationError
from phononmem.harness import cli, config as cfgmod, experiments as ex
from phononmem.harness.countsio import export_counts, ingest_counts
from phononmem.harness.report import emit_report, report_csv, report_json

HEADER = "setting_a,setting_b,tau_ps,counts,integration_s\n"


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def qubit_cfg():
    return cfgmod.load_config("qubit-fig2").replace(tau_grid=(0.0, 2.0), mc_resamples=0)


# --- configuration ---------------------------------------------------------


def test_presets_load():
    q = cfgmod.load_config("qubit-fig2")
    e = cfgmod.load_config("entangled-fig4")
    assert q.mode == "qubit-storage" and e.mode == "entangled-storage"
    assert q.qubit_params == memory.QUBIT_PARAMS
    assert e.entangled_params == memory.ENTANGLED_PARAMS
    assert q.tau_grid == tuple(np.arange(0, 8.5, 0.5))
    assert q.seed == 2017 and q.mc_resamples == 100


def test_config_file_and_unknown_keys(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('mode = "predict"\nmemory.qubit.S0_hz = 5.0\ntau.grid_ps = [0.0, 1.0]\n')
    cfg = cfgmod.load_config(str(p))
    assert cfg.qubit_params.S0 == 5.0 and cfg.tau_grid == (0.0, 1.0)
    p.write_text('memory.qubit.bogus = 1\n')
    with pytest.raises(ValidationError, match="unknown config keys"):
        cfgmod.load_config(str(p))
    p.write_text('mode = "predict"\nmemory.qubit.N0_hz = 9.0\n')
    with pytest.raises(ValidationError):
        ex.run(cfgmod.load_config(str(p)))
    with pytest.raises(ValidationError):
        cfgmod.load_config(str(tmp_path / "missing.toml"))


def test_config_validation():
    with pytest.raises(ValidationError):
        cfgmod.ExperimentConfig(mc_resamples=1)
    with pytest.raises(ValidationError):
        cfgmod.ExperimentConfig(tau_grid=(1.0, 0.5))
    with pytest.raises(ValidationError):
        cfgmod.ExperimentConfig(mode="nope")
    assert cfgmod.parse_tau_grid("0:1:0.5") == (0.0, 0.5, 1.0)
    assert cfgmod.parse_tau_grid("0, 2.5") == (0.0, 2.5)
    with pytest.raises(ValidationError):
        cfgmod.parse_tau_grid("a:b")


def test_env_seed_fallback(tmp_path, monkeypatch):
    p = tmp_path / "c.toml"
    p.write_text('mode = "qubit-storage"\n')
    with pytest.raises(ValidationError, match="stochastic"):
        cfgmod.load_config(str(p)).require_seed()
    monkeypatch.setenv(cfgmod.SEED_ENV, "77")
    assert cfgmod.load_config(str(p)).seed == 77


# --- reports ---------------------------------------------------------------


def test_qubit_run_columns_and_model(qubit_cfg):
    rep = ex.run(qubit_cfg)
    for col in ("tau_ps", "f_avg", "f_avg_err", "f_proc", "f_model"):
        assert col in rep.columns
    for row in rep.per_tau:
        p = memory.retrieval_probability(memory.QUBIT_PARAMS, row["tau_ps"])
        assert row["f_model"] == pytest.approx((1 + p) / 2, abs=1e-15)
        assert row["f_avg_err"] is None
    assert set(json.loads(report_json(rep))) == {"config", "provenance", "per_tau", "fits", "predictions"}
    assert rep.provenance["kernel_backend"] in ("numba", "numpy")
    crossing = rep.predictions["classical_bound_crossing_ps"]
    assert crossing["measured_reference"] == 3.0


def test_mc_zero_leaves_error_cells_empty(qubit_cfg):
    rows = list(csv.DictReader(report_csv(ex.run(qubit_cfg)).splitlines()))
    assert rows and all(r["f_avg_err"] == "" and r["f_proc_err"] == "" for r in rows)
    with_mc = ex.run(qubit_cfg.replace(mc_resamples=3))
    assert with_mc.columns == ex.run(qubit_cfg).columns
    assert all(r["f_avg_err"] > 0 for r in with_mc.per_tau)


def test_same_seed_same_bytes(tmp_path):
    outs = []
    for k in range(2):
        stem = tmp_path / f"r{k}"
        assert run_cli("simulate-entangled", "--tau-grid", "0,1.5", "--mc-resamples", 2, "--out", stem) == 0
        outs.append(((tmp_path / f"r{k}.json").read_bytes(), (tmp_path / f"r{k}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_different_seed_changes_counts(qubit_cfg):
    a = ex.run(qubit_cfg)
    b = ex.run(qubit_cfg.replace(seed=1))
    assert a.per_tau[0]["f_avg"] != b.per_tau[0]["f_avg"]


def test_per_tau_results_do_not_depend_on_grid(qubit_cfg):
    a = ex.run(qubit_cfg.replace(tau_grid=(0.0, 1.0, 2.0), mc_resamples=2))
    b = ex.run(qubit_cfg.replace(tau_grid=(1.0, 5.0), mc_resamples=2))
    ra = next(r for r in a.per_tau if r["tau_ps"] == 1.0)
    rb = next(r for r in b.per_tau if r["tau_ps"] == 1.0)
    for k in ("f_avg", "f_avg_err", "f_proc", "total_counts"):
        assert ra[k] == rb[k]


def test_noiseless_run_converges_to_model(qubit_cfg):
    rep = ex.run(qubit_cfg.replace(noiseless=True, integration_s=1e6))
    for row in rep.per_tau:
        assert abs(row["f_avg"] - row["f_model"]) < 1e-6


# --- counts files ----------------------------------------------------------


def test_export_ingest_analysis_round_trip(tmp_path, qubit_cfg):
    cfg = qubit_cfg.replace(mc_resamples=3)
    rep = ex.run(cfg)
    path = export_counts([r for t in sorted(rep.records) for r in rep.records[t]], tmp_path / "c.csv")
    recs = ingest_counts(path)
    assert len(recs) == 72
    back = ex.run_analysis(cfg.replace(mode="analyze"), recs)
    assert back.fits["kind"] == "process"
    for a, b in zip(rep.per_tau, back.per_tau):
        for k in ("f_avg", "f_avg_err", "f_proc", "f_proc_err", "log_likelihood", "total_counts"):
            assert a[k] == b[k]


def test_ingest_well_formed_six_settings(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text(HEADER + "".join(f"{a},,0.0,{10 + i},5\n" for i, a in enumerate("HVDARL")))
    recs = ingest_counts(p)
    assert len(recs) == 6 and recs[0].setting.analyzers == ("H",)


def test_ingest_reports_every_violation(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text(HEADER + "H,,0.0,-1,5\nV,,0.0,3,5\nV,,0.0,4,5\nQ,,0.0,4,5\nD,,-1,x,0\n")
    with pytest.raises(IngestionError) as info:
        ingest_counts(p)
    msg = "\n".join(info.value.violations)
    assert "line 2: counts -1 is negative" in msg
    assert "line 4: duplicate" in msg
    assert "line 5" in msg and "line 6" in msg


def test_ingest_missing_column(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("setting_a,tau_ps,counts\nH,0,1\n")
    with pytest.raises(IngestionError, match="missing columns"):
        ingest_counts(p)


def test_state_counts_analysis(tmp_path):
    cfg = cfgmod.load_config("entangled-fig4").replace(tau_grid=(0.0,), mc_resamples=0)
    rep = ex.run(cfg)
    path = export_counts(rep.records[0.0], tmp_path / "s.csv")
    back = ex.run_analysis(cfg.replace(mode="analyze"), ingest_counts(path))
    assert back.fits["kind"] == "two-qubit"
    assert back.per_tau[0]["f_phi"] == rep.per_tau[0]["f_phi"]


# --- CLI -------------------------------------------------------------------


def test_cli_simulate_and_analyze(tmp_path):
    stem, counts = tmp_path / "q", tmp_path / "counts.csv"
    assert run_cli("simulate-qubit", "--tau-grid", "0", "--mc-resamples", 0, "--out", stem,
                   "--export-counts", counts) == 0
    assert (tmp_path / "q.json").exists() and (tmp_path / "q.csv").exists()
    assert run_cli("--format", "json", "analyze", "--counts", counts, "--out", tmp_path / "a") == 0
    a = json.loads((tmp_path / "a.json").read_text())
    q = json.loads((tmp_path / "q.json").read_text())
    assert a["per_tau"][0]["f_avg"] == q["per_tau"][0]["f_avg"]
    assert not (tmp_path / "a.csv").exists()


def test_cli_predict_flags_discrepancies(tmp_path):
    assert run_cli("predict", "--scenario", "both", "--out", tmp_path / "p") == 0
    pred = json.loads((tmp_path / "p.json").read_text())["predictions"]
    assert pred["cooling"]["any_discrepancy"] is True
    assert pred["energy"]["any_discrepancy"] is False
    assert run_cli("predict", "--scenario", "identity", "--out", tmp_path / "i") == 0
    ident = json.loads((tmp_path / "i.json").read_text())["predictions"]["identity"]
    assert ident["qubit"]["values"] == ident["qubit"]["baseline_values"]


def test_cli_fit_from_rate_files(tmp_path):
    tau = np.arange(0, 8.5, 0.5)
    sig = memory.detected_rate(memory.QUBIT_PARAMS, tau, True)
    noise = memory.detected_rate(memory.QUBIT_PARAMS, tau, False)
    for name, y in (("s.csv", sig), ("n.csv", noise)):
        (tmp_path / name).write_text("tau_ps,rate_hz\n" + "".join(f"{float(t)!r},{float(v)!r}\n" for t, v in zip(tau, y)))
    assert run_cli("fit", "--rates", tmp_path / "s.csv", "--noise-rates", tmp_path / "n.csv",
                   "--out", tmp_path / "f") == 0
    fits = json.loads((tmp_path / "f.json").read_text())["fits"]
    assert fits["memory_rates"]["tau_m"] == pytest.approx(3.5, abs=1e-6)
    assert fits["memory_rates"]["S0"] == pytest.approx(6.2, abs=1e-6)


def test_cli_simulated_fit(tmp_path):
    assert run_cli("fit", "--out", tmp_path / "f") == 0
    fits = json.loads((tmp_path / "f.json").read_text())["fits"]
    assert fits["source"] == "simulated"
    assert abs(fits["signal_decay"]["tau_m"] - 3.5) < 0.35


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(HEADER + "H,,0,-5,1\n")
    assert run_cli("analyze", "--counts", bad, "--out", tmp_path / "x") == cli.EXIT_VALIDATION
    assert "line 2" in capsys.readouterr().err
    assert run_cli("simulate-qubit", "--config", tmp_path / "nope.toml") == cli.EXIT_VALIDATION

    def boom(cfg, **kw):
        raise ConvergenceError("stuck", best=None)

    monkeypatch.setattr(ex, "run", boom)
    assert run_cli("simulate-qubit", "--out", tmp_path / "y") == cli.EXIT_CONVERGENCE


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])


def test_emit_report_rejects_unwritable(tmp_path, qubit_cfg):
    rep = ex.run(qubit_cfg)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ValidationError):
        emit_report(rep, blocker / "sub" / "r", "json")
