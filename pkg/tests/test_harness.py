import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from penlangevin.dynamics import Trajectory
from penlangevin.filters import FilterOutput, Observations
from penlangevin.harness import (ConfigError, ExperimentConfig, FilterSpec, MetricsRow, NoiseSpec, add_noise,
                                 method_key, report, root_mean_square_error, run_experiment, score, summarize)
from penlangevin.harness.cli import main
from penlangevin.harness.metrics import read_rows
from penlangevin.noise import Gaussian, StudentIso


def _traj(n=50, seed=0):
    rng = np.random.default_rng(seed)
    return Trajectory(np.arange(n) / 60, rng.normal(size=(n, 4)))


def small_config(**kw):
    base = dict(seed=11, n_replicates=2, t_hours=0.5, intervals_min=(1.0, 5.0),
                filters=(FilterSpec("KF"), FilterSpec("EKF", True), FilterSpec("PF", True, "Strang")),
                n_particles=100)
    base.update(kw)
    return ExperimentConfig(**base)


# --- scoring -----------------------------------------------------------------

def test_score_identity_and_offset():
    tr = _traj()
    assert score(tr, tr) == (0.0, 0.0)
    shifted = tr.positions + np.array([0.3, 0.4])
    s = score(tr, shifted)
    assert s.rmse == pytest.approx(0.5) and s.max_error == pytest.approx(0.5)
    assert root_mean_square_error(tr, shifted) == pytest.approx(0.5)


@given(st.integers(1, 40), st.integers(0, 10_000))
def test_score_matches_two_pass_reference(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
    total, worst, sq = 0.0, 0.0, 0.0
    for (x1, x2), (e1, e2) in zip(a, b):
        d = ((x1 - e1) ** 2 + (x2 - e2) ** 2) ** 0.5
        total += d
        sq += d * d
        worst = max(worst, d)
    s = score(a, b)
    assert s.rmse == pytest.approx(total / n, rel=1e-12)
    assert s.max_error == pytest.approx(worst, rel=1e-12)
    assert root_mean_square_error(a, b) == pytest.approx((sq / n) ** 0.5, rel=1e-12)
    assert s.rmse <= s.max_error + 1e-15


def test_score_rejects_mismatch():
    tr = _traj(10)
    with pytest.raises(ValueError):
        score(tr, tr.positions[:9])
    est = FilterOutput(tr.times + 1.0, tr.states, np.zeros((10, 4, 4)))
    with pytest.raises(ValueError):
        score(tr, est)


def test_add_noise():
    tr = _traj(10_000)
    obs = add_noise(tr, Gaussian(1e-12), np.random.default_rng(0))
    np.testing.assert_allclose(obs.values, tr.positions, atol=1e-10)
    np.testing.assert_array_equal(obs.times, tr.times)
    res = add_noise(tr, Gaussian(0.2), np.random.default_rng(1)).values - tr.positions
    np.testing.assert_allclose(res.std(0), 0.2, rtol=0.05)
    res = add_noise(tr, StudentIso(0.2, 3), np.random.default_rng(2)).values - tr.positions
    assert np.all(stats.kurtosis(res, axis=0) > 1)
    with pytest.raises(ValueError):
        add_noise(Trajectory(np.zeros(0), np.zeros((0, 4))), Gaussian(0.2), np.random.default_rng(0))


def test_metrics_row_invariants():
    with pytest.raises(ValueError):
        MetricsRow("g", "KF", 1.0, 0, 0.5, 0.4, 0.5, 0.0)
    with pytest.raises(ValueError):
        MetricsRow("g", "KF", 1.0, 0, -0.1, 0.4, 0.5, 0.0)
    failed = MetricsRow.failed("g", "KF", 1.0, 0, "boom")
    assert failed.status == "failed" and np.isnan(failed.rmse_km)


# --- configuration -----------------------------------------------------------

def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.n_replicates == 20 and cfg.t_hours == 12 and cfg.n_particles == 500
    assert cfg.intervals_min == (1.0, 3.0, 5.0, 20.0)
    assert cfg.lam_value == pytest.approx((1 / 3600) ** 0.8)
    assert cfg.subsample_factor(5) == 300
    np.testing.assert_array_equal(cfg.start_state(), [25, 5, 0, 0])
    spec = cfg.potential_spec()
    np.testing.assert_allclose(spec.precisions[1], [[1 / 36, -1 / 100], [-1 / 100, 1 / 100]])


def test_yaml_roundtrip_and_unknown_keys(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text("seed: 3\nnoise:\n  - {kind: student, sigma_obs: 0.2, d: 3}\n"
                 "filters:\n  - {algorithm: PF, penalized: true, scheme: Strang}\n")
    cfg = ExperimentConfig.load(p)
    assert cfg.seed == 3 and cfg.noise[0].build() == StudentIso(0.2, 3)
    assert cfg.filters[0].name == "Penalized Strang PF"
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    for bad in ("sed: 3\n", "movement: {tau: 1, nuu: 5}\n", "noise: [{kind: student, sigma_obs: 0.2}]\n",
                "filters: [{algorithm: PF, particles: 10}]\n", "intervals_min: [0.5]\nh_sim_seconds: 7\n",
                "potential: [{alpha: 1, center: [0, 0], precision: [1, 0, 1], extra: 2}]\n"):
        p.write_text(bad)
        with pytest.raises(ConfigError):
            ExperimentConfig.load(p)


def test_method_selection():
    cfg = small_config()
    assert method_key("Penalized Strang PF") == "penalized-strang-pf"
    sel = cfg.select_methods(["penalized-strang-pf", "KF"])
    assert [f.name for f in sel.filters] == ["Penalized Strang PF", "KF"]
    with pytest.raises(ConfigError):
        cfg.select_methods(["ukf"])


# --- pipeline ------------------------------------------------------------------

@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    return run_experiment(small_config(), out_dir=out), out


def test_rows_and_artifacts(bench_run):
    res, out = bench_run
    assert len(res.rows) == 2 * 2 * 4
    assert all(r.status == "ok" for r in res.rows)
    rep = out / "replicates" / "r001"
    truth = Trajectory.from_csv(rep / "truth_5min.csv")
    obs = Observations.from_csv(rep / "obs_gaussian_5min.csv")
    est = FilterOutput.from_csv(rep / "est_gaussian_5min_penalized-strang-pf.csv")
    kf = FilterOutput.from_csv(rep / "est_gaussian_5min_kf.csv", rep / "est_gaussian_5min_kf.cov.csv")
    for t in (obs.times, est.times, kf.times):
        np.testing.assert_array_equal(t, truth.times)
    assert est.ess is not None and kf.ess is None
    row = next(r for r in res.rows if r.replicate == 1 and r.interval_min == 5.0 and r.method == "KF")
    assert row.rmse_km == pytest.approx(score(truth, kf).rmse, rel=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 11


def test_summary_means_match_rows(bench_run):
    res, out = bench_run
    for s in res.summary:
        vals = [r.rmse_km for r in res.rows if (r.noise, r.method, r.interval_min) == (s.noise, s.method, s.interval_min)]
        assert abs(s.mean_rmse_km - np.mean(vals)) <= 1e-12
    assert read_rows(out / "metrics.csv") == [
        MetricsRow(**{**r.__dict__, "wall_time_s": 0.0}) for r in res.rows]
    assert "| Before filter |" in (out / "summary.md").read_text()


def test_determinism_independent_of_workers(bench_run, tmp_path):
    res, out = bench_run
    again = run_experiment(small_config(workers=2), out_dir=tmp_path)
    assert (tmp_path / "metrics.csv").read_bytes() == (out / "metrics.csv").read_bytes()
    assert (tmp_path / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()
    assert [r.rmse_km for r in again.rows] == [r.rmse_km for r in res.rows]


def test_report_regenerates_summary(bench_run, tmp_path):
    res, out = bench_run
    before = (out / "summary.csv").read_bytes()
    (out / "summary.csv").unlink()
    report(out)
    assert (out / "summary.csv").read_bytes() == before


def test_zero_noise_run_recovers_truth():
    cfg = small_config(n_replicates=1, intervals_min=(1.0,),
                       noise=(NoiseSpec("gaussian", 1e-9), NoiseSpec("student", 1e-9, d=3)))
    res = run_experiment(cfg, persist=False)
    assert all(r.status == "ok" and r.rmse_km < 1e-3 for r in res.rows)


def test_failed_filter_is_recorded_and_pipeline_continues(tmp_path):
    far = tmp_path / "far.csv"
    far.write_text("x,y\n100,100\n101,100\n101,101\n100,101\n")
    cfg = small_config(n_replicates=1, intervals_min=(1.0,), polygon=str(far), penalize_simulation=False,
                       filters=(FilterSpec("PF", True, n_particles=50, hard_constraint=True), FilterSpec("KF")))
    res = run_experiment(cfg, out_dir=tmp_path / "run")
    by = {r.method: r for r in res.rows}
    assert by["Penalized Lie-Trotter PF (hard)"].status == "failed"
    assert "FilterDivergence" in by["Penalized Lie-Trotter PF (hard)"].reason
    assert by["KF"].status == "ok"
    summary = summarize(res.rows)
    assert next(s for s in summary if s.method == "KF").n_ok == 1


# --- command line ------------------------------------------------------------------

def test_cli_round_trip(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("n_replicates: 1\nt_hours: 0.25\nintervals_min: [1]\nn_particles: 50\n"
                   "filters: [{algorithm: KF}, {algorithm: PF, penalized: true}]\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--seed", "4"]) == 0
    truth = tmp_path / "truth_1min.csv"
    assert main(["corrupt", "--config", str(cfg), "--truth", str(truth), "--out", str(tmp_path)]) == 0
    assert main(["filter", "--config", str(cfg), "--obs", str(tmp_path / "obs_gaussian.csv"),
                 "--truth", str(truth), "--out", str(tmp_path), "--method", "kf"]) == 0
    rec = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert rec["status"] == "ok" and rec["results"][0]["rmse_km"] < 0.3
    bench = tmp_path / "bench"
    assert main(["bench", "--config", str(cfg), "--out", str(bench), "--interval-min", "1,3"]) == 0
    assert main(["report", "--out", str(bench)]) == 0
    assert {r.interval_min for r in read_rows(bench / "metrics.csv")} == {1.0, 3.0}


def test_cli_errors_are_machine_readable(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["status"] == "error" and err["verb"] == "report"
    bad = tmp_path / "bad.yaml"
    bad.write_text("n_replicate: 3\n")
    assert main(["bench", "--config", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"
    assert main(["nonsense"]) == 2
