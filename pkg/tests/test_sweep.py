import csv
import io
from pathlib import Path

import numpy as np
import pytest

from rfood import sweep
from rfood.config import ExperimentConfig, parse_config
from rfood.sweep import CSV_HEADER, SweepAborted, run_sweep, run_trial

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GOLDEN_HEADER = "setting,activation,n,p,m,K,trials,metric,model_kind,mean,stderr,failures"


def small_config(**changes):
    base = dict(
        setting_name="small", n=6, p=5, m_values=(5, 10), sigma=0.1, spectrum="sim2",
        ground_truth="softplus", master_seed=11, K=2, shift="isotropic(2)", n_test=50, trials=6,
        metrics=("id_mse", "ood_mse", "id_excess", "ood_excess"),
    )
    base.update(changes)
    return ExperimentConfig(**base)


def read_rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_golden_header():
    text = run_sweep(small_config(trials=2, metrics=("id_mse",))).to_csv()
    assert text.splitlines()[0] == GOLDEN_HEADER
    assert ",".join(CSV_HEADER) == GOLDEN_HEADER


def test_row_count_and_order():
    cfg = small_config()
    res = run_sweep(cfg)
    assert len(res.rows) == len(cfg.m_values) * len(cfg.metrics) * 2
    assert [(r.m, r.metric, r.model_kind) for r in res.rows[:3]] == [
        (5, "id_mse", "single_avg"), (5, "id_mse", "ensemble"), (5, "ood_mse", "single_avg"),
    ]
    assert all(r.trials == cfg.trials and r.failures == 0 for r in res.rows)


def test_single_member_single_trial():
    res = run_sweep(small_config(K=1, trials=1))
    for single, ens in zip(res.rows[::2], res.rows[1::2]):
        assert single.mean == ens.mean
        assert single.stderr == ens.stderr == 0.0


def test_ensemble_mse_never_exceeds_member_average():
    # the squared loss is convex, so per trial the averaged predictor wins
    res = run_sweep(small_config(metrics=("id_mse", "ood_mse")))
    for single, ens in zip(res.rows[::2], res.rows[1::2]):
        assert ens.mean <= single.mean


def test_rerun_identical():
    cfg = small_config()
    assert run_sweep(cfg).to_csv() == run_sweep(cfg).to_csv()


def test_worker_count_independent():
    cfg = small_config(trials=10)
    one = run_sweep(cfg, workers=1).to_csv()
    assert run_sweep(cfg, workers=3, chunk_size=3).to_csv() == one
    assert run_sweep(cfg, workers=1, chunk_size=7).to_csv() == one


def test_seed_changes_output():
    a = run_sweep(small_config()).to_csv()
    b = run_sweep(small_config(master_seed=12)).to_csv()
    assert a != b


def test_float_cells_round_trip():
    res = run_sweep(small_config(trials=3))
    rows = read_rows(res.to_csv())[1:]
    for row, parsed in zip(res.rows, rows):
        assert float(parsed[9]) == row.mean and float(parsed[10]) == row.stderr


def test_to_csv_writes_file(tmp_path):
    res = run_sweep(small_config(trials=2))
    path = tmp_path / "out.csv"
    text = res.to_csv(path)
    assert path.read_text() == text


def test_trial_shares_data_across_members():
    # with identity features and m ≥ n every member interpolates the same (X, y)
    cfg = small_config(activation="identity", ground_truth="linear", m_values=(30,), K=3, trials=1)
    out = run_trial(cfg, 0, 0)
    assert out.shape == (4, 2)
    assert np.all(out[:, 1] <= out[:, 0] + 1e-15)


def test_failures_counted(monkeypatch):
    real = sweep.run_trial

    def flaky(cfg, m_index, trial):
        return None if trial == 0 else real(cfg, m_index, trial)

    monkeypatch.setattr(sweep, "run_trial", flaky)
    res = run_sweep(small_config(trials=20))
    assert all(r.failures == 1 and r.trials == 19 for r in res.rows)


def test_too_many_failures_abort(monkeypatch):
    real = sweep.run_trial

    def flaky(cfg, m_index, trial):
        return None if trial < 2 else real(cfg, m_index, trial)

    monkeypatch.setattr(sweep, "run_trial", flaky)
    with pytest.raises(SweepAborted):
        run_sweep(small_config(trials=20))


def test_improvement_ratios():
    res = run_sweep(small_config(metrics=("ood_mse",)))
    ratios = res.improvement_ratios("ood_mse")
    assert set(ratios) == {5, 10}
    for m, r in ratios.items():
        want = 1 - res.cell(m, "ood_mse", "ensemble").mean / res.cell(m, "ood_mse", "single_avg").mean
        assert r == want


def _ratio_with_stderr(res, m, metric):
    s = res.cell(m, metric, "single_avg")
    e = res.cell(m, metric, "ensemble")
    ratio = e.mean / s.mean
    se = ratio * np.hypot(e.stderr / e.mean, s.stderr / s.mean)
    return 1 - ratio, se


@pytest.mark.slow
def test_ensemble_never_hurts_identity_features():
    cfg = parse_config(CONFIGS / "sim1_linear.cfg").replace(
        activation="identity", metrics=("ood_excess", "ood_mse"), m_values=(40, 80, 160, 320)
    )
    res = run_sweep(cfg)
    for m in cfg.m_values:
        for metric in cfg.metrics:
            s, e = res.cell(m, metric, "single_avg"), res.cell(m, metric, "ensemble")
            assert e.mean <= s.mean + 2 * np.hypot(s.stderr, e.stderr)


@pytest.mark.slow
def test_improvement_ratio_trend_in_m():
    cfg = parse_config(CONFIGS / "sim1_linear.cfg").replace(m_values=(40, 80, 160, 320), metrics=("ood_mse",))
    res = run_sweep(cfg)
    vals = [_ratio_with_stderr(res, m, "ood_mse") for m in cfg.m_values]
    for (r1, s1), (r2, s2) in zip(vals, vals[1:]):
        assert r2 <= r1 + 2 * np.hypot(s1, s2)
