import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ismlab.config import load_json
from ismlab.errors import ConfigError
from ismlab.experiments import (
    CONSISTENCY_CSV_HEADER,
    ETA_CSV_HEADER,
    GRADCHECK_CSV_HEADER,
    INTERVAL_CSV_HEADER,
    QUALITY_CSV_HEADER,
    RACE_CSV_HEADER,
    RACE_SUMMARY_CSV_HEADER,
    build_experiment,
    run_consistency,
    run_eta_sweep,
    run_gradcheck,
    run_interval_sweep,
    run_quality,
    run_race,
    write_report,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load_spec(name, kind, **tweaks):
    cfg = load_json(CONFIGS / name)
    for key, value in tweaks.items():
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return build_experiment(cfg, kind)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_consistency_deterministic_branch_has_zero_spread(tmp_path):
    spec = load_spec("consistency.json", "consistency",
                     **{"experiment.noise_draws": 6,
                        "experiment.t_values": [300, 700]})
    report = run_consistency(spec)
    assert report.ism_noise_variance == [0.0, 0.0]
    assert all(v > 0 for v in report.sds_noise_variance)
    write_report(report, tmp_path)
    rows = read_csv(tmp_path / "consistency.csv")
    assert tuple(rows[0]) == CONSISTENCY_CSV_HEADER
    assert len(rows) == 3
    assert json.loads((tmp_path / "report.json").read_text())["kind"] == "consistency"


def test_consistency_single_component_variance_matches_closed_form(schedule):
    # mean-started single component: the one-step clean target is
    # mu + gamma(t) * (ab sigma^2 / v) * noise, so its spread has a closed form
    spec = load_spec("consistency.json", "consistency",
                     **{"experiment.noise_draws": 4096,
                        "experiment.t_values": [400],
                        "oracle.components": [
                            {"weight": 1.0, "mean": [0.4, -0.2], "sigma": 0.5}],
                        "oracle.labels": {"m": [0]},
                        "guidance.positive": "m",
                        "guidance.scale": 1.0,
                        "generator.theta": [0.4, -0.2]})
    report = run_consistency(spec)
    t = 400
    ab = spec.schedule.alpha_bar[t]
    v = ab * 0.25 + (1 - ab)
    gamma = spec.schedule.noise_to_signal(t)
    expected = 2 * (gamma * ab * 0.25 / v) ** 2
    rel_sd = np.sqrt(2.0 / (2 * 4096))
    assert report.sds_noise_variance[0] == pytest.approx(expected, rel=5 * rel_sd)


def test_consistency_rejects_single_draw():
    spec = load_spec("consistency.json", "consistency",
                     **{"experiment.noise_draws": 1})
    with pytest.raises(ConfigError):
        run_consistency(spec)


def test_quality_low_noise_estimates_agree(tmp_path):
    spec = load_spec("quality.json", "quality",
                     **{"experiment.t_values": [50, 900],
                        "experiment.start_points": 6})
    report = run_quality(spec)
    assert [r[0] for r in report.rows] == [50, 900]
    t50, t900 = report.rows
    assert t50[1] == pytest.approx(t50[2], abs=0.05)   # near-exact at low noise
    assert t900[2] < t900[1]                           # multi-step wins at high noise
    write_report(report, tmp_path)
    rows = read_csv(tmp_path / "quality.csv")
    assert tuple(rows[0]) == QUALITY_CSV_HEADER


def test_quality_single_component_near_exact():
    spec = load_spec("quality.json", "quality",
                     **{"experiment.t_values": [100, 500, 900],
                        "experiment.start_points": 5,
                        "oracle.components": [
                            {"weight": 1.0, "mean": [0.5, 0.5], "sigma": 0.0001}],
                        "oracle.labels": {"m": [0]},
                        "guidance.positive": "m"})
    report = run_quality(spec)
    for row in report.rows:
        assert row[1] < 1e-3 and row[2] < 1e-3


def test_eta_sweep_identities_and_costs(tmp_path):
    spec = load_spec("eta_sweep.json", "eta-sweep",
                     **{"experiment.t_values": [100, 400],
                        "experiment.delta_T_values": [25, 100]})
    report = run_eta_sweep(spec)
    by_key = {(r[0], r[1]): r for r in report.rows}
    # full-span interval rows have no telescoping bias
    assert by_key[(100, 100)][2] < 1e-12
    for row in report.rows:
        assert row[5] < 1e-9                 # decomposition residual
        if row[7] is not None:
            assert row[7] < row[6]           # interval cheaper than multi-step
    write_report(report, tmp_path)
    rows = read_csv(tmp_path / "eta_sweep.csv")
    assert tuple(rows[0]) == ETA_CSV_HEADER
    grads = read_csv(tmp_path / "gradients.csv")
    assert grads[0] == ["t", "s", "grad_norm", "oracle_calls", "objective"]
    assert {r[4] for r in grads[1:]} <= {"naive", "ism"}


def test_interval_sweep_costs_and_determinism(tmp_path):
    spec = load_spec("interval_sweep.json", "interval-sweep",
                     **{"distill.iterations": 40,
                        "experiment.delta_T_values": [50],
                        "experiment.delta_S_values": [50, 200]})
    report = run_interval_sweep(spec)
    again = run_interval_sweep(spec)
    assert [r[:4] for r in report.rows] == [r[:4] for r in again.rows]
    by_ds = {r[1]: r for r in report.rows}
    assert by_ds[200][3] < by_ds[50][3]      # larger stride, fewer evaluations
    write_report(report, tmp_path)
    rows = read_csv(tmp_path / "interval_sweep.csv")
    assert tuple(rows[0]) == INTERVAL_CSV_HEADER


def test_race_self_consistency(tmp_path):
    spec = load_spec("race.json", "race",
                     **{"distill.iterations": 60,
                        "experiment.seeds": [0, 1],
                        "experiment.threshold": 10.0})
    report = run_race(spec)
    # threshold above the starting distance crosses at iteration zero
    assert all(c == 0 for c in report.crossings.values())
    write_report(report, tmp_path)
    race_rows = read_csv(tmp_path / "race.csv")
    assert tuple(race_rows[0]) == RACE_CSV_HEADER
    summary = read_csv(tmp_path / "race_summary.csv")
    assert tuple(summary[0]) == RACE_SUMMARY_CSV_HEADER
    assert len(summary) == 3


def test_race_matched_streams(schedule):
    spec = load_spec("race.json", "race", **{"distill.iterations": 50,
                                             "experiment.seeds": [3, 4]})
    report = run_race(spec)
    ism = report.curves[(3, "ism")]
    sds = report.curves[(3, "sds")]
    assert len(ism) == len(sds) == 51
    assert ism[0] == sds[0] == 1.0


def test_race_needs_two_seeds():
    spec = load_spec("race.json", "race", **{"experiment.seeds": [3]})
    with pytest.raises(ConfigError):
        run_race(spec)


def test_gradcheck_default_passes(tmp_path):
    spec = load_spec("gradcheck.json", "gradcheck")
    report = run_gradcheck(spec)
    assert report.ok
    assert {r.check for r in report.rows} == {
        "score_fd", "renderer_fd", "gradient_forms", "decomposition"}
    write_report(report, tmp_path)
    rows = read_csv(tmp_path / "gradcheck.csv")
    assert tuple(rows[0]) == GRADCHECK_CSV_HEADER


def test_gradcheck_detects_corruption():
    spec = load_spec("gradcheck.json", "gradcheck",
                     **{"experiment.checks": ["renderer_fd"],
                        "experiment.corrupt_renderer_scale": 1.01})
    report = run_gradcheck(spec)
    assert not report.ok


def test_gradcheck_empty_check_list(tmp_path):
    spec = load_spec("gradcheck.json", "gradcheck",
                     **{"experiment.checks": []})
    report = run_gradcheck(spec)
    assert report.rows == [] and report.ok
    write_report(report, tmp_path)
    assert len(read_csv(tmp_path / "gradcheck.csv")) == 1


def test_splat_consistency_writes_image_grids(tmp_path):
    spec = load_spec("distill_splats.json", "consistency",
                     **{"experiment.noise_draws": 3,
                        "experiment.t_values": [200, 500],
                        "experiment.delta_S_values": [100]})
    report = run_consistency(spec)
    assert set(report.frames) == {"sds_pseudo_gt_grid", "ism_pseudo_gt_grid", "input_view"}
    write_report(report, tmp_path)
    grids = sorted(p.name for p in (tmp_path / "frames").glob("*.ppm"))
    assert grids == ["input_view.ppm", "ism_pseudo_gt_grid.ppm", "sds_pseudo_gt_grid.ppm"]
