import json
from pathlib import Path

import numpy as np

from ismlab.cli import main
from ismlab.config import build_oracle, gaussian_blob_template, load_json
from ismlab.ppm import read_ppm, write_ppm

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def tweak_config(tmp_path, name, **tweaks):
    cfg = load_json(CONFIGS / name)
    for key, value in tweaks.items():
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_gradcheck_exits_zero(tmp_path):
    cfg = tweak_config(tmp_path, "gradcheck.json",
                       **{"experiment.checks": ["gradient_forms", "decomposition"]})
    out = tmp_path / "out"
    assert main(["gradcheck", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["ok"] is True
    assert (out / "gradcheck.csv").exists()


def test_gradcheck_failure_exits_two(tmp_path, capsys):
    cfg = tweak_config(tmp_path, "gradcheck.json",
                       **{"experiment.checks": ["renderer_fd"],
                          "experiment.corrupt_renderer_scale": 1.01})
    out = tmp_path / "out"
    assert main(["gradcheck", "--config", str(cfg), "--out", str(out)]) == 2
    assert "renderer_fd" in capsys.readouterr().err


def test_config_error_exits_one(tmp_path, capsys):
    cfg = tweak_config(tmp_path, "gradcheck.json", **{"schedule.T": 1})
    assert main(["gradcheck", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err
    missing = tmp_path / "nope.json"
    assert main(["gradcheck", "--config", str(missing), "--out", str(tmp_path / "o")]) == 1


def test_eta_sweep_outputs(tmp_path):
    cfg = tweak_config(tmp_path, "eta_sweep.json",
                       **{"experiment.t_values": [200],
                          "experiment.delta_T_values": [50, 200]})
    out = tmp_path / "out"
    assert main(["eta-sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "eta_sweep.csv").exists()
    assert (out / "gradients.csv").exists()


def test_distill_kind_writes_metrics_and_frames(tmp_path):
    cfg = tweak_config(tmp_path, "distill_splats.json",
                       **{"distill.iterations": 30,
                          "distill.snapshot_every": 10,
                          "generator.n_splats": 6})
    out = tmp_path / "out"
    assert main(["distill", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "metrics.csv").exists()
    frames = sorted(p.name for p in (out / "frames").glob("*.ppm"))
    assert "final.ppm" in frames
    assert "iter_000010.ppm" in frames
    report = json.loads((out / "report.json").read_text())
    assert report["iterations"] == 30


def test_distill_identity_has_no_frames(tmp_path):
    cfg = tweak_config(tmp_path, "distill_identity.json",
                       **{"distill.iterations": 25})
    out = tmp_path / "out"
    assert main(["distill", "--config", str(cfg), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["metrics.csv", "report.json"]


def test_race_kind(tmp_path):
    cfg = tweak_config(tmp_path, "race.json",
                       **{"distill.iterations": 40, "experiment.seeds": [0, 1]})
    out = tmp_path / "out"
    assert main(["race", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "race.csv").exists()
    assert (out / "race_summary.csv").exists()


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for c in (1, 3):
        img = rng.uniform(0, 1, size=(5, 7, c))
        path = tmp_path / f"img{c}.ppm"
        write_ppm(path, img)
        back = read_ppm(path)
        assert back.shape == (5, 7, c)
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-9
    with open(tmp_path / "img1.ppm", "rb") as fh:
        assert fh.read(2) == b"P5"
    with open(tmp_path / "img3.ppm", "rb") as fh:
        assert fh.read(2) == b"P6"


def test_blob_template_oracle_from_config():
    cfg = load_json(CONFIGS / "distill_splats.json")
    oracle = build_oracle(cfg)
    assert oracle.dim == 256
    direct = gaussian_blob_template(16, 16, 1, (-0.45, 0.0), 0.35, 0.9)
    assert np.array_equal(oracle.means[0], direct)


def test_unknown_generator_kind_raises(tmp_path):
    cfg = tweak_config(tmp_path, "eta_sweep.json", **{"generator.kind": "mesh"})
    assert main(["eta-sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
