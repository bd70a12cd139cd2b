import json

import pytest
import torch
import yaml

from orsgg.cli import main
from orsgg.config import config_from_dict, load_config
from orsgg.training import load_checkpoint

TINY = {
    "dataset": {"n_scenarios": 3, "synth": {"total_timepoints": 12, "height": 32, "width": 32, "skew": 0.0}},
    "model": {
        "d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 32,
        "encoder": {"image_size": 32, "patch": 8, "d_enc": 16, "heads": 2, "n_image_tokens": 4, "pc_hidden": 16,
                    "audio_bands": 8, "audio_channels": 8, "mask_channels": 4},
    },
    "train": {"steps": 3, "batch_size": 4},
    "modalities": ["room_images", "detail_images", "pointcloud", "audio", "transcript", "robot_log", "tracker", "masks"],
    "ablation": {"grids": ["augmentation"]},
    "downstream": {"epochs": 5, "history": 2},
    "seeds": [0],
}


def _config(tmp_path, name="cfg.yaml", **over):
    data = json.loads(json.dumps(TINY))
    for k, v in over.items():
        data[k] = {**data.get(k, {}), **v} if isinstance(v, dict) else v
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else json.loads(err))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _config(root)
    assert main(["gen-data", "--config", cfg, "--out", str(root / "data")]) == 0
    return root, cfg


def test_train_evaluate_and_reports(dataset, capsys):
    root, cfg = dataset
    code, res = _run(["train", "--config", cfg, "--data", str(root / "data"), "--out", str(root / "run")], capsys)
    assert code == 0 and res["step"] == 3
    manifest = json.loads((root / "run" / "run_manifest.json").read_text())
    assert manifest[-1]["config_hash"] == load_config(cfg).hash()
    assert {"dataset_sha256", "checkpoint_sha256", "per_epoch", "wall_clock_s", "seed"} <= set(manifest[-1])
    assert (root / "run" / "loss.png").stat().st_size > 0
    code, res = _run(["evaluate", "--config", cfg, "--data", str(root / "data"),
                      "--checkpoint", str(root / "run" / "checkpoint.bin"), "--out", str(root / "ev")], capsys)
    assert code == 0 and 0.0 <= res["macro_f1"] <= 1.0
    rep = json.loads((root / "ev" / "report.json").read_text())
    assert rep["split"] == "test" and set(rep["frequency_groups"]) == {"head", "body", "tail"}
    assert (root / "ev" / "report.csv").read_text().startswith("predicate,")
    assert (root / "ev" / "report_f1.png").exists() and (root / "ev" / "predictions.jsonl").exists()


def test_train_is_deterministic(dataset, capsys):
    root, cfg = dataset
    for name in ("a", "b"):
        assert _run(["train", "--config", cfg, "--data", str(root / "data"), "--out", str(root / name)], capsys)[0] == 0
    assert (root / "a" / "checkpoint.bin").read_bytes() == (root / "b" / "checkpoint.bin").read_bytes()


def test_resume_after_crash_matches_straight_run(dataset, tmp_path, capsys, monkeypatch):
    import orsgg.cli as cli

    root, _ = dataset
    data = str(root / "data")
    cfg = _config(tmp_path, train={"steps": 4, "checkpoint_every": 2})
    real_train = cli.train

    def crashing(*a, **kw):
        def stop(step, loss):
            if step == 2:
                raise RuntimeError("simulated crash")
        return real_train(*a, on_step=stop, **kw)

    monkeypatch.setattr(cli, "train", crashing)
    code, err = _run(["train", "--config", cfg, "--data", data, "--out", str(tmp_path / "c")], capsys)
    assert code == 1 and "simulated crash" in err["message"]
    monkeypatch.setattr(cli, "train", real_train)
    assert load_checkpoint(tmp_path / "c" / "checkpoint.bin")[0].step == 2
    code, res = _run(["train", "--config", cfg, "--data", data, "--out", str(tmp_path / "r"),
                      "--resume", str(tmp_path / "c" / "checkpoint.bin")], capsys)
    assert code == 0 and res["step"] == 4
    assert _run(["train", "--config", cfg, "--data", data, "--out", str(tmp_path / "f")], capsys)[0] == 0
    a, _ = load_checkpoint(tmp_path / "r" / "checkpoint.bin")
    b, _ = load_checkpoint(tmp_path / "f" / "checkpoint.bin")
    for pa, pb in zip(a.model.parameters(), b.model.parameters()):
        assert torch.allclose(pa, pb, atol=1e-6)


def test_breach_downstream_vpq_ablate(dataset, tmp_path, capsys):
    root, cfg = dataset
    data = str(root / "data")
    code, res = _run(["breach-scan", "--config", cfg, "--data", data, "--out", str(tmp_path / "b")], capsys)
    assert code == 0 and res["f1"] == 1.0  # ground-truth graphs reproduce the labels
    code, _ = _run(["downstream-train", "--config", cfg, "--data", data, "--task", "next_action", "--out", str(tmp_path / "d")], capsys)
    assert code == 0
    code, res = _run(["downstream-eval", "--config", cfg, "--data", data, "--out", str(tmp_path / "d"),
                      "--classifier", str(tmp_path / "d" / "classifier_next_action.bin")], capsys)
    assert code == 0 and res["task"] == "next_action"
    assert (tmp_path / "d" / "downstream_next_action_f1.png").exists()
    code, res = _run(["vpq", "--config", cfg, "--data", data, "--pred", data, "--k", "0,2", "--out", str(tmp_path / "v")], capsys)
    assert code == 0 and res == {"0": 1.0, "2": 1.0}
    code, res = _run(["ablate", "--config", cfg, "--data", data, "--out", str(tmp_path / "a")], capsys)
    assert code == 0 and set(res["augmentation"]) == {"none", "drop", "drop+mix"}
    rows = json.loads((tmp_path / "a" / "ablation_augmentation.json").read_text())
    assert rows["protocol"] == "missing" and all(r["n_seeds"] == 1 for r in rows["rows"])
    assert (tmp_path / "a" / "ablation_augmentation.png").exists()


def test_errors_are_json(dataset, tmp_path, capsys):
    root, cfg = dataset
    code, err = _run(["train", "--config", cfg, "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "x")], capsys)
    assert code == 1 and err["command"] == "train" and err["message"]
    code, err = _run(["evaluate", "--config", cfg, "--data", str(root / "data"), "--split", "bogus",
                      "--checkpoint", str(tmp_path / "nope.bin"), "--out", str(tmp_path / "y")], capsys)
    assert code == 1 and err["command"] == "evaluate"
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: {depth: 3}\n")
    code, err = _run(["gen-data", "--config", str(bad), "--out", str(tmp_path / "z")], capsys)
    assert code == 1 and "depth" in err["message"]


def test_config_hash_round_trip(tmp_path):
    cfg = load_config(_config(tmp_path))
    assert config_from_dict(cfg.to_json()).hash() == cfg.hash()
    assert cfg.with_seed(3).hash() != cfg.hash()
    with pytest.raises(ValueError):
        config_from_dict({"modalities": ["audio"]})
    with pytest.raises(ValueError):
        config_from_dict({"colour": 1})
