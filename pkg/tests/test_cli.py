import csv
import json

import numpy as np
import pytest

from attnmem import io
from attnmem.cli import dispatch
from attnmem.fixtures import make_toy_fixtures


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    return make_toy_fixtures(root, n_videos=4, T=3, seed=0), root


def run(*argv):
    return dispatch([str(a) for a in argv])


def test_metrics_on_toy_fixtures(toy, tmp_path):
    paths, _ = toy
    out = tmp_path / "metrics.json"
    code = run("metrics", "--attn", paths["attn"], "--fix", paths["fix"],
               "--out", out, "--scores", paths["scores"], "--seed", 7)
    assert code == 0
    result = json.loads(out.read_text())
    assert sorted(result["metrics"]) == ["auc_judd", "auc_percentile", "cc",
                                         "kld", "nss"]
    for rep in result["metrics"].values():
        assert set(rep) == {"mean", "sem", "n"}
    assert (tmp_path / "metrics.json.manifest.json").exists()
    manifest = json.loads((tmp_path / "metrics.json.manifest.json").read_text())
    assert manifest["subcommand"] == "metrics"
    assert len(manifest["inputs"]) == 3


def test_metrics_deterministic_bytes(toy, tmp_path):
    paths, _ = toy
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert run("metrics", "--attn", paths["attn"], "--fix", paths["fix"],
                   "--out", out, "--seed", 3) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_full_model_chain(toy, tmp_path):
    paths, _ = toy
    ckpt = tmp_path / "model.stma"
    assert run("train", "--features", paths["features_dir"], "--scores",
               paths["scores"], "--out", ckpt, "--log", tmp_path / "log.jsonl",
               "--T", 3, "--d", 16, "--heads", 2, "--epochs", 2, "--lr", "1e-3",
               "--seed", 1) == 0
    assert ckpt.exists() and (tmp_path / "log.jsonl").exists()
    lines = (tmp_path / "log.jsonl").read_text().strip().splitlines()
    assert len(lines) == 2 and "train_loss" in lines[0]

    preds = tmp_path / "preds.json"
    assert run("predict", "--ckpt", ckpt, "--features", paths["features_dir"],
               "--out", preds, "--scores", paths["scores"]) == 0
    result = json.loads(preds.read_text())
    assert len(result["predictions"]) == 4
    assert "spearman_rc" in result and "mse" in result

    attn_dir = tmp_path / "attn"
    assert run("attn", "--ckpt", ckpt, "--features", paths["features_dir"],
               "--out-dir", attn_dir) == 0
    maps = io.read_tensor(attn_dir / "v000.attn.stmt")
    assert maps.shape == (3, 224, 224)
    temporal = io.read_tensor(attn_dir / "v000.temporal.stmt")
    assert abs(temporal.sum() - 1.0) < 1e-5

    tprof = tmp_path / "temporal.json"
    assert run("temporal", "--attn", attn_dir, "--out", tprof) == 0
    prof = json.loads(tprof.read_text())["profile"]
    assert len(prof) == 3

    trev = tmp_path / "temporal_rev.json"
    assert run("temporal", "--ckpt", ckpt, "--features", paths["features_dir"],
               "--out", trev) == 0
    assert "reversed_profile" in json.loads(trev.read_text())

    nn_out = tmp_path / "nn.json"
    assert run("nn", "--train-reps", attn_dir, "--val-reps", attn_dir,
               "--scores", paths["scores"], "--out", nn_out, "--k", 2) == 0
    audit = json.loads(nn_out.read_text())
    assert audit["summary"]["n_val"] == 4
    assert audit["summary"]["flagged"] == 4  # val == train: self-match flags


def test_fixmap_then_metrics(toy, tmp_path):
    paths, _ = toy
    fix_dir = tmp_path / "fixmaps"
    assert run("fixmap", "--fixations", paths["fixations"], "--width", 320,
               "--height", 240, "--out-dir", fix_dir, "--pgm") == 0
    stack = io.read_tensor(fix_dir / "v000.fix.stmt")
    assert stack.shape == (3, 224, 224)
    assert (fix_dir / "v000.f0.pgm").exists()
    out = tmp_path / "m.json"
    assert run("metrics", "--attn", paths["attn"], "--fix", fix_dir,
               "--out", out, "--permutations", 0) == 0
    assert "auc_judd" in json.loads(out.read_text())["metrics"]


def test_select_and_sequence_cli(tmp_path):
    rng = np.random.default_rng(0)
    feat_dir = tmp_path / "feats"
    feat_dir.mkdir()
    scores = tmp_path / "scores.csv"
    with open(scores, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["video_id", "score", "split"])
        for i in range(400):
            vid = f"s{i:03d}"
            io.write_tensor(rng.normal(size=6), feat_dir / f"{vid}.stmt")
            writer.writerow([vid, f"{rng.random():.4f}", "val"])
    plan = tmp_path / "plan.json"
    assert run("select", "--features", feat_dir, "--scores", scores,
               "--out", plan, "--seed", 4) == 0
    obj = json.loads(plan.read_text())
    assert len(obj["chosen"]) == 140
    assert sorted(set(obj["category"].values())) == ["filler", "target", "vigilance"]

    seq = tmp_path / "seq.json"
    assert run("sequence", "--plan", plan, "--out", seq, "--seed", 9) == 0
    assert run("sequence", "--validate", seq) == 0

    # corrupt the sequence: repeat a filler
    obj = json.loads(seq.read_text())
    fillers = [s for s in obj["slots"] if obj["category"][s["video_id"]] == "filler"]
    obj["slots"][-1] = {"video_id": fillers[0]["video_id"], "is_repeat": True}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    assert run("sequence", "--validate", bad) == 1


def test_panoptic_cli(tmp_path):
    rng = np.random.default_rng(1)
    table = io.LabelTable([io.LabelEntry(1, "sky", False),
                           io.LabelEntry(2, "person", True)])
    table.to_json(tmp_path / "table.json")
    labs = np.zeros((4, 2, 16, 16), dtype=np.uint16)
    labs[..., 8:] = 2
    labs[..., :8] = 1
    io.write_tensor(labs, tmp_path / "labels.stmt")
    io.write_tensor(rng.random((4, 2, 224, 224)).astype(np.float32),
                    tmp_path / "attn.stmt")
    io.write_tensor(rng.random((4, 2, 224, 224)).astype(np.float32),
                    tmp_path / "gaze.stmt")
    with open(tmp_path / "scores.csv", "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["video_id", "score", "split"])
        for i in range(4):
            writer.writerow([f"v{i:03d}", f"{0.2 + 0.2 * i:.2f}", "val"])
    out_dir = tmp_path / "pan"
    assert run("panoptic", "--labels", tmp_path / "labels.stmt",
               "--attn", tmp_path / "attn.stmt", "--gaze", tmp_path / "gaze.stmt",
               "--table", tmp_path / "table.json",
               "--scores", tmp_path / "scores.csv",
               "--out-dir", out_dir, "--quantiles", 2) == 0
    result = json.loads((out_dir / "panoptic.json").read_text())
    assert result["labels"]["1"]["pixel_prob"] == pytest.approx(0.5, abs=1e-9)
    cum = result["stuff_things_cumulative"]
    assert cum["stuff"]["pixel"] + cum["things"]["pixel"] == pytest.approx(1.0)
    assert (out_dir / "label_stats.csv").exists()
    assert (out_dir / "quantile_freqs.csv").exists()


def test_exit_codes(toy, tmp_path, capsys):
    paths, _ = toy
    assert run("metrics", "--attn", "does-not-exist.stmt", "--fix", paths["fix"],
               "--out", tmp_path / "x.json") == 1
    err = capsys.readouterr().err
    assert err.startswith("error[")
    with pytest.raises(SystemExit) as exc:
        run("metrics", "--bogus")
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        run("not-a-command")


def test_truncated_tensor_reports_offset(toy, tmp_path, capsys):
    paths, _ = toy
    data = paths["attn"].read_bytes()
    bad = tmp_path / "trunc.stmt"
    bad.write_bytes(data[:-10])
    assert run("metrics", "--attn", bad, "--fix", paths["fix"],
               "--out", tmp_path / "x.json") == 1
    assert "TruncatedPayload" in capsys.readouterr().err


def test_train_predict_with_caption_tokens(toy, tmp_path):
    paths, _ = toy
    rng = np.random.default_rng(5)
    text_dir = tmp_path / "text"
    text_dir.mkdir()
    for vid in paths["video_ids"]:
        io.write_tensor(rng.normal(size=(4, 16)).astype(np.float32),
                        text_dir / f"{vid}.text.stmt")
    ckpt = tmp_path / "m.stma"
    assert run("train", "--features", paths["features_dir"], "--scores",
               paths["scores"], "--text", text_dir, "--out", ckpt,
               "--T", 3, "--d", 16, "--heads", 2, "--epochs", 1,
               "--lr", "1e-3", "--seed", 2) == 0
    cfg = json.loads((tmp_path / "m.stma.json").read_text())["model_config"]
    assert cfg["use_text"] is True and cfg["N_text"] == 4

    out = tmp_path / "p.json"
    assert run("predict", "--ckpt", ckpt, "--features", paths["features_dir"],
               "--text", text_dir, "--out", out) == 0
    assert len(json.loads(out.read_text())["predictions"]) == 4

    attn_dir = tmp_path / "a"
    assert run("attn", "--ckpt", ckpt, "--features", paths["features_dir"],
               "--text", text_dir, "--out-dir", attn_dir) == 0
    # alpha stays over visual tokens only: temporal still sums to 1
    temporal = io.read_tensor(attn_dir / "v000.temporal.stmt")
    assert abs(temporal.sum() - 1.0) < 1e-5
