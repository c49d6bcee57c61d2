"""Command-line interface wiring the pipeline together.

Every run first writes a manifest JSON (command, arguments, seeds, input
digests) next to its outputs, so failed runs stay diagnosable. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, io, kernels, metrics, study
from .errors import AttnMemError
from .fixation import ScreenGeometry, build_density_map
from .model import (
    ModelConfig,
    TrainSettings,
    VideoExample,
    extract_attention,
    forward,
    init_params,
    load_checkpoint,
    predict,
    sample_segments,
    save_checkpoint,
    train,
)


# --- shared plumbing ---------------------------------------------------------

def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for block in iter(lambda: fp.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _digest(path):
    path = Path(path)
    if path.is_dir():
        parts = hashlib.sha256()
        for child in sorted(path.rglob("*")):
            if child.is_file():
                parts.update(str(child.relative_to(path)).encode())
                parts.update(_sha256(child).encode())
        return "dir:" + parts.hexdigest()
    return _sha256(path)


def _write_manifest(dest, args, inputs):
    """Record the run configuration before any computation starts."""
    manifest = {
        "subcommand": args.cmd,
        "arguments": {
            k: v if isinstance(v, (int, float, bool, type(None))) else str(v)
            for k, v in sorted(vars(args).items()) if k not in ("func",)
        },
        "kernel_backend": kernels.BACKEND,
        "inputs": {str(p): _digest(p) for p in inputs if p and Path(p).exists()},
    }
    dest = Path(dest)
    if dest.suffix:  # output file: manifest goes next to it
        path = dest.with_name(dest.name + ".manifest.json")
        dest.parent.mkdir(parents=True, exist_ok=True)
    else:
        dest.mkdir(parents=True, exist_ok=True)
        path = dest / "manifest.json"
    io.dump_json(manifest, path)


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("ATTNMEM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _video_id_of(path):
    return Path(path).name.split(".")[0]


def _load_stack(path, min_ndim=3, role=None):
    """Read per-video tensors from a directory or a stacked tensor file.

    Directories hold one <video_id>[.role].stmt per video; `role` picks a
    specific kind when several coexist (falling back to all .stmt files).
    A single file is one video (ndim == min_ndim) or a stack with
    synthetic ids v000...
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.stmt"))
        if role:
            matching = [f for f in files if f.name.endswith(f".{role}.stmt")]
            files = matching or files
        out = {}
        for child in files:
            out[_video_id_of(child)] = io.read_tensor(child)
        if not out:
            raise AttnMemError(f"no .stmt files in {path}")
        return out
    tensor = io.read_tensor(path)
    if tensor.ndim == min_ndim:
        return {"v000": tensor}
    if tensor.ndim == min_ndim + 1:
        return {f"v{i:03d}": tensor[i] for i in range(tensor.shape[0])}
    raise AttnMemError(
        f"{path}: expected ndim {min_ndim} or {min_ndim + 1}, got {tensor.ndim}"
    )


def _load_features(args):
    feats = _load_stack(args.features, min_ndim=4)
    first = next(iter(feats.values()))
    return feats, first.shape[1:]


def _scores_by_id(path):
    return {r.video_id: r.score for r in io.load_scores(path)}


def _load_text(args):
    """Optional caption-token embeddings: <video_id>.text.stmt, (N, d)."""
    if not getattr(args, "text", None):
        return {}
    return _load_stack(args.text, min_ndim=2, role="text")


# --- model subcommands ----------------------------------------------------------

def cmd_train(args):
    records = io.load_scores(args.scores)
    feats, (h, w, d_feat) = _load_features(args)
    text = _load_text(args)
    config = ModelConfig(
        T=args.T, H=h, W=w, D=d_feat, d=args.d, L=args.layers,
        n_heads=args.heads, temporal_embedding=args.temporal,
        spatial_embedding=args.spatial, seed=args.seed, dtype=args.dtype,
        use_text=bool(text),
        N_text=max((t.shape[0] for t in text.values()), default=0),
    )
    _write_manifest(Path(args.out), args, [args.features, args.scores, args.text])

    dataset = []
    for rec in records:
        if rec.video_id not in feats:
            raise AttnMemError(f"no features for video {rec.video_id}")
        dataset.append(
            VideoExample(rec.video_id, feats[rec.video_id], rec.score, rec.split,
                         text_tokens=text.get(rec.video_id))
        )
    settings = TrainSettings(
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
        scheduler_step=args.scheduler_step, scheduler_gamma=args.scheduler_gamma,
        sampler=args.sampler, seed=args.seed, stop_rc=args.stop_rc,
    )
    params = init_params(config)
    log = train(params, config, dataset, settings)
    save_checkpoint(log.best_params or params, config, args.out)
    if args.log:
        with open(args.log, "w") as fp:
            for entry in log.entries:
                fp.write(io.canonical_json(entry))
    last = log.entries[-1]
    print(f"trained {len(log.entries)} epochs, final train loss "
          f"{last['train_loss']:.6f}, train RC {last['train_rc']}, "
          f"val RC {last['val_rc']}")
    return 0


def cmd_predict(args):
    params, config = load_checkpoint(args.ckpt)
    feats, _ = _load_features(args)
    text = _load_text(args)
    _write_manifest(Path(args.out), args, [args.ckpt, args.features, args.text])
    preds = {vid: predict(params, config, feats[vid], text.get(vid))
             for vid in sorted(feats)}
    result = {"predictions": preds}
    if args.scores:
        truth = _scores_by_id(args.scores)
        shared = sorted(set(preds) & set(truth))
        if len(shared) >= 2:
            result["spearman_rc"] = metrics.spearman_rc(
                [preds[v] for v in shared], [truth[v] for v in shared]
            )
            result["mse"] = metrics.mse(
                [preds[v] for v in shared], [truth[v] for v in shared]
            )
    io.dump_json(result, args.out)
    print(f"wrote {args.out} ({len(preds)} videos)")
    return 0


def cmd_attn(args):
    params, config = load_checkpoint(args.ckpt)
    feats, _ = _load_features(args)
    text = _load_text(args)
    out_dir = Path(args.out_dir)
    _write_manifest(out_dir, args, [args.ckpt, args.features, args.text])
    for vid in sorted(feats):
        video = feats[vid]
        if video.shape[0] != config.T:
            video = video[sample_segments(video.shape[0], config.T,
                                          "middle_of_segment")]
        _, cache = forward(params, config, video, text.get(vid))
        result = extract_attention(cache, config)
        io.write_tensor(result.frame_maps.astype(np.float32),
                        out_dir / f"{vid}.attn.stmt")
        io.write_tensor(result.temporal, out_dir / f"{vid}.temporal.stmt")
        io.write_tensor(np.asarray(cache["h_cls"], dtype=np.float64),
                        out_dir / f"{vid}.rep.stmt")
    print(f"wrote attention maps for {len(feats)} videos to {out_dir}")
    return 0


# --- fixation maps ----------------------------------------------------------------

def cmd_fixmap(args):
    geom = ScreenGeometry(args.distance_in, args.screen_h_in,
                          args.screen_res_y, args.visual_angle)
    out_dir = Path(args.out_dir)
    _write_manifest(out_dir, args, [args.fixations])
    grouped = io.group_fixations(io.load_fixations(args.fixations))
    by_video = {}
    for (vid, frame), participants in grouped.items():
        by_video.setdefault(vid, {})[frame] = participants
    for vid in sorted(by_video):
        frames = sorted(by_video[vid])
        stack = np.zeros((len(frames), 224, 224), dtype=np.float32)
        for row, frame in enumerate(frames):
            smap = build_density_map(
                by_video[vid][frame], (args.width, args.height), geom,
                duration_weighted=args.duration_weighted,
            )
            stack[row] = smap.grid.astype(np.float32)
            if args.pgm:
                io.write_pgm(smap.grid, out_dir / f"{vid}.f{frame}.pgm")
        io.write_tensor(stack, out_dir / f"{vid}.fix.stmt")
        io.dump_json({"frames": frames}, out_dir / f"{vid}.frames.json")
    print(f"wrote fixation maps for {len(by_video)} videos to {out_dir}")
    return 0


# --- metrics ------------------------------------------------------------------------

def cmd_metrics(args):
    _write_manifest(Path(args.out), args,
                    [args.attn, args.fix, args.scores])
    attn = _load_stack(args.attn, role="attn")
    fix = _load_stack(args.fix, role="fix")
    permutation = None
    if args.permutations > 0:
        permutation = metrics.PermutationConfig(
            {}, args.permutations, args.seed, args.index_matched
        )
    reports, skipped = metrics.saliency_suite(
        attn, fix, permutation=permutation, threads=_threads(args),
        sem_over=args.sem_over,
    )
    result = {
        "metrics": {name: rep.to_json_obj() for name, rep in reports.items()},
        "per_video": {
            vid: {name: rep.per_video[vid]
                  for name, rep in reports.items() if vid in rep.per_video}
            for vid in sorted(set().union(*(r.per_video for r in reports.values())))
        },
        "skipped": skipped,
    }
    if args.scores:
        records = io.load_scores(args.scores)
        result["bins"] = {
            name: metrics.bin_by_memorability(rep, records, args.bins)
            for name, rep in reports.items()
            if all(v in {r.video_id for r in records} for v in rep.per_video)
        }
    io.dump_json(result, args.out)
    print(f"wrote {args.out} ({', '.join(sorted(reports))})")
    return 0


def cmd_auc_percentile(args):
    _write_manifest(Path(args.out), args, [args.attn, args.fix])
    attn = _load_stack(args.attn, role="attn")
    fix = _load_stack(args.fix, role="fix")
    report, skipped = metrics.auc_percentile_suite(
        attn, fix, n_permutations=args.permutations, rng_seed=args.seed,
        index_matched=args.index_matched,
    )
    io.dump_json(
        {"auc_percentile": report.to_json_obj(),
         "per_video": report.per_video, "skipped_videos": skipped},
        args.out,
    )
    print(f"wrote {args.out} (mean percentile {report.mean:.2f})")
    return 0


# --- panoptic analysis ----------------------------------------------------------------

def cmd_panoptic(args):
    out_dir = Path(args.out_dir)
    _write_manifest(out_dir, args,
                    [args.labels, args.attn, args.gaze, args.table, args.scores])
    table = io.LabelTable.from_json(args.table)
    labels = _load_stack(args.labels, role="labels")
    attn = _load_stack(args.attn, role="attn")
    gaze = _load_stack(args.gaze, role="fix")
    records = io.load_scores(args.scores)
    vids = sorted(set(labels) & set(attn) & set(gaze))
    if not vids:
        raise AttnMemError("no videos shared between labels, attention and gaze")

    from .fixation import minmax_normalize

    label_frames, attn_frames, gaze_frames = [], [], []
    label_frames_by_video = {}
    for vid in vids:
        frames = [np.asarray(f) for f in labels[vid]]
        label_frames_by_video[vid] = frames
        for lab, a, g in zip(frames, attn[vid], gaze[vid]):
            label_frames.append(lab)
            attn_frames.append(minmax_normalize(a))
            gaze_frames.append(minmax_normalize(g))

    dist = analysis.weighted_label_distribution(
        label_frames, attn_frames, gaze_frames, table
    )
    groups = analysis.assign_groups(dist)
    presence = analysis.label_presence(label_frames_by_video, table)
    group_scores = {
        "attn": analysis.group_memorability_distributions(
            groups.attn, presence, records, table),
        "gaze": analysis.group_memorability_distributions(
            groups.gaze, presence, records, table),
    }
    freqs = analysis.quantile_label_frequencies(presence, records, args.quantiles)
    cumulative = analysis.stuff_things_cumulative(dist, table)

    result = {
        "labels": {
            str(lid): {
                "name": table.name(lid),
                "is_thing": table.is_thing(lid),
                "pixel_prob": dist.pixel_prob[lid],
                "attn_prob": dist.attn_prob[lid],
                "gaze_prob": dist.gaze_prob[lid],
                "attn_ratio": dist.attn_ratio.get(lid),
                "gaze_ratio": dist.gaze_ratio.get(lid),
                "attn_group": groups.attn[lid],
                "gaze_group": groups.gaze[lid],
            }
            for lid in table.ids()
        },
        "stuff_things_cumulative": cumulative,
        "group_memorability": group_scores,
        "quantile_frequencies": {str(k): v for k, v in freqs.items()},
    }
    io.dump_json(result, out_dir / "panoptic.json")

    import csv as _csv

    with open(out_dir / "label_stats.csv", "w", newline="") as fp:
        writer = _csv.writer(fp)
        writer.writerow(["label_id", "name", "is_thing", "pixel_prob",
                         "attn_prob", "gaze_prob", "attn_ratio", "gaze_ratio",
                         "attn_group", "gaze_group"])
        for lid in table.ids():
            row = result["labels"][str(lid)]
            writer.writerow([lid, row["name"], int(row["is_thing"]),
                             f"{row['pixel_prob']:.9g}", f"{row['attn_prob']:.9g}",
                             f"{row['gaze_prob']:.9g}",
                             "" if row["attn_ratio"] is None else f"{row['attn_ratio']:.9g}",
                             "" if row["gaze_ratio"] is None else f"{row['gaze_ratio']:.9g}",
                             row["attn_group"], row["gaze_group"]])
    with open(out_dir / "quantile_freqs.csv", "w", newline="") as fp:
        writer = _csv.writer(fp)
        writer.writerow(["label_id", "name", "is_thing"]
                        + [f"q{i}" for i in range(args.quantiles)])
        for lid in sorted(freqs):
            writer.writerow([lid, table.name(lid), int(table.is_thing(lid))]
                            + [f"{v:.9g}" for v in freqs[lid]])
    with open(out_dir / "group_scores.csv", "w", newline="") as fp:
        writer = _csv.writer(fp)
        writer.writerow(["channel", "category", "group", "score"])
        for channel in ("attn", "gaze"):
            for category in ("stuff", "things"):
                dists = group_scores[channel][category]["distributions"]
                for group in ("G1", "G2", "G3"):
                    for score in dists[group]:
                        writer.writerow([channel, category, group, f"{score:.9g}"])
    print(f"wrote panoptic analysis for {len(vids)} videos to {out_dir}")
    return 0


# --- temporal attention ------------------------------------------------------------------

def cmd_temporal(args):
    out = Path(args.out)
    inputs = [p for p in (args.attn, args.ckpt, args.features) if p]
    _write_manifest(out, args, inputs)
    result = {}
    if args.ckpt:
        params, config = load_checkpoint(args.ckpt)
        feats, _ = _load_features(args)
        ordered = [feats[v] for v in sorted(feats)]
        normal, rev = analysis.reversal_control(params, config, ordered)
        result["profile"] = analysis.temporal_profile(normal)
        result["reversed_profile"] = analysis.temporal_profile(rev)
        result["per_video"] = {
            vid: normal[i].tolist() for i, vid in enumerate(sorted(feats))
        }
    else:
        vectors = _load_stack(args.attn, min_ndim=1, role="temporal")
        temporals = {v: np.asarray(vectors[v], dtype=np.float64)
                     for v in sorted(vectors)}
        result["profile"] = analysis.temporal_profile(list(temporals.values()))
        result["per_video"] = {v: t.tolist() for v, t in temporals.items()}
    io.dump_json(result, out)
    if args.csv:
        import csv as _csv

        with open(args.csv, "w", newline="") as fp:
            writer = _csv.writer(fp)
            reversed_prof = result.get("reversed_profile")
            header = ["frame", "mean", "sem"]
            if reversed_prof:
                header += ["reversed_mean", "reversed_sem"]
            writer.writerow(header)
            for i, row in enumerate(result["profile"]):
                line = [row["frame"], f"{row['mean']:.9g}", f"{row['sem']:.9g}"]
                if reversed_prof:
                    line += [f"{reversed_prof[i]['mean']:.9g}",
                             f"{reversed_prof[i]['sem']:.9g}"]
                writer.writerow(line)
    print(f"wrote {out}")
    return 0


# --- nearest neighbors ---------------------------------------------------------------------

def cmd_nn(args):
    _write_manifest(Path(args.out), args,
                    [args.train_reps, args.val_reps, args.scores])
    train_reps = _load_stack(args.train_reps, min_ndim=1, role="rep")
    val_reps = _load_stack(args.val_reps, min_ndim=1, role="rep")
    records = io.load_scores(args.scores)
    rows, summary = analysis.nn_audit(
        train_reps, val_reps, records, k=args.k, leak_threshold=args.threshold
    )
    io.dump_json(
        {"summary": summary, "rows": [vars(r) for r in rows]}, args.out
    )
    print(f"wrote {args.out} (flagged {summary['flagged']}/{summary['n_val']})")
    return 0


# --- study tooling -----------------------------------------------------------------------

def cmd_select(args):
    _write_manifest(Path(args.out), args, [args.features, args.scores])
    raw = _load_stack(args.features, min_ndim=1)
    feats = {}
    for vid, arr in raw.items():
        arr = np.asarray(arr, dtype=np.float64)
        feats[vid] = arr if arr.ndim == 1 else arr.reshape(-1, arr.shape[-1]).mean(0)
    records = io.load_scores(args.scores)
    plan = study.select_videos(
        feats, records, k=args.clusters, n_bins=args.bins, target=args.target,
        seed=args.seed, binning="quantile" if args.quantile_bins else "width",
    )
    if not args.no_refine:
        plan = study.refine_and_categorize(plan, args.seed)
    io.dump_json(plan.to_json_obj(), args.out)
    print(f"wrote {args.out} ({len(plan.chosen)} videos)")
    return 0


def cmd_sequence(args):
    if args.validate:
        with open(args.validate) as fp:
            seq = study.PresentationSequence.from_json_obj(json.load(fp))
        violations = study.validate_sequence(seq)
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        print(f"{len(violations)} violations in {args.validate}")
        return 1 if violations else 0
    if not (args.plan and args.out):
        raise AttnMemError("--plan and --out required unless --validate is given")
    _write_manifest(Path(args.out), args, [args.plan])
    with open(args.plan) as fp:
        plan = study.SelectionPlan.from_json_obj(json.load(fp))
    seq = study.generate_sequence(plan, args.seed)
    io.dump_json(seq.to_json_obj(), args.out)
    print(f"wrote {args.out} ({len(seq.slots)} slots)")
    return 0


def cmd_verify(args):
    from .verify import run_all

    results = run_all()
    if args.out_dir:
        out_dir = Path(args.out_dir)
        _write_manifest(out_dir, args, [])
        io.dump_json({"results": results}, out_dir / "verify.json")
    failed = [r["criterion"] for r in results if not r["passed"]]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


# --- parser ---------------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="attnmem",
        description="Video memorability attention pipeline",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for analysis (env ATTNMEM_THREADS)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="fit the memorability predictor")
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--text", help="dir of <video_id>.text.stmt caption embeddings")
    p.add_argument("--T", type=int, default=5)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--temporal", choices=("fourier", "learnable"), default="fourier")
    p.add_argument("--spatial", choices=("none", "learned_1d", "learned_2d"),
                   default="none")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--scheduler-step", type=int, default=None)
    p.add_argument("--scheduler-gamma", type=float, default=0.5)
    p.add_argument("--sampler", choices=("random_in_segment", "middle_of_segment"),
                   default="random_in_segment")
    p.add_argument("--stop-rc", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score videos with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scores")
    p.add_argument("--text")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("attn", help="extract attention maps and CLS reps")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--text")
    p.set_defaults(func=cmd_attn)

    p = sub.add_parser("fixmap", help="build fixation density maps")
    p.add_argument("--fixations", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--distance-in", type=float, default=13.77)
    p.add_argument("--screen-h-in", type=float, default=23.5)
    p.add_argument("--screen-res-y", type=int, default=768)
    p.add_argument("--visual-angle", type=float, default=1.0)
    p.add_argument("--duration-weighted", action="store_true")
    p.add_argument("--pgm", action="store_true")
    p.set_defaults(func=cmd_fixmap)

    p = sub.add_parser("metrics", help="saliency metric suite")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--attn", required=True)
    p.add_argument("--fix", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scores")
    p.add_argument("--bins", type=int, default=4)
    p.add_argument("--permutations", type=int, default=100)
    p.add_argument("--index-matched", action="store_true")
    p.add_argument("--sem-over", choices=("videos", "frames"), default="videos")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("auc-percentile", help="permutation-test percentile")
    p.add_argument("--attn", required=True)
    p.add_argument("--fix", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--permutations", type=int, default=100)
    p.add_argument("--index-matched", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_auc_percentile)

    p = sub.add_parser("panoptic", help="stuff/things attention analysis")
    p.add_argument("--labels", required=True)
    p.add_argument("--attn", required=True)
    p.add_argument("--gaze", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--quantiles", type=int, default=4)
    p.set_defaults(func=cmd_panoptic)

    p = sub.add_parser("temporal", help="temporal attention profile")
    p.add_argument("--attn", help="temporal vectors (dir or stack)")
    p.add_argument("--ckpt", help="with --features: compute + reversal control")
    p.add_argument("--features")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write the profile as CSV")
    p.set_defaults(func=cmd_temporal)

    p = sub.add_parser("nn", help="nearest-neighbor leakage audit")
    p.add_argument("--train-reps", required=True)
    p.add_argument("--val-reps", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.97)
    p.set_defaults(func=cmd_nn)

    p = sub.add_parser("select", help="cluster+bin video selection")
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=28)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--target", type=int, default=200)
    p.add_argument("--quantile-bins", action="store_true")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("sequence", help="generate or validate a presentation order")
    p.add_argument("--plan")
    p.add_argument("--out")
    p.add_argument("--validate")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("verify", help="run the oracle/invariant suite")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_verify)
    return parser


def dispatch(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd == "temporal" and not (args.attn or (args.ckpt and args.features)):
        parser.error("temporal needs --attn or both --ckpt and --features")
    try:
        return args.func(args)
    except (AttnMemError, ValueError, OSError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
