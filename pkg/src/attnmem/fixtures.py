"""Deterministic toy fixtures exercising the full pipeline end to end.

Builds synthetic fixation events, runs them through the density-map
pipeline, and pairs them with attention maps from a freshly initialized
model, so the metrics CLI has compatible inputs out of the box.
"""

import csv
from pathlib import Path

import numpy as np

from . import io
from .fixation import ScreenGeometry, build_density_map
from .model import ModelConfig, extract_attention, forward, init_params

FIXTURE_GEOMETRY = ScreenGeometry(
    distance_in=13.77, screen_h_in=23.5, screen_res_y=768
)


def make_toy_fixtures(out_dir, n_videos=4, T=3, seed=0):
    """Write toy attention/fixation stacks plus CSVs; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    width, height = 320, 240
    video_ids = [f"v{i:03d}" for i in range(n_videos)]
    cfg = ModelConfig(T=T, H=7, W=7, D=16, d=16, L=2, n_heads=2,
                      seed=seed, dtype="float32")
    params = init_params(cfg)

    # synthetic gaze: per video a drifting hotspot watched by 3 participants
    events = []
    for vid in video_ids:
        cx = rng.integers(60, width - 60)
        cy = rng.integers(50, height - 50)
        for frame in range(T):
            for pid in ("p1", "p2", "p3"):
                for _ in range(rng.integers(2, 5)):
                    x = int(np.clip(cx + frame * 6 + rng.normal(0, 12), 0, width - 1))
                    y = int(np.clip(cy + rng.normal(0, 12), 0, height - 1))
                    events.append((pid, vid, frame, x, y, float(rng.uniform(80, 400))))

    fixations_csv = out_dir / "fixations.csv"
    with open(fixations_csv, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(
            ["participant_id", "video_id", "frame_index", "x_px", "y_px", "duration_ms"]
        )
        writer.writerows(events)

    grouped = io.group_fixations(io.load_fixations(fixations_csv))
    fix_stack = np.zeros((n_videos, T, 224, 224), dtype=np.float32)
    for v, vid in enumerate(video_ids):
        for frame in range(T):
            smap = build_density_map(
                grouped[(vid, frame)], (width, height), FIXTURE_GEOMETRY
            )
            fix_stack[v, frame] = smap.grid.astype(np.float32)

    attn_stack = np.zeros_like(fix_stack)
    features_dir = out_dir / "features"
    features_dir.mkdir(exist_ok=True)
    for v, vid in enumerate(video_ids):
        features = rng.normal(size=(T, cfg.H, cfg.W, cfg.D)).astype(np.float32)
        io.write_tensor(features, features_dir / f"{vid}.stmt")
        _, cache = forward(params, cfg, features)
        result = extract_attention(cache, cfg)
        attn_stack[v] = result.frame_maps.astype(np.float32)

    attn_path = out_dir / "attn.stmt"
    fix_path = out_dir / "fix.stmt"
    io.write_tensor(attn_stack, attn_path)
    io.write_tensor(fix_stack, fix_path)

    scores_csv = out_dir / "scores.csv"
    with open(scores_csv, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["video_id", "score", "split"])
        for i, vid in enumerate(video_ids):
            split = "train" if i < (n_videos + 1) // 2 else "val"
            writer.writerow([vid, f"{rng.uniform(0.2, 0.9):.4f}", split])

    return {
        "attn": attn_path,
        "fix": fix_path,
        "scores": scores_csv,
        "fixations": fixations_csv,
        "features_dir": features_dir,
        "video_ids": video_ids,
        "config": cfg,
    }
