"""Attention-weighted panoptic statistics, temporal profiles, NN leakage audit."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimMismatch,
    EmptyMap,
    LabelAbsent,
    MixedT,
    RasterMismatch,
    UnknownLabelId,
)
from .metrics import ks_two_sample, quantile_bins
from .model import extract_attention, forward

RASTER = 224
GROUP_UP = 1.5          # ratio above which attention is "increased"
GROUP_FLAT = (0.8, 1.2)  # band where attention is "unchanged"
GROUP_DOWN = 0.5        # ratio below which attention is "decreased"
PRESENCE_MIN_FRACTION = 0.001  # label must own >=0.1% of a frame to count


@dataclass
class WeightedLabelDistribution:
    pixel_prob: dict
    attn_prob: dict
    gaze_prob: dict
    attn_ratio: dict  # only labels with pixel_prob > 0
    gaze_ratio: dict


@dataclass
class AttentionGroupAssignment:
    attn: dict  # label_id -> "G1" | "G2" | "G3" | "ungrouped"
    gaze: dict


@dataclass
class NNAuditRow:
    val_video_id: str
    neighbor_ids: list
    similarities: list
    neighbor_scores: list
    mean_neighbor_score: float
    val_score: float
    val_predicted: float | None
    leakage_flag: bool


def resize_labels_nearest(labels, out_h=RASTER, out_w=RASTER):
    """Nearest-neighbor resize keeping label identities intact."""
    labels = np.asarray(labels)
    h, w = labels.shape
    rows = np.minimum((np.arange(out_h) + 0.5) * (h / out_h), h - 1).astype(np.intp)
    cols = np.minimum((np.arange(out_w) + 0.5) * (w / out_w), w - 1).astype(np.intp)
    return labels[np.ix_(rows, cols)]


def weighted_label_distribution(label_frames, attn_frames, gaze_frames, table):
    """Pixel, attention-weighted, and gaze-weighted label distributions.

    Counts and saliency-weighted sums are accumulated over all supplied
    frames, then each vector is normalized to a probability distribution
    over the table's labels.
    """
    pixel = {lid: 0.0 for lid in table.ids()}
    attn = {lid: 0.0 for lid in table.ids()}
    gaze = {lid: 0.0 for lid in table.ids()}
    for lab, a, g in zip(label_frames, attn_frames, gaze_frames):
        lab = np.asarray(lab)
        if lab.shape != (RASTER, RASTER):
            lab = resize_labels_nearest(lab)
        a = np.asarray(a, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if a.shape != lab.shape or g.shape != lab.shape:
            raise RasterMismatch(
                f"saliency {a.shape}/{g.shape} vs labels {lab.shape}"
            )
        ids, counts = np.unique(lab, return_counts=True)
        for lid, count in zip(ids.tolist(), counts.tolist()):
            if lid not in pixel:
                raise UnknownLabelId(f"label id {lid} missing from table")
            mask = lab == lid
            pixel[lid] += count
            attn[lid] += float(a[mask].sum())
            gaze[lid] += float(g[mask].sum())

    def normalize(vec):
        total = sum(vec.values())
        if total <= 0:
            raise EmptyMap("no pixels accumulated")
        return {k: v / total for k, v in vec.items()}

    pixel_p = normalize(pixel)
    attn_p = normalize(attn)
    gaze_p = normalize(gaze)
    attn_ratio = {k: attn_p[k] / pixel_p[k] for k in pixel_p if pixel_p[k] > 0}
    gaze_ratio = {k: gaze_p[k] / pixel_p[k] for k in pixel_p if pixel_p[k] > 0}
    return WeightedLabelDistribution(pixel_p, attn_p, gaze_p, attn_ratio, gaze_ratio)


def _group_of(ratio):
    if ratio > GROUP_UP:
        return "G1"
    if GROUP_FLAT[0] <= ratio <= GROUP_FLAT[1]:
        return "G2"
    if ratio < GROUP_DOWN:
        return "G3"
    return "ungrouped"


def assign_groups(dist):
    """Split labels into increased / unchanged / decreased attention groups."""

    def channel(ratios, pixel_prob):
        out = {}
        for lid in pixel_prob:
            if pixel_prob[lid] <= 0:
                out[lid] = "ungrouped"
            else:
                out[lid] = _group_of(ratios[lid])
        return out

    return AttentionGroupAssignment(
        channel(dist.attn_ratio, dist.pixel_prob),
        channel(dist.gaze_ratio, dist.pixel_prob),
    )


def label_presence(label_frames_by_video, table, min_fraction=PRESENCE_MIN_FRACTION):
    """Labels owning at least min_fraction of the pixels of some frame."""
    presence = {}
    for video_id, frames in label_frames_by_video.items():
        found = set()
        for lab in frames:
            lab = np.asarray(lab)
            ids, counts = np.unique(lab, return_counts=True)
            cutoff = min_fraction * lab.size
            for lid, count in zip(ids.tolist(), counts.tolist()):
                if lid not in table:
                    raise UnknownLabelId(f"label id {lid} missing from table")
                if count >= cutoff:
                    found.add(lid)
        presence[video_id] = found
    return presence


def group_memorability_distributions(groups, presence, records, table):
    """Score multisets per group (stuff/things separately) plus KS tests.

    A video contributes once per group label it contains. Empty groups are
    reported with a null KS entry rather than raising.
    """
    scores = {r.video_id: r.score for r in records}
    out = {}
    for category, want_thing in (("stuff", False), ("things", True)):
        dists = {"G1": [], "G2": [], "G3": []}
        for lid, group in sorted(groups.items()):
            if group not in dists or table.is_thing(lid) != want_thing:
                continue
            for video_id in sorted(presence):
                if lid in presence[video_id] and video_id in scores:
                    dists[group].append(scores[video_id])
        tests = {}
        for name, (ga, gb) in (("G1_vs_G2", ("G1", "G2")), ("G3_vs_G2", ("G3", "G2"))):
            if len(dists[ga]) >= 2 and len(dists[gb]) >= 2:
                d, p = ks_two_sample(dists[ga], dists[gb])
                tests[name] = {"D": d, "p": p}
            else:
                tests[name] = None  # EmptyGroup marker
        out[category] = {"distributions": dists, "ks": tests,
                         "empty_groups": [g for g, v in dists.items() if not v]}
    return out


def quantile_label_frequencies(presence, records, n_quantiles=4, labels=None):
    """Per label, the fraction of its containing videos in each GT quantile."""
    scores = {r.video_id: r.score for r in records if r.video_id in presence}
    bins = quantile_bins(scores, n_quantiles)
    bin_of = {vid: k for k, members in enumerate(bins) for vid in members}
    if labels is None:
        labels = sorted({lid for found in presence.values() for lid in found})
    out = {}
    for lid in labels:
        counts = np.zeros(n_quantiles, dtype=np.float64)
        for vid, found in presence.items():
            if lid in found and vid in bin_of:
                counts[bin_of[vid]] += 1
        total = counts.sum()
        if total == 0:
            raise LabelAbsent(f"label {lid} present in no video")
        out[lid] = (counts / total).tolist()
    return out


def stuff_things_cumulative(dist, table):
    """Sum the three probability vectors over the stuff/things partition."""
    out = {"stuff": {}, "things": {}}
    for key, vec in (("pixel", dist.pixel_prob), ("attn", dist.attn_prob),
                     ("gaze", dist.gaze_prob)):
        for part, want_thing in (("stuff", False), ("things", True)):
            out[part][key] = sum(
                v for lid, v in vec.items() if table.is_thing(lid) == want_thing
            )
    return out


# --- temporal attention --------------------------------------------------------

def temporal_profile(temporals):
    """Per-frame-index mean and SEM of temporal attention across videos."""
    temporals = [np.asarray(t, dtype=np.float64) for t in temporals]
    if not temporals:
        raise MixedT("no videos supplied")
    T = temporals[0].size
    if any(t.size != T for t in temporals):
        raise MixedT("videos disagree on T")
    stack = np.stack(temporals)
    mean = stack.mean(axis=0)
    if stack.shape[0] > 1:
        sem = stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
    else:
        sem = np.zeros(T)
    return [{"frame": i, "mean": float(mean[i]), "sem": float(sem[i])}
            for i in range(T)]


def reversal_control(params, config, features_list):
    """Temporal attention with frames fed normally and in reverse order.

    Reversing flips the frame contents across positions while the position
    embeddings stay put, which is the control for positional bias.
    """
    normal, rev = [], []
    for features in features_list:
        _, cache = forward(params, config, features)
        normal.append(extract_attention(cache, config).temporal)
        _, cache = forward(params, config, np.asarray(features)[::-1])
        rev.append(extract_attention(cache, config).temporal)
    return normal, rev


# --- nearest-neighbor audit ------------------------------------------------------

def nn_audit(train_reps, val_reps, records, k=5, leak_threshold=0.97,
             predictions=None):
    """Cosine kNN of validation representations against the train set.

    A row is flagged when its top-1 similarity reaches leak_threshold.
    """
    train_ids = sorted(train_reps)
    val_ids = sorted(val_reps)
    if not train_ids or not val_ids:
        raise DimMismatch("need nonempty train and val representations")
    dim = len(np.asarray(train_reps[train_ids[0]]).ravel())
    tr = np.stack([np.asarray(train_reps[v], dtype=np.float64).ravel()
                   for v in train_ids])
    va = np.stack([np.asarray(val_reps[v], dtype=np.float64).ravel()
                   for v in val_ids])
    if tr.shape[1] != va.shape[1] or tr.shape[1] != dim:
        raise DimMismatch(f"representation dims differ: {tr.shape[1]} vs {va.shape[1]}")

    def unit(m):
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return m / norms

    sims = unit(va) @ unit(tr).T
    scores = {r.video_id: r.score for r in records}
    k = min(k, len(train_ids))
    rows = []
    for i, vid in enumerate(val_ids):
        # sort by similarity desc, ties by train id for determinism
        order = sorted(range(len(train_ids)), key=lambda j: (-sims[i, j], train_ids[j]))
        top = order[:k]
        neigh_scores = [scores.get(train_ids[j]) for j in top]
        known = [s for s in neigh_scores if s is not None]
        mean_neigh = float(np.mean(known)) if known else float("nan")
        rows.append(
            NNAuditRow(
                val_video_id=vid,
                neighbor_ids=[train_ids[j] for j in top],
                similarities=[float(sims[i, j]) for j in top],
                neighbor_scores=neigh_scores,
                mean_neighbor_score=mean_neigh,
                val_score=scores.get(vid, float("nan")),
                val_predicted=(predictions or {}).get(vid),
                leakage_flag=bool(sims[i, order[0]] >= leak_threshold),
            )
        )
    flagged = sum(r.leakage_flag for r in rows)
    gaps = [abs(r.val_score - r.mean_neighbor_score) for r in rows
            if not (math.isnan(r.val_score) or math.isnan(r.mean_neighbor_score))]
    summary = {
        "n_val": len(rows),
        "flagged": flagged,
        "flagged_fraction": flagged / len(rows),
        "mean_abs_gap_to_neighbors": float(np.mean(gaps)) if gaps else None,
        "k": k,
        "leak_threshold": leak_threshold,
    }
    return rows, summary
