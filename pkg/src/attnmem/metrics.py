"""Saliency-comparison and score-evaluation metrics.

Map metrics follow the MIT saliency benchmark conventions (population
z-scoring for NSS, fixation density as the KLD reference). AUC-Judd is the
exact ROC area, i.e. the rank statistic P(sal_fix > sal_nonfix) + half the
tie mass, so it is invariant under strictly increasing transforms.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    DegenerateFixations,
    EmptyBin,
    EmptyMap,
    EmptyPool,
    TooFew,
    ZeroVariance,
)


def _grid(m):
    return np.asarray(m.grid if hasattr(m, "grid") else m, dtype=np.float64)


def _mask(m):
    return np.asarray(m.grid if hasattr(m, "grid") else m, dtype=bool)


@dataclass
class MetricReport:
    name: str
    per_video: dict
    mean: float
    sem: float
    n: int

    @classmethod
    def from_values(cls, name, per_video):
        values = np.array([per_video[k] for k in sorted(per_video)], dtype=np.float64)
        if values.size == 0:
            raise TooFew(f"no values for metric {name}")
        mean = float(values.mean())
        sem = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        return cls(name, dict(per_video), mean, sem, values.size)

    def to_json_obj(self):
        return {"mean": self.mean, "sem": self.sem, "n": self.n}


# --- map similarity ---------------------------------------------------------

def auc_judd(saliency, fixations):
    """ROC area of saliency values classifying fixated vs non-fixated pixels."""
    sal = _grid(saliency).ravel()
    fix = _mask(fixations).ravel()
    if sal.size != fix.size:
        raise DegenerateFixations(
            f"raster mismatch: {sal.size} saliency vs {fix.size} fixation pixels"
        )
    n_fix = int(fix.sum())
    if n_fix == 0 or n_fix == fix.size:
        raise DegenerateFixations("need both fixated and non-fixated pixels")
    return float(kernels.auc_from_scores(sal, fix))


def nss(saliency, fixations):
    """Mean z-scored saliency at fixated pixels (population stddev)."""
    sal = _grid(saliency)
    fix = _mask(fixations)
    std = sal.std()
    if std == 0:
        raise ZeroVariance("constant saliency map")
    z = (sal - sal.mean()) / std
    if not fix.any():
        raise DegenerateFixations("no fixated pixels")
    return float(z[fix].mean())


def cc(map_a, map_b):
    """Pearson correlation of the flattened maps."""
    a = _grid(map_a).ravel()
    b = _grid(map_b).ravel()
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0:
        raise ZeroVariance("constant map")
    return float(a @ b) / denom


def kld(fix_density, saliency, eps=1e-12):
    """KL divergence with the fixation density as the reference distribution."""
    g = _grid(fix_density).ravel()
    a = _grid(saliency).ravel()
    gs = g.sum()
    as_ = a.sum()
    if gs <= 0 or as_ <= 0:
        raise EmptyMap("map sums to zero")
    g = g / gs
    a = a / as_
    return float(np.sum(g * np.log((g + eps) / (a + eps))))


# --- AUC-Percentile ----------------------------------------------------------

@dataclass
class PermutationConfig:
    """Null-distribution setup: fixation maps of *other* videos."""

    pool: dict = field(repr=False)  # video_id -> list of BinaryFixationMap
    n_permutations: int = 100
    rng_seed: int = 0
    index_matched: bool = False

    def __post_init__(self):
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be >= 1")


def auc_percentile(attn_frames, fix_frames, cfg, video_id=None, return_frames=False):
    """Percentile of each frame's true AUC-Judd within a permuted null.

    For frame i the true score is auc_judd against the video's own fixation
    map; the null draws a uniformly random other video and (by default) a
    uniformly random frame of it, n_permutations times. Ties get half
    credit, so identical distributions sit at 50. The per-frame RNG is
    derived from (rng_seed, frame index), making parallel evaluation match
    the serial order.
    """
    if video_id is None:
        video_id = next(
            (f.video_id for f in fix_frames if hasattr(f, "video_id")), None
        )
    pool_ids = sorted(k for k in cfg.pool if k != video_id)
    if not pool_ids:
        raise EmptyPool("permutation pool has no other videos")

    per_frame = {}
    skipped = []
    for i, (attn, own) in enumerate(zip(attn_frames, fix_frames)):
        if own is None:
            skipped.append(i)
            continue
        try:
            true_score = auc_judd(attn, own)
        except DegenerateFixations:
            skipped.append(i)
            continue
        rng = np.random.default_rng([cfg.rng_seed, i])
        below = 0
        equal = 0
        for _ in range(cfg.n_permutations):
            other = cfg.pool[pool_ids[rng.integers(len(pool_ids))]]
            if cfg.index_matched:
                ghat = other[i % len(other)]
            else:
                ghat = other[rng.integers(len(other))]
            score = auc_judd(attn, ghat)
            if score < true_score:
                below += 1
            elif score == true_score:
                equal += 1
        per_frame[i] = 100.0 * (below + 0.5 * equal) / cfg.n_permutations
    if not per_frame:
        raise DegenerateFixations(f"every frame of {video_id} skipped")
    mean = float(np.mean(list(per_frame.values())))
    if return_frames:
        return mean, per_frame, skipped
    return mean


# --- score evaluation ---------------------------------------------------------

def average_ranks(values):
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    s = x[order]
    boundaries = np.flatnonzero(np.diff(s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [x.size]))
    ranks_sorted = np.repeat(0.5 * (starts + 1 + ends), ends - starts)
    ranks = np.empty(x.size, dtype=np.float64)
    ranks[order] = ranks_sorted
    return ranks


def spearman_rc(pred, truth):
    """Spearman rank correlation with average-rank tie handling."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.size != truth.size:
        raise TooFew("pred and truth lengths differ")
    if pred.size < 2:
        raise TooFew("need at least two pairs")
    ra = average_ranks(pred) - (pred.size + 1) / 2.0
    rb = average_ranks(truth) - (pred.size + 1) / 2.0
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        raise ZeroVariance("constant ranks")
    return float(ra @ rb) / denom


def mse(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.size != truth.size or pred.size == 0:
        raise TooFew("pred and truth must be equal-length and nonempty")
    return float(np.mean((pred - truth) ** 2))


def ks_two_sample(a, b):
    """Two-sample KS statistic and asymptotic two-sided p-value.

    p uses the Kolmogorov series with effective size n_e = na*nb/(na+nb)
    and lambda = (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) * D, truncated once
    terms drop below 1e-10; a non-converging series (D near 0) yields 1.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise TooFew("need at least two samples on each side")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / na
    cdf_b = np.searchsorted(b, grid, side="right") / nb
    d = float(np.abs(cdf_a - cdf_b).max())

    n_e = na * nb / (na + nb)
    lam = (math.sqrt(n_e) + 0.12 + 0.11 / math.sqrt(n_e)) * d
    total = 0.0
    converged = False
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        if abs(term) < 1e-10:
            converged = True
            break
        total += term
    p = total if converged else 1.0
    return d, float(min(1.0, max(0.0, p)))


def prepare_maps(attn_by_vid, fix_by_vid):
    """Min-max normalize per frame and binarize fixation maps at 0.5.

    Returns (video_ids, norm_attn, norm_fix, binary); degenerate fixation
    frames become None in the binary lists.
    """
    from .fixation import SaliencyMap, binarize, minmax_normalize
    from .errors import AllBelowThreshold

    vids = sorted(set(attn_by_vid) & set(fix_by_vid))
    if not vids:
        raise TooFew("no videos shared between attention and fixation inputs")
    norm_attn = {}
    norm_fix = {}
    binary = {}
    for vid in vids:
        norm_attn[vid] = [minmax_normalize(f) for f in np.asarray(attn_by_vid[vid])]
        norm_fix[vid] = [minmax_normalize(f) for f in np.asarray(fix_by_vid[vid])]
        maps = []
        for i, grid in enumerate(norm_fix[vid]):
            try:
                maps.append(binarize(SaliencyMap(vid, i, grid, True)))
            except AllBelowThreshold:
                maps.append(None)
        binary[vid] = maps
    return vids, norm_attn, norm_fix, binary


def auc_percentile_suite(attn_by_vid, fix_by_vid, n_permutations=100,
                         rng_seed=0, index_matched=False):
    """AUC-Percentile per video, pooling the other videos' fixation maps."""
    vids, norm_attn, _, binary = prepare_maps(attn_by_vid, fix_by_vid)
    per_video = {}
    skipped = []
    for vid in vids:
        pool = {v: [m for m in binary[v] if m is not None]
                for v in vids if v != vid and any(m is not None for m in binary[v])}
        try:
            cfg = PermutationConfig(pool, n_permutations, rng_seed, index_matched)
            per_video[vid] = auc_percentile(
                norm_attn[vid], binary[vid], cfg, video_id=vid
            )
        except (EmptyPool, DegenerateFixations):
            skipped.append(vid)
    if not per_video:
        raise EmptyPool("no video had a usable permutation pool")
    return MetricReport.from_values("auc_percentile", per_video), skipped


def saliency_suite(attn_by_vid, fix_by_vid, permutation=None, threads=1,
                   sem_over="videos"):
    """Frame-averaged saliency metrics per video, rolled into MetricReports.

    attn_by_vid / fix_by_vid map video_id -> (T, H', W') stacks. Frames
    whose fixation map is degenerate (or constant attention) are skipped
    per metric; videos with no usable frame are dropped and listed under
    "skipped_videos". With `permutation` set, AUC-Percentile is computed
    against the other videos' binarized fixation maps. sem_over="frames"
    pools every frame value into the mean/SEM instead of averaging per
    video first (per_video stays the per-video means either way).
    """
    from concurrent.futures import ThreadPoolExecutor

    if sem_over not in ("videos", "frames"):
        raise ValueError("sem_over must be 'videos' or 'frames'")
    vids, norm_attn, norm_fix, binary = prepare_maps(attn_by_vid, fix_by_vid)

    def one_video(vid):
        scores = {"auc_judd": [], "nss": [], "cc": [], "kld": []}
        skipped = []
        for i, (attn, fixd, fixb) in enumerate(
            zip(norm_attn[vid], norm_fix[vid], binary[vid])
        ):
            if fixb is None:
                skipped.append(i)
                continue
            try:
                frame = {
                    "auc_judd": auc_judd(attn, fixb),
                    "nss": nss(attn, fixb),
                    "cc": cc(attn, fixd),
                    "kld": kld(fixd, attn),
                }
            except (ZeroVariance, DegenerateFixations, EmptyMap):
                skipped.append(i)
                continue
            for k, v in frame.items():
                scores[k].append(v)
        means = {k: float(np.mean(v)) for k, v in scores.items() if v}
        return vid, means, scores, skipped

    results = {}
    frame_values = {}
    skipped_videos = []
    skipped_frames = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_video, vids))
    else:
        rows = [one_video(v) for v in vids]
    for vid, means, scores, skipped in rows:
        if skipped:
            skipped_frames[vid] = skipped
        if not means:
            skipped_videos.append(vid)
            continue
        results[vid] = means
        frame_values[vid] = scores

    reports = {}
    for name in ("auc_judd", "nss", "cc", "kld"):
        per_video = {v: results[v][name] for v in results if name in results[v]}
        if not per_video:
            continue
        if sem_over == "frames":
            pooled = np.concatenate(
                [frame_values[v][name] for v in sorted(per_video)]
            )
            sem = (float(pooled.std(ddof=1) / math.sqrt(pooled.size))
                   if pooled.size > 1 else 0.0)
            reports[name] = MetricReport(name, per_video, float(pooled.mean()),
                                         sem, int(pooled.size))
        else:
            reports[name] = MetricReport.from_values(name, per_video)

    if permutation is not None and len(vids) > 1:
        per_video = {}
        for vid in vids:
            if vid in skipped_videos:
                continue
            cfg = PermutationConfig(
                pool={v: [m for m in binary[v] if m is not None] for v in vids
                      if v != vid and any(m is not None for m in binary[v])},
                n_permutations=permutation.n_permutations,
                rng_seed=permutation.rng_seed,
                index_matched=permutation.index_matched,
            )
            try:
                per_video[vid] = auc_percentile(
                    norm_attn[vid], binary[vid], cfg, video_id=vid
                )
            except (EmptyPool, DegenerateFixations):
                skipped_videos.append(vid)
        if per_video:
            reports["auc_percentile"] = MetricReport.from_values(
                "auc_percentile", per_video
            )
    return reports, {"skipped_videos": sorted(set(skipped_videos)),
                     "skipped_frames": skipped_frames}


def quantile_bins(scores_by_video, n_bins):
    """Quantile split: sort by (score, id) and slice into n_bins groups.

    Group sizes differ by at most one (larger groups first); returns the
    list of video-id lists, lowest scores first.
    """
    items = sorted(scores_by_video.items(), key=lambda kv: (kv[1], kv[0]))
    if len(items) < n_bins:
        raise EmptyBin(f"{len(items)} videos cannot fill {n_bins} bins")
    ids = [vid for vid, _ in items]
    return [list(chunk) for chunk in np.array_split(ids, n_bins)]


def bin_by_memorability(report, records, n_bins=4):
    """Per-quantile (mean, sem) of a metric, binned by ground-truth score."""
    scores = {r.video_id: r.score for r in records}
    missing = [v for v in report.per_video if v not in scores]
    if missing:
        raise ValueError(f"videos without ground truth: {missing[:5]}")
    bins = quantile_bins({v: scores[v] for v in report.per_video}, n_bins)
    out = []
    for k, members in enumerate(bins):
        if not members:
            raise EmptyBin(f"bin {k} is empty")
        vals = np.array([report.per_video[v] for v in members], dtype=np.float64)
        sem = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        out.append(
            {
                "bin": k,
                "n": int(vals.size),
                "score_lo": float(min(scores[v] for v in members)),
                "score_hi": float(max(scores[v] for v in members)),
                "mean": float(vals.mean()),
                "sem": sem,
            }
        )
    return out
