"""Experiment-design tooling: representative video selection and
lag-constrained presentation sequences.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintUnsatisfiable, InsufficientVideos, TooFewPoints
from .metrics import quantile_bins

VIGILANCE_LAGS = (2, 3)
TARGET_MIN_LAG = 9
CATEGORY_COUNTS = {"target": 20, "vigilance": 40, "filler": 80}


@dataclass
class SelectionPlan:
    chosen: list
    cluster_of: dict
    bin_of: dict
    category: dict = field(default_factory=dict)  # empty before refinement

    def to_json_obj(self):
        return {
            "chosen": list(self.chosen),
            "cluster_of": dict(self.cluster_of),
            "bin_of": dict(self.bin_of),
            "category": dict(self.category),
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(
            list(obj["chosen"]),
            {k: int(v) for k, v in obj["cluster_of"].items()},
            {k: int(v) for k, v in obj["bin_of"].items()},
            dict(obj.get("category", {})),
        )


@dataclass
class PresentationSequence:
    slots: list  # (video_id, is_repeat) pairs
    category: dict
    note: str = "recalibrate eye tracker every 10-20 videos"

    def to_json_obj(self):
        return {
            "slots": [{"video_id": v, "is_repeat": r} for v, r in self.slots],
            "category": dict(self.category),
            "note": self.note,
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(
            [(s["video_id"], bool(s["is_repeat"])) for s in obj["slots"]],
            dict(obj["category"]),
            obj.get("note", ""),
        )


# --- clustering -----------------------------------------------------------------

def _plusplus_init(points, k, rng):
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all remaining points coincide with centroids
        centroids[i] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(points, k=28, seed=0, max_iter=300):
    """Seeded k-means++ plus Lloyd iterations to an assignment fixpoint.

    Returns (assignments, centroids, inertia_history); the history is
    non-increasing. An emptied cluster is reseeded at the point currently
    farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise TooFewPoints(f"{n} points cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)

    assignments = None
    history = []
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), new_assign].sum()))
        if assignments is not None and np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for c in range(k):
            mask = assignments == c
            if mask.any():
                centroids[c] = points[mask].mean(axis=0)
            else:
                far = int(d2[np.arange(n), assignments].argmax())
                centroids[c] = points[far]
                assignments[far] = c
    return assignments, centroids, history


# --- selection ------------------------------------------------------------------

def _width_bins(scores, n_bins):
    lo = min(scores.values())
    hi = max(scores.values())
    if hi == lo:
        return {vid: 0 for vid in scores}
    width = (hi - lo) / n_bins
    return {
        vid: min(int((s - lo) / width), n_bins - 1) for vid, s in scores.items()
    }


def select_videos(features, records, k=28, n_bins=10, target=200, seed=0,
                  binning="width"):
    """Two-pass sampling: one video per (cluster, score-bin) cell, then a
    second round from the remaining stock, trimmed uniformly to `target`.

    Bins are equal-width over the observed score range by default;
    binning="quantile" switches to quantile bins.
    """
    video_ids = sorted(r.video_id for r in records)
    if len(video_ids) < target:
        raise InsufficientVideos(f"{len(video_ids)} videos < target {target}")
    missing = [v for v in video_ids if v not in features]
    if missing:
        raise InsufficientVideos(f"videos without features: {missing[:5]}")
    scores = {r.video_id: r.score for r in records}

    matrix = np.stack([np.asarray(features[v], dtype=np.float64).ravel()
                       for v in video_ids])
    assignments, _, _ = kmeans(matrix, k=k, seed=seed)
    cluster_of = {vid: int(c) for vid, c in zip(video_ids, assignments)}

    if binning == "quantile":
        bin_of = {}
        for b, members in enumerate(quantile_bins(scores, n_bins)):
            for vid in members:
                bin_of[vid] = b
    else:
        bin_of = _width_bins(scores, n_bins)

    cells = {}
    for vid in video_ids:
        cells.setdefault((cluster_of[vid], bin_of[vid]), []).append(vid)

    rng = np.random.default_rng(seed)
    chosen = []
    for cell in sorted(cells):
        stock = cells[cell]
        pick = stock.pop(int(rng.integers(len(stock))))
        chosen.append(pick)
    if len(chosen) < target:
        for cell in sorted(cells):
            stock = cells[cell]
            if stock:
                chosen.append(stock.pop(int(rng.integers(len(stock)))))
    if len(chosen) < target:
        raise InsufficientVideos(
            f"two sampling passes produced {len(chosen)} < target {target}"
        )
    while len(chosen) > target:
        chosen.pop(int(rng.integers(len(chosen))))

    chosen = sorted(chosen)
    return SelectionPlan(
        chosen,
        {v: cluster_of[v] for v in chosen},
        {v: bin_of[v] for v in chosen},
    )


def refine_and_categorize(plan, seed, counts=None):
    """Draw the experiment set from the pool and split it into categories."""
    counts = dict(counts or CATEGORY_COUNTS)
    need = sum(counts.values())
    pool = sorted(plan.chosen)
    if len(pool) < need:
        raise InsufficientVideos(f"pool of {len(pool)} < {need}")
    rng = np.random.default_rng(seed)
    picked = list(rng.choice(pool, size=need, replace=False))
    rng.shuffle(picked)
    category = {}
    pos = 0
    for name in ("target", "vigilance", "filler"):
        for vid in picked[pos : pos + counts[name]]:
            category[str(vid)] = name
        pos += counts[name]
    kept = sorted(category)
    return SelectionPlan(
        kept,
        {v: plan.cluster_of[v] for v in kept},
        {v: plan.bin_of[v] for v in kept},
        category,
    )


# --- presentation sequences -------------------------------------------------------

def _place_lagged(free, rng, lags):
    """Place a pair whose repeat lag is one of `lags` (small fixed set)."""
    n = len(free)
    starts = [i for i in range(n)
              if free[i] and any(i + lag < n and free[i + lag] for lag in lags)]
    if not starts:
        return None
    i = starts[int(rng.integers(len(starts)))]
    repeats = [i + lag for lag in lags if i + lag < n and free[i + lag]]
    j = repeats[int(rng.integers(len(repeats)))]
    free[i] = free[j] = False
    return i, j


def _place_min_lag(free, rng, min_lag):
    """Place a pair whose repeat lag is at least `min_lag`."""
    n = len(free)
    # suffix_free[i] = index of the last free slot >= i, or -1
    suffix_free = [-1] * (n + 1)
    last = -1
    for i in range(n - 1, -1, -1):
        if free[i]:
            last = i
        suffix_free[i] = last
    starts = [i for i in range(n)
              if free[i] and i + min_lag < n and suffix_free[i + min_lag] >= 0]
    if not starts:
        return None
    i = starts[int(rng.integers(len(starts)))]
    repeats = [j for j in range(i + min_lag, n) if free[j]]
    j = repeats[int(rng.integers(len(repeats)))]
    free[i] = free[j] = False
    return i, j


def generate_sequence(plan, seed, max_attempts=10000):
    """Randomized placement honoring the repeat-lag constraints.

    Vigilance pairs land lag 2-3 apart, target pairs at lag >= 9 (lag j-i),
    fillers take the remaining slots. Retries until valid or max_attempts.
    """
    targets = sorted(v for v, c in plan.category.items() if c == "target")
    vigilance = sorted(v for v, c in plan.category.items() if c == "vigilance")
    fillers = sorted(v for v, c in plan.category.items() if c == "filler")
    n_slots = 2 * len(targets) + 2 * len(vigilance) + len(fillers)
    rng = np.random.default_rng(seed)

    for _ in range(max_attempts):
        free = [True] * n_slots
        slots = [None] * n_slots
        ok = True

        vids = list(vigilance)
        rng.shuffle(vids)
        for vid in vids:
            pair = _place_lagged(free, rng, VIGILANCE_LAGS)
            if pair is None:
                ok = False
                break
            slots[pair[0]] = (vid, False)
            slots[pair[1]] = (vid, True)
        if ok:
            tids = list(targets)
            rng.shuffle(tids)
            for vid in tids:
                pair = _place_min_lag(free, rng, TARGET_MIN_LAG)
                if pair is None:
                    ok = False
                    break
                slots[pair[0]] = (vid, False)
                slots[pair[1]] = (vid, True)
        if ok:
            fids = list(fillers)
            rng.shuffle(fids)
            gaps = [i for i in range(n_slots) if free[i]]
            for vid, i in zip(fids, gaps):
                slots[i] = (vid, False)
            seq = PresentationSequence(slots, dict(plan.category))
            if not validate_sequence(seq):
                return seq
    raise ConstraintUnsatisfiable(max_attempts)


def validate_sequence(seq):
    """Return the list of constraint violations (empty means valid)."""
    violations = []
    first_seen = {}
    occurrences = {}
    for slot, item in enumerate(seq.slots):
        if item is None:
            violations.append(f"slot {slot}: empty")
            continue
        vid, is_repeat = item
        cat = seq.category.get(vid)
        if cat is None:
            violations.append(f"slot {slot}: unknown video {vid!r}")
            continue
        occurrences[vid] = occurrences.get(vid, 0) + 1
        if not is_repeat:
            if vid in first_seen:
                violations.append(f"slot {slot}: {vid} shown twice as non-repeat")
            first_seen[vid] = slot
        else:
            if vid not in first_seen:
                violations.append(f"slot {slot}: repeat of unseen video {vid}")
                continue
            lag = slot - first_seen[vid]
            if cat == "vigilance" and lag not in VIGILANCE_LAGS:
                violations.append(
                    f"slot {slot}: vigilance {vid} repeat at lag {lag}, want 2-3"
                )
            elif cat == "target" and lag < TARGET_MIN_LAG:
                violations.append(
                    f"slot {slot}: target {vid} repeat at lag {lag}, want >= {TARGET_MIN_LAG}"
                )
            elif cat == "filler":
                violations.append(f"slot {slot}: filler {vid} repeated")

    expected = {"target": 2, "vigilance": 2, "filler": 1}
    for vid, cat in sorted(seq.category.items()):
        want = expected[cat]
        got = occurrences.get(vid, 0)
        if got != want:
            violations.append(f"{cat} {vid}: shown {got} times, want {want}")
    want_slots = sum(expected[c] for c in seq.category.values())
    if len(seq.slots) != want_slots:
        violations.append(f"{len(seq.slots)} slots, want {want_slots}")
    return violations
