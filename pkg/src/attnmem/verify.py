"""Self-contained verification suite: oracle and invariant checks.

Each check returns (passed, detail). The CLI `verify` subcommand runs all
of them and exits nonzero on any failure; the test suite asserts them
individually. Oracles here are straight-line re-derivations independent
of the library code paths they check.
"""

import math
import tempfile
import time

import numpy as np

from . import io, kernels
from .analysis import (
    assign_groups,
    group_memorability_distributions,
    label_presence,
    weighted_label_distribution,
)
from .fixation import ScreenGeometry, SaliencyMap, binarize, blur_sigma, \
    minmax_normalize, pixels_per_degree
from .metrics import (
    PermutationConfig,
    auc_judd,
    auc_percentile,
    cc,
    kld,
    ks_two_sample,
    nss,
    spearman_rc,
)
from .model import (
    ModelConfig,
    TrainSettings,
    VideoExample,
    extract_attention,
    forward,
    init_params,
    loss_and_grads,
    train,
    trainable_names,
    zeroed_position_embeddings,
)
from .study import generate_sequence, kmeans, refine_and_categorize, \
    select_videos, validate_sequence
from .io import MemRecord


# --- 1. gradient oracle -------------------------------------------------------

def check_gradient_oracle():
    """Analytic gradients vs central finite differences, f64 toy config."""
    t0 = time.time()
    cfg = ModelConfig(T=3, H=4, W=4, D=16, d=16, L=2, n_heads=2,
                      temporal_embedding="learnable",
                      spatial_embedding="learned_1d",
                      seed=17, dtype="float64")
    params = init_params(cfg)
    rng = np.random.default_rng(23)
    batch = [(rng.normal(size=(3, 4, 4, 16)), 0.71),
             (rng.normal(size=(3, 4, 4, 16)), 0.28)]

    def batch_loss():
        total = 0.0
        for feats, m in batch:
            m_hat, _ = forward(params, cfg, feats)
            total += (m_hat - m) ** 2 / len(batch)
        return total

    _, grads = loss_and_grads(params, cfg, batch)
    h = 1e-5
    worst = 0.0
    worst_name = ""
    n_params = 0
    for name in trainable_names(cfg):
        flat = params[name].ravel()
        gflat = grads[name].ravel()
        n_params += flat.size
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = batch_loss()
            flat[i] = orig - h
            lm = batch_loss()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * h)
            rel = abs(gflat[i] - fd) / max(1.0, abs(gflat[i]), abs(fd))
            if rel > worst:
                worst = rel
                worst_name = f"{name}[{i}]"
    elapsed = time.time() - t0
    ok = worst <= 1e-6 and elapsed < 60.0
    return ok, (f"{n_params} parameters, worst rel err {worst:.2e} "
                f"at {worst_name}, {elapsed:.1f}s")


# --- 2. synthetic training ------------------------------------------------------

def make_synthetic_videos(n, cfg, seed, split="train"):
    """Memorability = clamp(0.5 + mean of feature channel 0, 0, 1)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        feats = rng.normal(size=(cfg.T, cfg.H, cfg.W, cfg.D)).astype(np.float32)
        feats[..., 0] += rng.uniform(-0.3, 0.3)
        m = float(np.clip(0.5 + feats[..., 0].mean(), 0.0, 1.0))
        out.append(VideoExample(f"{split}{i:03d}", feats, m, split))
    return out


def check_synthetic_training():
    t0 = time.time()
    cfg = ModelConfig(T=5, H=7, W=7, D=64, d=32, L=2, n_heads=4,
                      seed=11, dtype="float32")
    data = (make_synthetic_videos(64, cfg, seed=100)
            + make_synthetic_videos(16, cfg, seed=200, split="val"))
    settings = TrainSettings(epochs=200, lr=1e-3, batch_size=8, seed=5,
                             stop_rc=0.9)
    logs = []
    for _ in range(2):
        params = init_params(cfg)
        logs.append(train(params, cfg, data, settings).entries)
    elapsed = time.time() - t0
    rc = logs[0][-1]["train_rc"]
    identical = logs[0] == logs[1]
    ok = (rc is not None and rc >= 0.9 and len(logs[0]) <= 200
          and identical and elapsed < 300.0)
    return ok, (f"train RC {rc:.3f} after {len(logs[0])} epochs, "
                f"same-seed runs identical: {identical}, {elapsed:.1f}s")


# --- 3. attention normalization and reversal equivariance -------------------------

def check_attention_invariants():
    cfg = ModelConfig(T=5, H=7, W=7, D=16, d=32, L=2, n_heads=4,
                      seed=3, dtype="float32")
    params = init_params(cfg)
    rng = np.random.default_rng(9)
    worst_sum = 0.0
    min_alpha = np.inf
    for _ in range(100):
        feats = rng.normal(size=(cfg.T, cfg.H, cfg.W, cfg.D))
        _, cache = forward(params, cfg, feats)
        alpha = extract_attention(cache, cfg).alpha
        worst_sum = max(worst_sum, abs(alpha.sum() - 1.0))
        min_alpha = min(min_alpha, alpha.min())

    zeroed = zeroed_position_embeddings(params)
    worst_rev = 0.0
    for _ in range(10):
        feats = rng.normal(size=(cfg.T, cfg.H, cfg.W, cfg.D))
        _, cache = forward(zeroed, cfg, feats)
        fwd_t = extract_attention(cache, cfg).temporal
        _, cache = forward(zeroed, cfg, feats[::-1])
        rev_t = extract_attention(cache, cfg).temporal
        worst_rev = max(worst_rev, float(np.abs(rev_t - fwd_t[::-1]).max()))
    ok = worst_sum <= 1e-5 and min_alpha >= 0.0 and worst_rev <= 1e-5
    return ok, (f"max |sum(alpha)-1| {worst_sum:.2e}, min alpha {min_alpha:.2e}, "
                f"max reversal gap {worst_rev:.2e}")


# --- 4. metric oracles -----------------------------------------------------------

def brute_force_auc(sal, fix):
    pos = sal[fix]
    neg = sal[~fix]
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def brute_force_ranks(values):
    ranks = []
    for v in values:
        less = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        ranks.append(less + (equal + 1) / 2.0)
    return np.array(ranks)


def check_metric_oracles():
    rng = np.random.default_rng(31)
    worst_auc = 0.0
    for _ in range(50):
        sal = rng.random((8, 8))
        fix = np.zeros(64, dtype=bool)
        fix[rng.choice(64, size=5, replace=False)] = True
        fix = fix.reshape(8, 8)
        got = auc_judd(sal, fix)
        want = brute_force_auc(sal.ravel(), fix.ravel())
        worst_auc = max(worst_auc, abs(got - want))

    x = rng.random((16, 16))
    cc_err = abs(cc(x, x) - 1.0)

    p = rng.random((9, 9)) + 0.1
    kld_self = abs(kld(p, p))

    fix = rng.random((16, 16)) > 0.7
    fix[0, 0] = True
    base = nss(x, fix)
    nss_err = abs(nss(3.7 * x + 1.9, fix) - base)

    worst_rc = 0.0
    for _ in range(5):
        a = rng.integers(0, 20, size=50).astype(float)
        b = a * 0.5 + rng.integers(0, 8, size=50)
        got = spearman_rc(a, b)
        ra, rb = brute_force_ranks(a), brute_force_ranks(b)
        want = float(np.corrcoef(ra, rb)[0, 1])
        worst_rc = max(worst_rc, abs(got - want))

    ok = (worst_auc <= 1e-9 and cc_err <= 1e-12 and kld_self <= 1e-9
          and nss_err <= 1e-9 and worst_rc <= 1e-12)
    return ok, (f"auc {worst_auc:.1e}, cc {cc_err:.1e}, kld {kld_self:.1e}, "
                f"nss {nss_err:.1e}, spearman {worst_rc:.1e}")


# --- 5. AUC-Percentile ------------------------------------------------------------

def _random_binary_maps(rng, n_videos, n_frames, prefix="v"):
    """Smooth random maps; each binarized at 0.5 with its density kept."""
    videos = {}
    for v in range(n_videos):
        frames = []
        for i in range(n_frames):
            low = rng.random((16, 16))
            grid = minmax_normalize(kernels.bilinear_resize(low, 224, 224))
            smap = SaliencyMap(f"{prefix}{v}", i, grid, True)
            frames.append((grid, binarize(smap)))
        videos[f"{prefix}{v}"] = frames
    return videos


def check_auc_percentile():
    rng = np.random.default_rng(77)
    world = _random_binary_maps(rng, 8, 3)

    # attention = the video's own fixation density: true AUC is exactly 1
    percentiles = {}
    for vid, frames in world.items():
        cfg = PermutationConfig(
            pool={v: [b for _, b in fr] for v, fr in world.items() if v != vid},
            n_permutations=100, rng_seed=5,
        )
        attn = [g for g, _ in frames]
        own = [b for _, b in frames]
        percentiles[vid] = auc_percentile(attn, own, cfg, video_id=vid)
    min_pct = min(percentiles.values())

    # pool of copies of the video's own map: every permuted score ties
    # (single-frame videos so any frame draw returns the same map)
    single = _random_binary_maps(rng, 1, 1, prefix="s")["s0"]
    cfg = PermutationConfig(
        pool={f"copy{j}": [single[0][1]] for j in range(5)},
        n_permutations=100, rng_seed=5,
    )
    tied = auc_percentile([single[0][0]], [single[0][1]], cfg, video_id="s0")
    again = auc_percentile([single[0][0]], [single[0][1]], cfg, video_id="s0")
    ok = min_pct >= 99.0 and abs(tied - 50.0) <= 0.5 and tied == again
    return ok, (f"own-map percentile min {min_pct:.2f}, identical-pool "
                f"{tied:.2f}, deterministic: {tied == again}")


# --- 6. fixation formulas ----------------------------------------------------------

def check_fixation_formulas():
    geom = ScreenGeometry(distance_in=13.77, screen_h_in=23.5, screen_res_y=768)
    ppd = pixels_per_degree(geom)
    sigma = blur_sigma(geom)

    rng = np.random.default_rng(13)
    radius = math.ceil(3 * sigma)
    mat = np.zeros((64, 64))
    pts = set()
    while len(pts) < 5:
        pts.add((int(rng.integers(radius, 64 - radius)),
                 int(rng.integers(radius, 64 - radius))))
    for y, x in pts:
        mat[y, x] = 1.0
    mass_err = abs(kernels.gaussian_blur(mat, sigma).sum() - len(pts))

    ok = abs(ppd - 7.854) <= 0.01 and abs(sigma - 3.335) <= 0.01 and mass_err <= 1e-6
    return ok, f"PPD {ppd:.4f}, sigma {sigma:.4f}, blur mass error {mass_err:.2e}"


# --- 7. panoptic pipeline ------------------------------------------------------------

def _panoptic_world():
    """16 videos; G1 labels planted in the high-score half.

    Stripe layouts give exact pixel shares; attention values are chosen so
    label ratios land at ~2.4 (G1), ~1.0 (G2), ~0.35 (G3) and the ballast
    label 7 stays ungrouped.
    """
    table = io.LabelTable([
        io.LabelEntry(1, "water", False), io.LabelEntry(2, "sky", False),
        io.LabelEntry(3, "road", False), io.LabelEntry(4, "person", True),
        io.LabelEntry(5, "car", True), io.LabelEntry(6, "bed", True),
        io.LabelEntry(7, "wall", False),
    ])
    lab_a = np.full((224, 224), 7, dtype=np.uint16)
    lab_a[:, 0:37] = 1
    lab_a[:, 37:74] = 4
    lab_b = np.full((224, 224), 7, dtype=np.uint16)
    lab_b[:, 0:37] = 3
    lab_b[:, 37:74] = 6
    lab_b[:, 74:111] = 2
    lab_b[:, 111:148] = 5

    def paint(labels, values):
        sal = np.zeros((224, 224))
        for lid, v in values.items():
            sal[labels == lid] = v
        return sal / 2.4

    sal_a = paint(lab_a, {1: 2.4, 4: 2.4, 7: 0.75})
    sal_b = paint(lab_b, {3: 0.35, 6: 0.35, 2: 1.0, 5: 1.0, 7: 0.75})

    label_frames, attn_frames, videos = [], [], {}
    records = []
    for i in range(8):
        vid = f"hi{i}"
        videos[vid] = [lab_a]
        label_frames.append(lab_a)
        attn_frames.append(sal_a)
        records.append(MemRecord(vid, 0.6 + 0.02 * i, "val"))
    for i in range(8):
        vid = f"lo{i}"
        videos[vid] = [lab_b]
        label_frames.append(lab_b)
        attn_frames.append(sal_b)
        records.append(MemRecord(vid, 0.4 + 0.02 * i, "val"))
    return table, label_frames, attn_frames, videos, records


def check_panoptic_pipeline():
    table, label_frames, attn_frames, videos, records = _panoptic_world()
    dist = weighted_label_distribution(label_frames, attn_frames, attn_frames, table)

    sums = [abs(sum(vec.values()) - 1.0)
            for vec in (dist.pixel_prob, dist.attn_prob, dist.gaze_prob)]
    groups = assign_groups(dist).attn
    planted = {1: "G1", 4: "G1", 2: "G2", 5: "G2", 3: "G3", 6: "G3",
               7: "ungrouped"}
    partition_ok = groups == planted

    presence = label_presence(videos, table)
    result = group_memorability_distributions(groups, presence, records, table)
    p_stuff = result["stuff"]["ks"]["G1_vs_G2"]["p"]
    p_things = result["things"]["ks"]["G1_vs_G2"]["p"]

    ok = (max(sums) <= 1e-9 and partition_ok
          and p_stuff < 0.01 and p_things < 0.01)
    return ok, (f"prob sums off by {max(sums):.1e}, partition exact: "
                f"{partition_ok}, KS p stuff {p_stuff:.2e} things {p_things:.2e}")


# --- 8. KS p-value vs permutation oracle ----------------------------------------------

def permutation_ks_pvalue(a, b, n_resamples=100000, seed=0):
    """Monte Carlo permutation p: share of label shuffles with D* >= D."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    d_obs, _ = ks_two_sample(a, b)
    pool = np.sort(np.concatenate([a, b]))
    labels = np.zeros(na + nb, dtype=np.float64)
    labels[:na] = 1.0
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 20000
    done = 0
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        lab = rng.permuted(np.tile(labels, (m, 1)), axis=1)
        ca = np.cumsum(lab, axis=1) / na
        cb = (np.arange(1, na + nb + 1) - np.cumsum(lab, axis=1)) / nb
        d_star = np.abs(ca - cb).max(axis=1)
        hits += int((d_star >= d_obs - 1e-12).sum())
        done += m
    return hits / n_resamples


def check_ks_pvalue():
    # 2:3 sample sizes: equal n puts all D mass on a coarse lattice where
    # any continuous approximation is off by far more than the tolerance
    rng = np.random.default_rng(19)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(32, 51))
        na, nb = 2 * k, 3 * k
        a = rng.normal(size=na)
        b = rng.normal(loc=rng.uniform(0.0, 0.8), size=nb)
        _, p = ks_two_sample(a, b)
        p_oracle = permutation_ks_pvalue(a, b, n_resamples=100000, seed=int(na * nb))
        worst = max(worst, abs(p - p_oracle))
    ok = worst <= 0.02
    return ok, f"max |asymptotic - permutation| = {worst:.4f} over 20 pairs"


# --- 9. study tooling ------------------------------------------------------------------

def check_study_tooling():
    t0 = time.time()
    rng = np.random.default_rng(0)
    centers = rng.normal(scale=50.0, size=(28, 8))
    points = np.vstack([c + rng.normal(scale=0.5, size=(12, 8)) for c in centers])
    truth = np.repeat(np.arange(28), 12)
    assign, _, history = kmeans(points, 28, seed=1)
    pure = all(len(set(assign[truth == blob].tolist())) == 1 for blob in range(28))
    pure = pure and len(set(assign.tolist())) == 28
    monotone = all(history[i + 1] <= history[i] + 1e-9
                   for i in range(len(history) - 1))

    vids = [f"v{i:03d}" for i in range(400)]
    feats = {v: rng.normal(size=6) for v in vids}
    records = [MemRecord(v, float(rng.random()), "val") for v in vids]
    plan = refine_and_categorize(select_videos(feats, records, seed=4), seed=5)

    failures = 0
    for seed in range(1000):
        seq = generate_sequence(plan, seed=seed)
        if validate_sequence(seq):
            failures += 1
    elapsed = time.time() - t0
    ok = pure and monotone and failures == 0 and elapsed < 120.0
    return ok, (f"blob purity 1.0: {pure}, inertia monotone: {monotone}, "
                f"sequence failures {failures}/1000, {elapsed:.1f}s")


# --- tensor round-trips -------------------------------------------------------------

def check_tensor_roundtrip():
    rng = np.random.default_rng(2)
    cases = []
    for dtype in (np.float32, np.float64, np.uint16):
        for ndim in range(1, 6):
            shape = tuple(int(rng.integers(1, 5)) for _ in range(ndim))
            if dtype is np.uint16:
                arr = rng.integers(0, 2 ** 16, size=shape).astype(dtype)
            else:
                arr = rng.normal(size=shape).astype(dtype)
            cases.append(arr)
    with tempfile.TemporaryDirectory() as tmp:
        for i, arr in enumerate(cases):
            path = f"{tmp}/t{i}.stmt"
            io.write_tensor(arr, path)
            back = io.read_tensor(path)
            if back.dtype != arr.dtype or back.shape != arr.shape:
                return False, f"case {i}: dtype/shape changed"
            if not np.array_equal(back, arr):
                return False, f"case {i}: values changed"
            io.write_tensor(back, f"{tmp}/u{i}.stmt")
            if open(path, "rb").read() != open(f"{tmp}/u{i}.stmt", "rb").read():
                return False, f"case {i}: bytes differ after rewrite"
    return True, f"{len(cases)} tensors round-tripped bit-exactly"


CRITERIA = [
    ("1 gradient oracle", check_gradient_oracle),
    ("2 synthetic training", check_synthetic_training),
    ("3 attention invariants", check_attention_invariants),
    ("4 metric oracles", check_metric_oracles),
    ("5 auc-percentile", check_auc_percentile),
    ("6 fixation formulas", check_fixation_formulas),
    ("7 panoptic pipeline", check_panoptic_pipeline),
    ("8 ks p-value", check_ks_pvalue),
    ("9 study tooling", check_study_tooling),
    ("tensor round-trip", check_tensor_roundtrip),
]


def run_all(echo=print):
    """Run every check; returns a list of result dicts."""
    results = []
    for name, fn in CRITERIA:
        t0 = time.time()
        try:
            passed, detail = fn()
        except Exception as exc:  # report, don't crash the suite
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        elapsed = time.time() - t0
        results.append({"criterion": name, "passed": bool(passed),
                        "detail": detail, "seconds": round(elapsed, 2)})
        if echo:
            status = "PASS" if passed else "FAIL"
            echo(f"[{status}] {name}: {detail}")
    return results
