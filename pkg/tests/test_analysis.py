import numpy as np
import pytest

from attnmem.analysis import (
    WeightedLabelDistribution,
    assign_groups,
    group_memorability_distributions,
    label_presence,
    nn_audit,
    quantile_label_frequencies,
    resize_labels_nearest,
    stuff_things_cumulative,
    temporal_profile,
    weighted_label_distribution,
)
from attnmem.errors import DimMismatch, LabelAbsent, MixedT, RasterMismatch, \
    UnknownLabelId
from attnmem.io import LabelEntry, LabelTable, MemRecord


def _table(n_stuff=2, n_things=2):
    entries = [LabelEntry(i + 1, f"stuff{i}", False) for i in range(n_stuff)]
    entries += [LabelEntry(100 + i, f"thing{i}", True) for i in range(n_things)]
    return LabelTable(entries)


# --- weighted distribution -----------------------------------------------------

def test_single_label_world():
    table = LabelTable([LabelEntry(3, "sky", False)])
    labels = np.full((224, 224), 3, dtype=np.uint16)
    sal = np.random.default_rng(0).random((224, 224))
    dist = weighted_label_distribution([labels], [sal], [sal], table)
    assert dist.pixel_prob[3] == 1.0
    assert dist.attn_prob[3] == 1.0
    assert dist.attn_ratio[3] == 1.0


def test_half_split_uniform_saliency():
    table = _table(1, 1)
    labels = np.full((224, 224), 1, dtype=np.uint16)
    labels[:, 112:] = 100
    uniform = np.full((224, 224), 0.5)
    dist = weighted_label_distribution([labels], [uniform], [uniform], table)
    for lid in (1, 100):
        assert dist.pixel_prob[lid] == pytest.approx(0.5)
        assert dist.attn_ratio[lid] == pytest.approx(1.0)


def test_distribution_matches_pixel_loop_oracle():
    rng = np.random.default_rng(1)
    table = _table(2, 1)
    ids = [1, 2, 100]
    frames = [rng.choice(ids, size=(224, 224)).astype(np.uint16) for _ in range(3)]
    attn = [rng.random((224, 224)) for _ in range(3)]
    gaze = [rng.random((224, 224)) for _ in range(3)]
    dist = weighted_label_distribution(frames, attn, gaze, table)

    pix = {i: 0.0 for i in ids}
    asum = {i: 0.0 for i in ids}
    gsum = {i: 0.0 for i in ids}
    for lab, a, g in zip(frames, attn, gaze):
        for y in range(224):
            for x in range(224):
                lid = int(lab[y, x])
                pix[lid] += 1
                asum[lid] += a[y, x]
                gsum[lid] += g[y, x]
    for lid in ids:
        assert dist.pixel_prob[lid] == pytest.approx(pix[lid] / sum(pix.values()),
                                                     abs=1e-12)
        assert dist.attn_prob[lid] == pytest.approx(asum[lid] / sum(asum.values()),
                                                    abs=1e-12)
        assert dist.gaze_prob[lid] == pytest.approx(gsum[lid] / sum(gsum.values()),
                                                    abs=1e-12)
    for vec in (dist.pixel_prob, dist.attn_prob, dist.gaze_prob):
        assert abs(sum(vec.values()) - 1.0) < 1e-9


def test_label_resize_nearest_preserves_ids():
    labels = np.array([[1, 2], [3, 4]], dtype=np.uint16)
    big = resize_labels_nearest(labels, 224, 224)
    assert set(np.unique(big)) == {1, 2, 3, 4}
    assert big[0, 0] == 1 and big[0, -1] == 2 and big[-1, 0] == 3


def test_distribution_errors():
    table = _table(1, 0)
    labels = np.full((10, 10), 1, dtype=np.uint16)
    sal224 = np.ones((224, 224))
    with pytest.raises(RasterMismatch):
        weighted_label_distribution([labels], [np.ones((10, 10))], [sal224], table)
    unknown = np.full((224, 224), 9, dtype=np.uint16)
    with pytest.raises(UnknownLabelId):
        weighted_label_distribution([unknown], [sal224], [sal224], table)


# --- groups -------------------------------------------------------------------------

def _dist(ratios, pixel=None):
    labels = sorted(ratios)
    pixel = pixel or {k: 1.0 / len(labels) for k in labels}
    attn = {k: ratios[k] * pixel[k] for k in labels}
    return WeightedLabelDistribution(pixel, attn, attn, dict(ratios), dict(ratios))


def test_group_thresholds():
    dist = _dist({1: 1.0, 2: 1.6, 3: 0.49, 4: 0.65, 5: 1.2, 6: 0.8, 7: 1.21,
                  8: 1.5})
    groups = assign_groups(dist).attn
    assert groups[1] == "G2"
    assert groups[2] == "G1"
    assert groups[3] == "G3"
    assert groups[4] == "ungrouped"
    assert groups[5] == "G2" and groups[6] == "G2"  # band edges inclusive
    assert groups[7] == "ungrouped"
    assert groups[8] == "ungrouped"  # 1.5 itself is not "over 1.5x"


def test_zero_pixel_labels_ungrouped():
    dist = WeightedLabelDistribution(
        {1: 1.0, 2: 0.0}, {1: 1.0, 2: 0.0}, {1: 1.0, 2: 0.0}, {1: 1.0}, {1: 1.0}
    )
    assert assign_groups(dist).attn[2] == "ungrouped"


def test_group_scale_invariance():
    rng = np.random.default_rng(2)
    table = _table(2, 2)
    frames = [rng.choice([1, 2, 100, 101], size=(224, 224)).astype(np.uint16)]
    sal = [rng.random((224, 224))]
    base = assign_groups(
        weighted_label_distribution(frames, sal, sal, table)
    )
    scaled = assign_groups(
        weighted_label_distribution(frames, [7.7 * sal[0]], [7.7 * sal[0]], table)
    )
    assert base.attn == scaled.attn and base.gaze == scaled.gaze


# --- group memorability / KS ------------------------------------------------------------

def test_group_distributions_with_planted_shift():
    table = _table(3, 0)  # stuff labels 1, 2, 3
    groups = {1: "G1", 2: "G2", 3: "G3"}
    rng = np.random.default_rng(3)
    presence = {}
    records = []
    for i in range(12):  # G1 videos: label 1 + 2, shifted scores
        vid = f"hi{i}"
        presence[vid] = {1}
        records.append(MemRecord(vid, 0.62 + 0.01 * i, "val"))
    for i in range(12):
        vid = f"lo{i}"
        presence[vid] = {2, 3}
        records.append(MemRecord(vid, 0.38 + 0.01 * i, "val"))
    out = group_memorability_distributions(groups, presence, records, table)
    stuff = out["stuff"]
    assert len(stuff["distributions"]["G1"]) == 12
    assert stuff["ks"]["G1_vs_G2"]["p"] < 0.01
    assert stuff["empty_groups"] == []
    assert out["things"]["empty_groups"] == ["G1", "G2", "G3"]
    assert out["things"]["ks"]["G1_vs_G2"] is None  # EmptyGroup marker


def test_group_distributions_identical_populations():
    table = _table(2, 0)
    groups = {1: "G1", 2: "G2"}
    presence = {f"v{i}": {1, 2} for i in range(10)}
    records = [MemRecord(f"v{i}", i / 10, "val") for i in range(10)]
    out = group_memorability_distributions(groups, presence, records, table)
    assert out["stuff"]["ks"]["G1_vs_G2"]["D"] == 0.0
    assert out["stuff"]["ks"]["G1_vs_G2"]["p"] == 1.0


# --- presence / quantile frequencies ------------------------------------------------------

def test_label_presence_threshold():
    table = _table(2, 0)
    frame = np.full((100, 100), 1, dtype=np.uint16)
    frame[0, :9] = 2  # 9 pixels < 0.1% of 10000
    presence = label_presence({"v0": [frame]}, table)
    assert presence["v0"] == {1}
    frame[0, :10] = 2  # exactly 0.1%
    assert label_presence({"v0": [frame]}, table)["v0"] == {1, 2}


def test_quantile_label_frequencies_cases():
    table = _table(2, 0)
    records = [MemRecord(f"v{i}", i / 8, "val") for i in range(8)]
    presence = {f"v{i}": {1} for i in range(8)}
    for i in (6, 7):
        presence[f"v{i}"].add(2)
    freqs = quantile_label_frequencies(presence, records, n_quantiles=4)
    assert freqs[1] == pytest.approx([0.25] * 4)
    assert freqs[2] == pytest.approx([0, 0, 0, 1.0])
    with pytest.raises(LabelAbsent):
        quantile_label_frequencies(presence, records, 4, labels=[99])


def test_quantile_frequencies_match_counting_oracle():
    rng = np.random.default_rng(4)
    records = [MemRecord(f"v{i}", float(rng.random()), "val") for i in range(20)]
    presence = {r.video_id: {lid for lid in (1, 2, 3) if rng.random() < 0.5} | {9}
                for r in records}
    freqs = quantile_label_frequencies(presence, records, n_quantiles=4)
    from attnmem.metrics import quantile_bins

    bins = quantile_bins({r.video_id: r.score for r in records}, 4)
    for lid, got in freqs.items():
        counts = [sum(1 for v in b if lid in presence[v]) for b in bins]
        total = sum(counts)
        assert got == pytest.approx([c / total for c in counts], abs=1e-12)


# --- stuff/things cumulative ----------------------------------------------------------------

def test_stuff_things_cumulative():
    table = _table(1, 1)
    dist = WeightedLabelDistribution(
        {1: 0.25, 100: 0.75}, {1: 0.4, 100: 0.6}, {1: 0.1, 100: 0.9},
        {1: 1.6, 100: 0.8}, {1: 0.4, 100: 1.2},
    )
    out = stuff_things_cumulative(dist, table)
    assert out["stuff"]["pixel"] == pytest.approx(0.25)
    assert out["things"]["attn"] == pytest.approx(0.6)
    for key in ("pixel", "attn", "gaze"):
        assert out["stuff"][key] + out["things"][key] == pytest.approx(1.0, abs=1e-9)


def test_all_stuff_world():
    table = _table(1, 0)
    dist = WeightedLabelDistribution({1: 1.0}, {1: 1.0}, {1: 1.0}, {1: 1.0}, {1: 1.0})
    out = stuff_things_cumulative(dist, table)
    assert out["stuff"] == {"pixel": 1.0, "attn": 1.0, "gaze": 1.0}


# --- temporal profile --------------------------------------------------------------------------

def test_temporal_profile_against_direct_stats():
    rng = np.random.default_rng(5)
    rows = [rng.dirichlet(np.ones(4)) for _ in range(6)]
    prof = temporal_profile(rows)
    stack = np.stack(rows)
    for i, entry in enumerate(prof):
        assert entry["mean"] == pytest.approx(stack[:, i].mean(), rel=1e-12)
        assert entry["sem"] == pytest.approx(
            stack[:, i].std(ddof=1) / np.sqrt(6), rel=1e-9
        )
    assert sum(e["mean"] for e in prof) == pytest.approx(1.0, abs=1e-6)


def test_temporal_profile_mixed_T():
    with pytest.raises(MixedT):
        temporal_profile([np.ones(3) / 3, np.ones(4) / 4])
    with pytest.raises(MixedT):
        temporal_profile([])


# --- nn audit -----------------------------------------------------------------------------------

def test_nn_exact_duplicate_flagged():
    rng = np.random.default_rng(6)
    train = {f"t{i}": rng.normal(size=8) for i in range(6)}
    val = {"x": train["t3"].copy()}
    records = [MemRecord(k, 0.5, "train") for k in train] + [MemRecord("x", 0.9, "val")]
    rows, summary = nn_audit(train, val, records, k=3)
    assert rows[0].neighbor_ids[0] == "t3"
    assert rows[0].similarities[0] == pytest.approx(1.0, abs=1e-12)
    assert rows[0].leakage_flag
    assert summary["flagged"] == 1


def test_nn_orthogonal_unflagged():
    train = {"t0": np.array([1.0, 0, 0]), "t1": np.array([0, 1.0, 0])}
    val = {"x": np.array([0, 0, 1.0])}
    records = [MemRecord("t0", 0.2, "train"), MemRecord("t1", 0.4, "train"),
               MemRecord("x", 0.6, "val")]
    rows, summary = nn_audit(train, val, records, k=2)
    assert all(abs(s) < 1e-12 for s in rows[0].similarities)
    assert not rows[0].leakage_flag
    assert rows[0].mean_neighbor_score == pytest.approx(0.3)


def test_nn_matches_exhaustive_oracle_and_relabeling():
    rng = np.random.default_rng(7)
    train = {f"t{i:02d}": rng.normal(size=5) for i in range(20)}
    val = {f"v{i}": rng.normal(size=5) for i in range(4)}
    records = [MemRecord(k, float(rng.random()), "train") for k in train]
    records += [MemRecord(k, float(rng.random()), "val") for k in val]
    rows, _ = nn_audit(train, val, records, k=5)
    for row in rows:
        q = val[row.val_video_id]
        sims = {
            t: float(np.dot(q, v) / (np.linalg.norm(q) * np.linalg.norm(v)))
            for t, v in train.items()
        }
        want = sorted(sims, key=lambda t: (-sims[t], t))[:5]
        assert row.neighbor_ids == want
        assert row.similarities == sorted(row.similarities, reverse=True)

    renamed = {f"z{k}": v for k, v in train.items()}
    records2 = [MemRecord(f"z{r.video_id}", r.score, "train")
                for r in records if r.split == "train"]
    records2 += [r for r in records if r.split == "val"]
    rows2, _ = nn_audit(renamed, val, records2, k=5)
    for a, b in zip(rows, rows2):
        assert [f"z{t}" for t in a.neighbor_ids] == b.neighbor_ids
        assert a.similarities == b.similarities


def test_nn_dim_mismatch():
    with pytest.raises(DimMismatch):
        nn_audit({"t": np.ones(3)}, {"v": np.ones(4)}, [])
