"""Ranking and retrieval statistics: oracles for mAP, rho, tau-b, p-values."""

import numpy as np
import pytest

from proxyrank import (
    AccuracyTable,
    SearchParams,
    ValidationError,
    kendall_tau_b,
    perm_pvalue,
    proxy_quality,
    reid_eval,
    spearman,
)
from proxyrank.corpus import ImageRecord
from proxyrank.rankeval import RANK_KS
from proxyrank.search import ProxySet


def make_proxy(entries):
    """Builds a ProxySet from (image_id, identity, camera) triples."""
    records = tuple(
        ImageRecord(
            image_id=image_id,
            identity_id=f"d/{ident}",
            dataset_name="d",
            camera_id=camera,
            row_index=i,
        )
        for i, (image_id, ident, camera) in enumerate(entries)
    )
    seen = {}
    for rec in records:
        seen.setdefault(rec.identity_id, None)
    return ProxySet(identity_ids=tuple(seen), records=records, params=SearchParams())


def reid_oracle(features, proxy):
    """Independent implementation of the retrieval protocol, plain loops."""
    feats = np.asarray(features, dtype=np.float64)
    normed = feats / np.maximum(np.linalg.norm(feats, axis=1, keepdims=True), 1e-12)
    idents = [r.identity_id for r in proxy.records]
    cams = [r.camera_id for r in proxy.records]
    names = [r.image_id for r in proxy.records]
    n = len(idents)

    cams_of = {}
    for ident, cam in zip(idents, cams):
        cams_of.setdefault(ident, set()).add(cam)
    best = {}
    for i in range(n):
        if len(cams_of[idents[i]]) < 2:
            continue
        key = (idents[i], cams[i])
        if key not in best or names[i] < names[best[key]]:
            best[key] = i
    queries = [best[k] for k in sorted(best)]

    aps, hits = [], {k: 0 for k in RANK_KS}
    for q in queries:
        gallery = [
            g for g in range(n) if not (idents[g] == idents[q] and cams[g] == cams[q])
        ]
        sims = [float(normed[q] @ normed[g]) for g in gallery]
        order = sorted(range(len(gallery)), key=lambda i: (-sims[i], i))
        precisions, found = [], 0
        first_hit = None
        for rank, pos in enumerate(order, start=1):
            if idents[gallery[pos]] == idents[q]:
                found += 1
                precisions.append(found / rank)
                if first_hit is None:
                    first_hit = rank
        aps.append(sum(precisions) / len(precisions))
        for k in RANK_KS:
            if first_hit is not None and first_hit <= k:
                hits[k] += 1
    return (
        sum(aps) / len(aps),
        {k: hits[k] / len(queries) for k in RANK_KS},
        len(queries),
    )


# ---------------------------------------------------------------------------
# reid_eval


def test_reid_perfect_retrieval():
    proxy = make_proxy(
        [
            ("a_c0", "a", 0),
            ("a_c1", "a", 1),
            ("b_c0", "b", 0),  # single camera: never a query
        ]
    )
    features = np.array([[1.0, 0.0], [1.0, 0.01], [0.0, 1.0]])
    result = reid_eval(features, proxy)
    assert result.n_queries == 2  # (a, cam0) and (a, cam1)
    assert result.map == 1.0
    assert result.rank_k[1] == 1.0
    assert result.rank_k[5] == 1.0


def test_reid_match_ranked_second_gives_half():
    proxy = make_proxy(
        [
            ("a_c0", "a", 0),
            ("a_c1", "a", 1),
            ("c_c2", "c", 2),  # a decoy closer to both query views
        ]
    )
    r = 1.0 / np.sqrt(2.0)
    features = np.array([[1.0, 0.0], [0.0, 1.0], [r, r]])
    result = reid_eval(features, proxy)
    assert result.map == 0.5
    assert result.rank_k[1] == 0.0
    assert result.rank_k[5] == 1.0


def test_reid_excludes_same_identity_same_camera():
    # a second same-camera image of the query identity must not pollute the
    # gallery, even when it would rank first
    proxy = make_proxy(
        [
            ("a_c0_0", "a", 0),
            ("a_c0_1", "a", 0),
            ("a_c1_0", "a", 1),
            ("b_c1_0", "b", 1),
        ]
    )
    features = np.array([[1.0, 0.0], [1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    result = reid_eval(features, proxy)
    got_map, got_rank, got_q = reid_oracle(features, proxy)
    assert result.map == pytest.approx(got_map, abs=1e-12)
    assert result.n_queries == got_q


def test_reid_lexicographic_query_choice():
    # query for (a, cam0) must be image id "a_A", not "a_B"
    proxy = make_proxy(
        [
            ("a_B", "a", 0),
            ("a_A", "a", 0),
            ("a_c1", "a", 1),
        ]
    )
    # a_A points at the cross-camera match; a_B points away.  Retrieval is
    # perfect only if the lexicographically smaller image is the query.
    features = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    result = reid_eval(features, proxy)
    assert result.map == 1.0


def test_reid_stable_tie_break():
    # match and decoy have exactly the query's similarity; the earlier
    # gallery row must win, which here is the cross-camera match
    proxy = make_proxy(
        [
            ("a_c0", "a", 0),
            ("a_c1", "a", 1),
            ("c_c0", "c", 0),
            ("c_c1", "c", 1),
        ]
    )
    features = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    result = reid_eval(features, proxy)
    oracle_map, oracle_rank, _ = reid_oracle(features, proxy)
    assert result.map == pytest.approx(oracle_map, abs=1e-12)
    assert result.rank_k == oracle_rank


def test_reid_random_instance_matches_oracle():
    rng = np.random.default_rng(21)
    for trial in range(20):
        entries = []
        for i in range(12):
            ident = f"id{i % 3}"
            camera = int(rng.integers(0, 2))
            entries.append((f"im{rng.integers(0, 10 ** 6):06d}_{i}", ident, camera))
        if len({(e[1], e[2]) for e in entries}) < 4:
            continue
        proxy = make_proxy(entries)
        features = rng.standard_normal((12, 5))
        try:
            result = reid_eval(features, proxy)
        except ValidationError:
            continue  # no identity spanned two cameras in this draw
        want_map, want_rank, want_q = reid_oracle(features, proxy)
        assert result.map == pytest.approx(want_map, abs=1e-12)
        assert result.n_queries == want_q
        for k in RANK_KS:
            assert result.rank_k[k] == pytest.approx(want_rank[k], abs=1e-12)


def test_reid_removing_distractor_never_hurts():
    rng = np.random.default_rng(22)
    base = [
        ("a_c0", "a", 0),
        ("a_c1", "a", 1),
        ("x0", "x", 2),
        ("x1", "x", 2),
        ("x2", "x", 2),
    ]
    features = rng.standard_normal((5, 4))
    full = reid_eval(features, make_proxy(base))
    # drop one single-camera distractor; queries are unchanged
    slim = reid_eval(features[[0, 1, 2, 3]], make_proxy(base[:4]))
    assert slim.map >= full.map - 1e-12


def test_reid_validation():
    proxy = make_proxy([("a_c0", "a", 0), ("a_c1", "a", 1)])
    with pytest.raises(ValidationError):
        reid_eval(np.zeros(4), proxy)
    with pytest.raises(ValidationError) as err:
        reid_eval(np.zeros((3, 2)), proxy)
    assert "2 images" in str(err.value)

    no_cam = make_proxy([("a_0", "a", None), ("a_1", "a", None)])
    with pytest.raises(ValidationError) as err:
        reid_eval(np.zeros((2, 2)), no_cam)
    assert "camera_id required" in str(err.value)

    single_cam = make_proxy([("a_0", "a", 0), ("b_0", "b", 0)])
    with pytest.raises(ValidationError) as err:
        reid_eval(np.ones((2, 2)), single_cam)
    assert "no valid query" in str(err.value)


# ---------------------------------------------------------------------------
# spearman / kendall


def rank_oracle(values):
    """Midranks via pairwise comparison counts."""
    values = list(values)
    out = []
    for v in values:
        below = sum(1 for u in values if u < v)
        ties = sum(1 for u in values if u == v)
        out.append(below + (ties + 1) / 2.0)
    return np.asarray(out)


def test_spearman_monotone_and_reverse():
    x = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    assert spearman(x, np.exp(x)) == pytest.approx(1.0, abs=1e-12)
    assert spearman(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_spearman_matches_rank_pearson_oracle():
    rng = np.random.default_rng(23)
    for _ in range(50):
        x = rng.integers(0, 8, size=30).astype(float)  # plenty of ties
        y = rng.integers(0, 8, size=30).astype(float)
        rx = rank_oracle(x) - rank_oracle(x).mean()
        ry = rank_oracle(y) - rank_oracle(y).mean()
        denom = np.sqrt(float(rx @ rx) * float(ry @ ry))
        if denom == 0.0:
            continue
        want = float(rx @ ry) / denom
        assert spearman(x, y) == pytest.approx(want, abs=1e-12)


def test_kendall_small_oracles():
    assert kendall_tau_b([1, 2, 3], [1, 2, 3]) == 1.0
    assert kendall_tau_b([1, 2, 3], [3, 2, 1]) == -1.0
    # one discordant pair of three: tau = (2 - 1) / 3
    assert kendall_tau_b([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-15)


def pair_count_oracle(x, y):
    n = len(x)
    c = d = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = int(x[i] > x[j]) - int(x[i] < x[j])
            dy = int(y[i] > y[j]) - int(y[i] < y[j])
            if dx * dy > 0:
                c += 1
            elif dx * dy < 0:
                d += 1
            elif dx == 0 and dy != 0:
                tx += 1
            elif dy == 0 and dx != 0:
                ty += 1
    return c, d, tx, ty


def test_kendall_matches_pair_count_oracle():
    rng = np.random.default_rng(24)
    for _ in range(500):
        n = int(rng.integers(3, 51))
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.integers(0, 6, size=n).astype(float)
        c, d, tx, ty = pair_count_oracle(x, y)
        if c + d + tx == 0 or c + d + ty == 0:
            continue
        want = (c - d) / np.sqrt(float(c + d + tx) * float(c + d + ty))
        assert kendall_tau_b(x, y) == want


def test_rank_stats_monotone_transform_invariance():
    rng = np.random.default_rng(25)
    x = rng.standard_normal(25)
    y = rng.standard_normal(25)
    fx = np.exp(2.0 * x) + 5.0  # strictly increasing
    assert spearman(fx, y) == pytest.approx(spearman(x, y), abs=1e-12)
    assert kendall_tau_b(fx, y) == kendall_tau_b(x, y)


def test_rank_stats_antisymmetry_exact():
    rng = np.random.default_rng(26)
    x = rng.standard_normal(20)  # tie-free almost surely
    y = rng.standard_normal(20)
    assert spearman(x, -y) == -spearman(x, y)
    assert kendall_tau_b(x, -y) == -kendall_tau_b(x, y)


def test_rank_stats_validation():
    with pytest.raises(ValidationError):
        spearman([1.0, 2.0], [1.0])
    with pytest.raises(ValidationError):
        spearman([1.0], [1.0])
    with pytest.raises(ValidationError):
        spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        kendall_tau_b([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        spearman([np.nan, 1.0, 2.0], [1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# permutation p-values


def test_perm_pvalue_identity_mapping_is_minimal():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(20)
    assert perm_pvalue(x, x, "rho", n_perm=999, seed=0) == pytest.approx(1 / 1000)
    assert perm_pvalue(x, x, "tau", n_perm=999, seed=0) == pytest.approx(1 / 1000)


def test_perm_pvalue_deterministic():
    rng = np.random.default_rng(27)
    x = rng.standard_normal(15)
    y = np.sin(x)
    a = perm_pvalue(x, y, "tau", n_perm=99, seed=7)
    b = perm_pvalue(x, y, "tau", n_perm=99, seed=7)
    assert a == b


def test_perm_pvalue_rho_matches_slow_path():
    # the vectorized rho permutation path must agree with per-permutation
    # recomputation through the public spearman function
    rng = np.random.default_rng(28)
    x = rng.standard_normal(12)
    y = rng.standard_normal(12)
    n_perm, seed = 199, 3
    fast = perm_pvalue(x, y, "rho", n_perm=n_perm, seed=seed)
    observed = spearman(x, y)
    gen = np.random.default_rng(seed)
    count = 0
    for _ in range(n_perm):
        perm = gen.permutation(12)
        if abs(spearman(x, y[perm])) >= abs(observed) - 1e-12:
            count += 1
    assert fast == pytest.approx((1 + count) / (n_perm + 1))


def test_perm_pvalue_calibration_under_null():
    hits = 0
    for t in range(50):
        r = np.random.default_rng(1000 + t)
        a = r.uniform(size=30)
        b = r.uniform(size=30)
        if perm_pvalue(a, b, "rho", n_perm=999, seed=t) < 0.05:
            hits += 1
    assert 0.0 <= hits / 50 <= 0.16


def test_perm_pvalue_validation():
    x = np.arange(10.0)
    with pytest.raises(ValidationError):
        perm_pvalue(x, x, "pearson")
    with pytest.raises(ValidationError):
        perm_pvalue(x, x, "rho", n_perm=50)


# ---------------------------------------------------------------------------
# AccuracyTable and proxy_quality


def table_from(model_ids, columns):
    dataset_ids = tuple(columns)
    values = np.column_stack([columns[d] for d in dataset_ids])
    return AccuracyTable(
        model_ids=tuple(model_ids), dataset_ids=dataset_ids, values=values
    )


def test_accuracy_table_csv_round_trip(tmp_path):
    table = table_from(
        ["m1", "m2", "m3"],
        {"proxy": np.array([0.5, 0.25, 0.75]), "ref": np.array([0.4, 0.3, 0.9])},
    )
    path = tmp_path / "acc.csv"
    table.write_csv(path)
    back = AccuracyTable.read_csv(path)
    assert back.model_ids == table.model_ids
    assert back.dataset_ids == table.dataset_ids
    assert np.array_equal(back.values, table.values)


def test_accuracy_table_validation(tmp_path):
    with pytest.raises(ValidationError):
        table_from(["m1"], {"a": np.array([1.5])})
    with pytest.raises(ValidationError):
        table_from(["m1"], {"a": np.array([np.nan])})
    with pytest.raises(ValidationError):
        AccuracyTable(
            model_ids=("m1",), dataset_ids=("a", "b"), values=np.zeros((1, 1))
        )
    bad = tmp_path / "bad.csv"
    bad.write_text("who,what\nx,0.5\n")
    with pytest.raises(ValidationError) as err:
        AccuracyTable.read_csv(bad)
    assert "model_id" in str(err.value)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("model_id,a\nm1,0.5,0.6\n")
    with pytest.raises(ValidationError):
        AccuracyTable.read_csv(ragged)
    missing = tmp_path / "missing.csv"
    missing.write_text("model_id,a\nm1,zero\n")
    with pytest.raises(ValidationError):
        AccuracyTable.read_csv(missing)


def test_proxy_quality_identical_columns():
    col = np.array([0.1, 0.9, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4])
    table = table_from([f"m{i}" for i in range(8)], {"proxy": col, "ref": col})
    report = proxy_quality(table, "proxy", "ref", n_perm=199, seed=0)
    assert report.spearman_rho == pytest.approx(1.0, abs=1e-12)
    assert report.kendall_tau == pytest.approx(1.0, abs=1e-12)
    assert report.best_on_proxy == report.best_on_reference == "m1"
    assert report.regret == 0.0
    assert report.p_value_rho <= 0.05


def test_proxy_quality_top_two_swap_regret():
    proxy = np.array([0.9, 0.8, 0.1])
    ref = np.array([0.7, 0.75, 0.1])
    table = table_from(["m1", "m2", "m3"], {"proxy": proxy, "ref": ref})
    report = proxy_quality(table, "proxy", "ref", n_perm=99, seed=0)
    assert report.best_on_proxy == "m1"
    assert report.best_on_reference == "m2"
    assert report.regret == pytest.approx(0.75 - 0.7, abs=1e-12)
    assert report.regret >= 0.0


def test_proxy_quality_rescaled_proxy_same_argmax():
    rng = np.random.default_rng(29)
    proxy = rng.uniform(0.2, 0.8, size=10)
    ref = rng.uniform(size=10)
    table = table_from([f"m{i}" for i in range(10)], {"p": proxy, "r": ref})
    squeezed = table_from(
        [f"m{i}" for i in range(10)], {"p": proxy**2, "r": ref}
    )
    a = proxy_quality(table, "p", "r", n_perm=99)
    b = proxy_quality(squeezed, "p", "r", n_perm=99)
    assert a.best_on_proxy == b.best_on_proxy
    assert a.spearman_rho == pytest.approx(b.spearman_rho, abs=1e-12)
    assert a.regret == b.regret


def test_proxy_quality_missing_column():
    table = table_from(["m1", "m2"], {"a": np.array([0.1, 0.2])})
    with pytest.raises(ValidationError) as err:
        proxy_quality(table, "a", "nope", n_perm=99)
    assert "nope" in str(err.value)


def test_quality_report_to_dict():
    col = np.array([0.2, 0.4, 0.6, 0.8, 0.9])
    table = table_from([f"m{i}" for i in range(5)], {"p": col, "r": col[::-1].copy()})
    report = proxy_quality(table, "p", "r", n_perm=99)
    d = report.to_dict()
    assert set(d) == {
        "spearman_rho",
        "kendall_tau",
        "p_value_rho",
        "p_value_tau",
        "best_on_proxy",
        "best_on_reference",
        "regret",
    }
    assert d["spearman_rho"] == pytest.approx(-1.0, abs=1e-12)
    assert -1.0 <= d["kendall_tau"] <= 1.0
