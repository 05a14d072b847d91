"""Metrics, splits, fine-tuning, supervised baseline, and ablation tests."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sslse_eeg.autodiff import Tensor
from sslse_eeg.contrastive import PretrainConfig
from sslse_eeg.errors import (
    EmptyMatrix,
    LabelOutOfRange,
    MissingLabels,
    SingleClassSplit,
)
from sslse_eeg.evaluate import (
    ABLATION_CONDITIONS,
    AblationResult,
    ConfusionMatrix,
    FinetuneConfig,
    MetricsReport,
    ablation_table,
    compute_metrics,
    dataset_labels,
    embed_dataset,
    finetune,
    images_to_views,
    predict,
    run_ablation,
    run_transfer,
    stratified_budget,
    stratified_split,
    train_linear_head,
    train_supervised,
)
from sslse_eeg.imaging import EegImage
from sslse_eeg.model import EncoderConfig, head_params, init_params


def brute_metrics(true, pred, k):
    """Independent recount straight from the pairs."""
    n = len(true)
    acc = sum(int(t == p) for t, p in zip(true, pred)) / n
    per = []
    for c in range(k):
        tp = sum(1 for t, p in zip(true, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(true, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(true, pred) if t == c and p != c)
        d = 2 * tp + fp + fn
        per.append(0.0 if d == 0 else 2 * tp / d)
    return acc, per, sum(per) / k


# --- metrics ------------------------------------------------------------------

def test_diagonal_matrix_perfect_scores():
    cm = ConfusionMatrix(np.diag([3, 4, 5]))
    r = compute_metrics(cm)
    assert r.accuracy == 1.0 and r.macro_f1 == 1.0
    assert r.per_class_f1 == [1.0, 1.0, 1.0] and r.n == 12


def test_binary_worked_example():
    # positive class 1: TP=2, FP=1, FN=1, TN=6
    cm = ConfusionMatrix([[6, 1], [1, 2]])
    r = compute_metrics(cm)
    assert r.accuracy == 8 / 10
    assert r.per_class_f1[1] == pytest.approx(2 / 3, abs=1e-12)
    assert r.per_class_f1[1] == pytest.approx(0.6667, abs=5e-5)


def test_three_class_worked_example():
    cm = ConfusionMatrix([[2, 0, 0], [1, 1, 0], [0, 0, 1]])
    r = compute_metrics(cm)
    assert r.accuracy == 4 / 5
    assert r.per_class_f1 == pytest.approx([0.8, 2 / 3, 1.0], abs=1e-12)
    assert r.macro_f1 == pytest.approx((0.8 + 2 / 3 + 1.0) / 3, abs=1e-12)
    assert r.macro_f1 == pytest.approx(0.8222, abs=5e-5)


def test_absent_class_contributes_zero_f1():
    cm = ConfusionMatrix([[4, 0], [0, 0]])
    r = compute_metrics(cm)
    assert r.accuracy == 1.0
    assert r.per_class_f1 == [1.0, 0.0]
    assert r.macro_f1 == 0.5


@settings(deadline=None, max_examples=60)
@given(st.integers(2, 5).flatmap(
    lambda k: st.tuples(
        st.just(k),
        st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)),
                 min_size=1, max_size=60))))
def test_metrics_match_brute_recount(case):
    k, pairs = case
    true = [t for t, _ in pairs]
    pred = [p for _, p in pairs]
    cm = ConfusionMatrix.from_pairs(true, pred, k)
    r = compute_metrics(cm)
    acc, per, macro = brute_metrics(true, pred, k)
    assert r.accuracy == pytest.approx(acc, abs=1e-12)
    assert r.per_class_f1 == pytest.approx(per, abs=1e-12)
    assert r.macro_f1 == pytest.approx(macro, abs=1e-12)
    assert r.n == len(pairs)


def test_confusion_matrix_identities():
    rng = np.random.default_rng(0)
    true = rng.integers(0, 4, size=50)
    pred = rng.integers(0, 4, size=50)
    cm = ConfusionMatrix.from_pairs(true, pred, 4)
    assert cm.total == 50
    tp = np.diag(cm.counts)
    for c in range(4):
        assert tp[c] + (cm.counts[c].sum() - tp[c]) == cm.counts[c].sum()
        assert tp[c] + (cm.counts[:, c].sum() - tp[c]) == cm.counts[:, c].sum()
        assert cm.counts[c].sum() == (true == c).sum()
        assert cm.counts[:, c].sum() == (pred == c).sum()


def test_empty_matrix_rejected():
    with pytest.raises(EmptyMatrix):
        compute_metrics(ConfusionMatrix(np.zeros((3, 3), dtype=np.int64)))


def test_from_pairs_rejects_bad_labels():
    with pytest.raises(LabelOutOfRange):
        ConfusionMatrix.from_pairs([0, 2], [0, 1], num_classes=2)
    with pytest.raises(LabelOutOfRange):
        ConfusionMatrix.from_pairs([0, -1], [0, 1], num_classes=2)


def test_report_json_shape():
    r = MetricsReport(condition="ssl_se", accuracy=0.9, macro_f1=0.85,
                      per_class_f1=[0.8, 0.9], n=20, seed=3)
    import json
    decoded = json.loads(r.to_json())
    assert set(decoded) == {"condition", "accuracy", "macro_f1",
                            "per_class_f1", "n", "seed"}
    assert decoded["condition"] == "ssl_se" and decoded["n"] == 20


# --- splits and budgets -----------------------------------------------------------

def test_stratified_split_partition():
    labels = np.array([0] * 10 + [1] * 10)
    train, test = stratified_split(labels, 0.2, seed=0)
    assert len(test) == 4 and len(train) == 16
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(20))
    assert (labels[test] == 0).sum() == 2 and (labels[test] == 1).sum() == 2


def test_stratified_split_deterministic():
    labels = np.array([0, 1] * 15)
    a = stratified_split(labels, 0.25, seed=7)
    b = stratified_split(labels, 0.25, seed=7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = stratified_split(labels, 0.25, seed=8)
    assert not np.array_equal(a[1], c[1])


def test_stratified_split_single_class_raises():
    labels = np.array([0] * 4 + [1])
    # class 1 has one sample: it lands in test, leaving train single-class
    with pytest.raises(SingleClassSplit):
        stratified_split(labels, 0.5, seed=0)


def test_stratified_budget_exact_count():
    labels = np.array([0] * 70 + [1] * 30)
    for budget in (10, 33, 99):
        idx = stratified_budget(labels, budget, seed=0)
        assert len(idx) == budget
        assert len(np.unique(idx)) == budget
    idx = stratified_budget(labels, 10, seed=0)
    assert (labels[idx] == 0).sum() == 7 and (labels[idx] == 1).sum() == 3


def test_stratified_budget_bounds():
    labels = np.array([0, 1])
    with pytest.raises(ValueError):
        stratified_budget(labels, 0, seed=0)
    with pytest.raises(ValueError):
        stratified_budget(labels, 3, seed=0)


# --- datasets ----------------------------------------------------------------------

def tiny_enc(se=True, classes=2):
    return EncoderConfig(stage_channels=(2, 4), se_enabled=se, embedding_dim=4,
                         projection_hidden=4, projection_dim=2,
                         num_classes=classes, input_hw=16, stem_kernel=2,
                         stem_stride=2)


def labeled_dataset(count, seed=0, hw=16, classes=2, spread=10.0):
    """Intensity-coded classes: class c has mean brightness 40 + 175c/(K-1)."""
    rng = np.random.default_rng(seed)
    images = []
    for i in range(count):
        c = i % classes
        base = 40 + (175 * c) // max(1, classes - 1)
        arr = np.clip(rng.normal(base, spread, size=(hw, hw, 3)),
                      0, 255).astype(np.uint8)
        images.append(EegImage(pixels=arr, label=c, source_id="synthetic",
                               window_index=i))
    return images


def test_dataset_labels_missing():
    images = labeled_dataset(4)
    images[2] = EegImage(pixels=images[2].pixels, label=None,
                         source_id="synthetic", window_index=2)
    with pytest.raises(MissingLabels):
        dataset_labels(images)


def test_images_to_views_scaling():
    images = labeled_dataset(3)
    views = images_to_views(images)
    assert views.shape == (3, 3, 16, 16) and views.dtype == np.float32
    assert views.min() >= 0.0 and views.max() <= 1.0
    np.testing.assert_allclose(
        views[0, :, 0, 0], images[0].pixels[0, 0].astype(np.float32) / 255.0)


def test_embed_dataset_batch_invariance():
    images = labeled_dataset(7)
    cfg = tiny_enc()
    params = init_params(cfg, seed=0)
    a = embed_dataset(images, cfg, params, batch_size=64)
    b = embed_dataset(images, cfg, params, batch_size=3)
    assert a.shape == (7, 4)
    assert a.tobytes() == b.tobytes()


# --- head training -------------------------------------------------------------------

def test_linearly_separable_head_reaches_perfect_accuracy():
    rng = np.random.default_rng(0)
    k, n_per = 3, 20
    emb = np.concatenate([
        np.eye(k)[c] * 4.0 + rng.normal(0, 0.05, size=(n_per, k))
        for c in range(k)])
    labels = np.repeat(np.arange(k), n_per)
    train, test = stratified_split(labels, 0.2, seed=1)
    head = {"head.w": Tensor(np.zeros((k, k), dtype=np.float32), requires_grad=True),
            "head.b": Tensor(np.zeros(k, dtype=np.float32), requires_grad=True)}
    train_linear_head(emb[train], labels[train], head,
                      epochs=50, lr=1e-2, batch_size=16, seed=0)
    pred = predict(emb[test], head)
    cm = ConfusionMatrix.from_pairs(labels[test], pred, k)
    assert compute_metrics(cm).accuracy == 1.0


def test_finetune_freezes_encoder_bytes():
    images = labeled_dataset(20)
    cfg = tiny_enc()
    params = init_params(cfg, seed=1)
    before = {k: v.data.tobytes() for k, v in params.items()
              if not k.startswith("head.")}
    head_before = params["head.w"].data.tobytes()
    _, report = finetune(params, images,
                         FinetuneConfig(epochs=3, seed=0), cfg)
    for name, blob in before.items():
        assert params[name].data.tobytes() == blob, name
    assert params["head.w"].data.tobytes() != head_before
    assert report.n >= 2


def test_zero_epoch_zero_head_predicts_class_zero():
    images = labeled_dataset(20)
    cfg = tiny_enc()
    params = init_params(cfg, seed=2)
    params["head.w"].data = np.zeros_like(params["head.w"].data)
    params["head.b"].data = np.zeros_like(params["head.b"].data)
    _, report = finetune(params, images,
                         FinetuneConfig(epochs=0, seed=0), cfg)
    # balanced data, all predictions are class 0
    assert report.accuracy == pytest.approx(0.5, abs=1e-12)
    assert report.per_class_f1[1] == 0.0


def test_finetune_single_class_raises():
    images = [img for img in labeled_dataset(10) if img.label == 0]
    cfg = tiny_enc()
    params = init_params(cfg, seed=0)
    with pytest.raises(SingleClassSplit):
        finetune(params, images, FinetuneConfig(epochs=1), cfg)


def test_finetune_label_out_of_range():
    images = labeled_dataset(10, classes=3)
    cfg = tiny_enc(classes=2)
    params = init_params(cfg, seed=0)
    with pytest.raises(LabelOutOfRange):
        finetune(params, images, FinetuneConfig(epochs=1), cfg)


def test_finetune_exact_labeled_count():
    images = labeled_dataset(40)
    cfg = tiny_enc()
    params = init_params(cfg, seed=0)
    ft = FinetuneConfig(labeled_count=10, epochs=1, seed=0)
    _, report = finetune(params, images, ft, cfg)
    # budget 10, stratified 80/20: held-out 2, train 8
    assert report.n == 2
    assert stratified_budget(dataset_labels(images), 10, 0).size == 10


# --- supervised baseline ----------------------------------------------------------------

def test_supervised_deterministic():
    images = labeled_dataset(16)
    cfg = tiny_enc()
    ft = FinetuneConfig(epochs=2, seed=4, batch_size=8)
    p1, r1 = train_supervised(images, ft, cfg)
    p2, r2 = train_supervised(images, ft, cfg)
    assert r1 == r2
    for name in p1:
        assert p1[name].data.tobytes() == p2[name].data.tobytes()


def test_supervised_separable_accuracy():
    images = labeled_dataset(200, seed=5, spread=4.0)
    cfg = tiny_enc()
    ft = FinetuneConfig(epochs=20, seed=0, batch_size=32, lr=3e-3)
    _, report = train_supervised(images, ft, cfg)
    assert report.n == 40
    assert report.accuracy >= 0.95


def test_supervised_single_class_rejected():
    images = [img for img in labeled_dataset(10) if img.label == 0]
    with pytest.raises(SingleClassSplit):
        train_supervised(images, FinetuneConfig(epochs=1), tiny_enc())


# --- ablation and transfer ---------------------------------------------------------------

def small_pretrain_cfg(enc, **kw):
    defaults = dict(epochs=2, batch_size=8, lr=1e-3, seed=0,
                    checkpoint_every=0, encoder=enc)
    defaults.update(kw)
    return PretrainConfig(**defaults)


def test_ablation_grid_shape_and_shared_split():
    images = labeled_dataset(24, seed=6)
    enc = tiny_enc()
    result = run_ablation(images, FinetuneConfig(epochs=2, seed=0, batch_size=8),
                          small_pretrain_cfg(enc))
    assert isinstance(result, AblationResult)
    assert [r.condition for r in result.reports] == list(ABLATION_CONDITIONS)
    ns = {r.n for r in result.reports}
    assert ns == {len(result.held_out)}
    assert "condition" in result.table and "ssl_no_se" in result.table
    lines = result.table.splitlines()
    assert len(lines) == 2 + 4


def test_ablation_table_alignment():
    reports = [MetricsReport("ssl_se", 0.9, 0.89, [0.9, 0.88], 40, 0),
               MetricsReport("supervised_no_se", 0.8, 0.79, [0.8, 0.78], 40, 0)]
    table = ablation_table(reports)
    lines = table.splitlines()
    assert all(len(line) == len(lines[0]) for line in lines[1:])


def test_transfer_reduces_to_plain_pipeline_when_corpora_match():
    images = labeled_dataset(16, seed=7)
    enc = tiny_enc()
    pcfg = small_pretrain_cfg(enc)
    ft = FinetuneConfig(epochs=2, seed=0, batch_size=8)

    from sslse_eeg.contrastive import pretrain
    params, _ = pretrain(images, pcfg)
    _, direct = finetune(params, images, ft, enc, condition="transfer")

    via_transfer = run_transfer(images, images, ft, pcfg)
    assert via_transfer == direct
