"""Stage-2 evaluation: metrics, frozen-encoder fine-tuning, baselines, ablation.

Budget selection and train/test splitting are stratified and seeded so every
ablation cell sees the same labeled subset and the same held-out indices;
the cells differ only in the factor under study (SE on/off, SSL vs
supervised). Argmax ties break toward the lowest class index, which makes
degenerate cases (zero-initialized head) exact.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    AdamState,
    Tape,
    Tensor,
    adam_step,
    backward,
    softmax_cross_entropy,
    zero_grads,
)
from .contrastive import PretrainConfig, pretrain
from .errors import (
    EmptyDataset,
    EmptyMatrix,
    LabelOutOfRange,
    MissingLabels,
    SingleClassSplit,
)
from .model import (
    EncoderConfig,
    classify,
    encoder_forward,
    encoder_params,
    head_params,
    init_params,
)

SPLIT_STREAM = 0x5917
BUDGET_STREAM = 0xB0D6


# --- confusion matrix and metrics ----------------------------------------------

@dataclass
class ConfusionMatrix:
    """K x K integer counts; rows are true classes, columns predictions."""
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"expected square counts, got shape {c.shape}")
        if (c < 0).any():
            raise ValueError("negative counts")
        self.counts = c

    @classmethod
    def from_pairs(cls, true, pred, num_classes: int) -> "ConfusionMatrix":
        true = np.asarray(true, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if true.shape != pred.shape:
            raise ValueError(f"length mismatch {true.shape} vs {pred.shape}")
        if true.size and (true.min() < 0 or true.max() >= num_classes
                          or pred.min() < 0 or pred.max() >= num_classes):
            raise LabelOutOfRange("labels or predictions outside [0, K)")
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (true, pred), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricsReport:
    condition: str
    accuracy: float
    macro_f1: float
    per_class_f1: list[float]
    n: int
    seed: int

    def to_json(self) -> str:
        return json.dumps({
            "condition": self.condition,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": self.per_class_f1,
            "n": self.n,
            "seed": self.seed,
        }, sort_keys=True)


def compute_metrics(cm: ConfusionMatrix, condition: str = "",
                    seed: int = 0) -> MetricsReport:
    """Accuracy = trace/total; per-class F1 = 2TP/(2TP+FP+FN), macro-averaged.

    All counting stays in integers; division to float happens once per
    quantity, so results are exactly reproducible from the raw pairs.
    """
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise EmptyMatrix("no evaluated samples")
    k = counts.shape[0]
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    per_class = []
    for i in range(k):
        denom = int(2 * tp[i] + fp[i] + fn[i])
        per_class.append(0.0 if denom == 0 else 2 * int(tp[i]) / denom)
    return MetricsReport(
        condition=condition,
        accuracy=int(tp.sum()) / total,
        macro_f1=sum(per_class) / k,
        per_class_f1=per_class,
        n=total,
        seed=seed,
    )


# --- splits and budgets ---------------------------------------------------------

def _class_indices(labels: np.ndarray) -> dict[int, np.ndarray]:
    return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}


def stratified_split(labels, test_fraction: float, seed: int,
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class split; both sides sorted. Raises SingleClassSplit
    when fewer than two classes would land on either side (for K >= 2)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyDataset("cannot split zero samples")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction {test_fraction} outside (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, SPLIT_STREAM]))
    train, test = [], []
    for c, idx in sorted(_class_indices(labels).items()):
        shuffled = idx[rng.permutation(idx.size)]
        n_test = int(round(test_fraction * idx.size))
        n_test = min(max(n_test, 1), idx.size)
        test.append(shuffled[:n_test])
        train.append(shuffled[n_test:])
    train = np.sort(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    k = len(np.unique(labels))
    if k >= 2:
        for side, name in ((train, "train"), (test, "test")):
            if len(np.unique(labels[side])) < 2:
                raise SingleClassSplit(
                    f"{name} split holds < 2 classes (dataset has {k})")
    return train, test


def stratified_budget(labels, budget: int, seed: int) -> np.ndarray:
    """Exactly `budget` indices, class proportions preserved by largest
    remainder; deterministic for a given seed."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if not 0 < budget <= n:
        raise ValueError(f"budget {budget} outside [1, {n}]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, BUDGET_STREAM]))
    per_class = sorted(_class_indices(labels).items())
    ideal = {c: budget * idx.size / n for c, idx in per_class}
    take = {c: min(int(ideal[c]), idx.size) for c, idx in per_class}
    remaining = budget - sum(take.values())
    by_remainder = sorted(
        per_class, key=lambda ci: (ideal[ci[0]] - int(ideal[ci[0]]), ci[0]),
        reverse=True)
    while remaining > 0:
        progressed = False
        for c, idx in by_remainder:
            if remaining == 0:
                break
            if take[c] < idx.size:
                take[c] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            raise ValueError("budget exceeds dataset size")
    chosen = []
    for c, idx in per_class:
        shuffled = idx[rng.permutation(idx.size)]
        chosen.append(shuffled[:take[c]])
    return np.sort(np.concatenate(chosen))


# --- datasets as tensors ---------------------------------------------------------

def dataset_labels(images) -> np.ndarray:
    raw = [getattr(img, "label", None) for img in images]
    labels = np.array([-1 if r is None else int(r) for r in raw], dtype=np.int64)
    if (labels < 0).any():
        bad = int(np.flatnonzero(labels < 0)[0])
        raise MissingLabels(f"image {bad} carries no label")
    return labels


def images_to_views(images, indices=None) -> np.ndarray:
    """HWC uint8 images -> (n, 3, H, W) float32 in [0,1]."""
    if indices is None:
        indices = range(len(images))
    views = None
    for row, i in enumerate(indices):
        pixels = np.asarray(images[i].pixels if hasattr(images[i], "pixels")
                            else images[i])
        chw = pixels.astype(np.float32).transpose(2, 0, 1) / np.float32(255.0)
        if views is None:
            views = np.empty((len(indices),) + chw.shape, dtype=np.float32)
        views[row] = chw
    if views is None:
        raise EmptyDataset("no images")
    return views


def embed_dataset(images, cfg: EncoderConfig, params, indices=None,
                  batch_size: int = 64) -> np.ndarray:
    """Frozen-encoder embeddings, computed in inference mode."""
    views = images_to_views(images, indices)
    out = []
    for start in range(0, views.shape[0], batch_size):
        h = encoder_forward(Tensor(views[start:start + batch_size]), cfg, params)
        out.append(h.data)
    return np.concatenate(out, axis=0)


# --- head training ----------------------------------------------------------------

@dataclass
class FinetuneConfig:
    labeled_fraction: float | None = None
    labeled_count: int | None = None
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 64
    seed: int = 0
    freeze_encoder: bool = True
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.labeled_fraction is not None and not 0.0 < self.labeled_fraction <= 1.0:
            raise ValueError(f"labeled_fraction {self.labeled_fraction} outside (0, 1]")
        if self.labeled_count is not None and self.labeled_count < 1:
            raise ValueError(f"labeled_count {self.labeled_count} < 1")
        if self.epochs < 0:
            raise ValueError("epochs < 0")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction {self.test_fraction} outside (0, 1)")

    def budget_for(self, n: int) -> int:
        if self.labeled_count is not None:
            if self.labeled_count > n:
                raise ValueError(f"labeled_count {self.labeled_count} > dataset {n}")
            return self.labeled_count
        if self.labeled_fraction is not None:
            return min(n, max(1, round(self.labeled_fraction * n)))
        return n


def predict(embeddings: np.ndarray, head: dict[str, Tensor]) -> np.ndarray:
    """Argmax class per row; np.argmax already breaks ties toward index 0."""
    logits = classify(Tensor(embeddings.astype(np.float32)), head)
    return logits.data.argmax(axis=1)


def train_linear_head(embeddings: np.ndarray, labels: np.ndarray,
                      head: dict[str, Tensor], epochs: int, lr: float,
                      batch_size: int, seed: int) -> None:
    """Adam + softmax cross-entropy on fixed embeddings, in place."""
    emb = embeddings.astype(np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    state = AdamState.for_params(head)
    for epoch in range(epochs):
        order = np.random.default_rng(
            np.random.SeedSequence([seed, epoch])).permutation(emb.shape[0])
        for start in range(0, emb.shape[0], batch_size):
            batch = order[start:start + batch_size]
            zero_grads(head)
            with Tape() as tape:
                logits = classify(Tensor(emb[batch]), head)
                loss = softmax_cross_entropy(logits, labels[batch])
                backward(tape, loss)
            adam_step(head, state, lr=lr)


def _train_end_to_end(images, labels, indices, params, enc_cfg: EncoderConfig,
                      epochs: int, lr: float, batch_size: int, seed: int) -> None:
    """Cross-entropy over encoder + head (no projection), in place."""
    trainable = {**encoder_params(params), **head_params(params)}
    state = AdamState.for_params(trainable)
    views = images_to_views(images, indices)
    labels = np.asarray(labels, dtype=np.int64)[indices]
    for epoch in range(epochs):
        order = np.random.default_rng(
            np.random.SeedSequence([seed, epoch])).permutation(views.shape[0])
        for start in range(0, views.shape[0], batch_size):
            batch = order[start:start + batch_size]
            zero_grads(trainable)
            with Tape() as tape:
                h = encoder_forward(Tensor(views[batch]), enc_cfg, params)
                loss = softmax_cross_entropy(classify(h, params), labels[batch])
                backward(tape, loss)
            adam_step(trainable, state, lr=lr)


# --- fine-tune and supervised baseline ---------------------------------------------

def finetune(params: dict[str, Tensor], images, cfg: FinetuneConfig,
             enc_cfg: EncoderConfig, condition: str = "finetune",
             split: tuple[np.ndarray, np.ndarray] | None = None,
             ) -> tuple[dict[str, Tensor], MetricsReport]:
    """Train the classification head on a labeled budget; report held-out metrics.

    With freeze_encoder=True (default) the encoder is used only to embed and
    its tensors are untouched. The returned params are the same dict, with
    the head updated in place.
    """
    labels = dataset_labels(images)
    if labels.size == 0:
        raise EmptyDataset("finetune requires labeled images")
    if labels.max() >= enc_cfg.num_classes:
        raise LabelOutOfRange(
            f"label {labels.max()} >= num_classes {enc_cfg.num_classes}")
    if enc_cfg.num_classes >= 2 and len(np.unique(labels)) < 2:
        raise SingleClassSplit("labeled set holds a single class")
    if split is None:
        budget = stratified_budget(labels, cfg.budget_for(labels.size), cfg.seed)
        train_idx, test_idx = stratified_split(
            labels[budget], cfg.test_fraction, cfg.seed)
        train_idx, test_idx = budget[train_idx], budget[test_idx]
    else:
        train_idx, test_idx = split

    if cfg.freeze_encoder:
        train_emb = embed_dataset(images, enc_cfg, params, train_idx)
        train_linear_head(train_emb, labels[train_idx], head_params(params),
                          cfg.epochs, cfg.lr, cfg.batch_size, cfg.seed)
    else:
        _train_end_to_end(images, labels, train_idx, params, enc_cfg,
                          cfg.epochs, cfg.lr, cfg.batch_size, cfg.seed)
    test_emb = embed_dataset(images, enc_cfg, params, test_idx)
    pred = predict(test_emb, head_params(params))
    cm = ConfusionMatrix.from_pairs(labels[test_idx], pred, enc_cfg.num_classes)
    return params, compute_metrics(cm, condition=condition, seed=cfg.seed)


def train_supervised(images, cfg: FinetuneConfig, enc_cfg: EncoderConfig,
                     condition: str = "supervised",
                     split: tuple[np.ndarray, np.ndarray] | None = None,
                     ) -> tuple[dict[str, Tensor], MetricsReport]:
    """End-to-end cross-entropy baseline on the same labeled budget."""
    labels = dataset_labels(images)
    if len(np.unique(labels)) < 2:
        raise SingleClassSplit("supervised training needs >= 2 classes")
    if labels.max() >= enc_cfg.num_classes:
        raise LabelOutOfRange(
            f"label {labels.max()} >= num_classes {enc_cfg.num_classes}")
    if split is None:
        budget = stratified_budget(labels, cfg.budget_for(labels.size), cfg.seed)
        train_idx, test_idx = stratified_split(
            labels[budget], cfg.test_fraction, cfg.seed)
        train_idx, test_idx = budget[train_idx], budget[test_idx]
    else:
        train_idx, test_idx = split
    params = init_params(enc_cfg, cfg.seed)
    _train_end_to_end(images, labels, train_idx, params, enc_cfg,
                      cfg.epochs, cfg.lr, cfg.batch_size, cfg.seed)
    test_emb = embed_dataset(images, enc_cfg, params, test_idx)
    pred = predict(test_emb, head_params(params))
    cm = ConfusionMatrix.from_pairs(labels[test_idx], pred, enc_cfg.num_classes)
    return params, compute_metrics(cm, condition=condition, seed=cfg.seed)


# --- ablation grid and transfer ------------------------------------------------------

ABLATION_CONDITIONS = ("ssl_se", "ssl_no_se", "supervised_se", "supervised_no_se")


@dataclass
class AblationResult:
    reports: list[MetricsReport]
    held_out: np.ndarray
    table: str


def ablation_table(reports: list[MetricsReport]) -> str:
    header = f"{'condition':<18} {'accuracy':>9} {'macro_f1':>9} {'n':>6}"
    rows = [header, "-" * len(header)]
    for r in reports:
        rows.append(f"{r.condition:<18} {r.accuracy:>9.4f} "
                    f"{r.macro_f1:>9.4f} {r.n:>6d}")
    return "\n".join(rows)


def run_ablation(images, finetune_cfg: FinetuneConfig,
                 pretrain_cfg: PretrainConfig) -> AblationResult:
    """The 2x2 grid {SE on/off} x {SSL pretrain + frozen head, supervised}.

    One stratified budget and one train/test split are drawn up front and
    shared by all four cells, so the held-out set is identical everywhere.
    """
    labels = dataset_labels(images)
    if len(np.unique(labels)) < 2:
        raise SingleClassSplit("ablation needs >= 2 classes")
    budget = stratified_budget(labels, finetune_cfg.budget_for(labels.size),
                               finetune_cfg.seed)
    tr, te = stratified_split(labels[budget], finetune_cfg.test_fraction,
                              finetune_cfg.seed)
    split = (budget[tr], budget[te])

    reports = []
    for condition in ABLATION_CONDITIONS:
        se_on = not condition.endswith("_no_se")
        enc_cfg = dataclasses.replace(pretrain_cfg.encoder, se_enabled=se_on)
        if condition.startswith("ssl"):
            cell_pretrain = dataclasses.replace(pretrain_cfg, encoder=enc_cfg)
            params, _ = pretrain(images, cell_pretrain)
            _, report = finetune(params, images, finetune_cfg, enc_cfg,
                                 condition=condition, split=split)
        else:
            _, report = train_supervised(images, finetune_cfg, enc_cfg,
                                         condition=condition, split=split)
        reports.append(report)
    return AblationResult(reports=reports, held_out=split[1].copy(),
                          table=ablation_table(reports))


def run_transfer(pretrain_images, finetune_images, finetune_cfg: FinetuneConfig,
                 pretrain_cfg: PretrainConfig,
                 condition: str = "transfer") -> MetricsReport:
    """Stage-1 on corpus A (labels ignored), Stage-2 on labeled corpus B."""
    params, _ = pretrain(pretrain_images, pretrain_cfg)
    _, report = finetune(params, finetune_images, finetune_cfg,
                         pretrain_cfg.encoder, condition=condition)
    return report
