"""Training loop: Adam with bias correction, optional step LR schedule.

Single-threaded and deterministic given the seed; the log carries one entry
per epoch with train loss and rank correlations.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TooFew
from ..metrics import spearman_rc
from .config import FrameSamplerMode
from .network import loss_and_grads, predict, sample_segments, trainable_names


@dataclass
class VideoExample:
    video_id: str
    features: np.ndarray  # (n_frames, H, W, D)
    score: float
    split: str = "train"
    text_tokens: np.ndarray | None = None


@dataclass
class TrainSettings:
    epochs: int = 50
    lr: float = 1e-5
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    scheduler_step: int | None = None  # epochs per lr halving; None disables
    scheduler_gamma: float = 0.5
    sampler: str = "random_in_segment"
    seed: int = 0
    stop_rc: float | None = None  # early exit once train RC reaches this


@dataclass
class TrainLog:
    entries: list = field(default_factory=list)
    best_params: dict | None = None
    best_epoch: int | None = None


class Adam:
    def __init__(self, names, params, settings):
        self.names = names
        self.m = {n: np.zeros_like(params[n]) for n in names}
        self.v = {n: np.zeros_like(params[n]) for n in names}
        self.t = 0
        self.s = settings

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2, eps = self.s.beta1, self.s.beta2, self.s.eps
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for n in self.names:
            g = grads[n]
            self.m[n] = b1 * self.m[n] + (1.0 - b1) * g
            self.v[n] = b2 * self.v[n] + (1.0 - b2) * g * g
            update = (self.m[n] / c1) / (np.sqrt(self.v[n] / c2) + eps)
            params[n] = params[n] - lr * update


def _rank_corr(params, config, examples):
    if len(examples) < 2:
        return None
    preds = [predict(params, config, ex.features, ex.text_tokens)
             for ex in examples]
    truths = [ex.score for ex in examples]
    if len(set(truths)) < 2 or len(set(preds)) < 2:
        return None
    return spearman_rc(preds, truths)


def train(params, config, dataset, settings):
    """Fit in place on the train split; returns the per-epoch log.

    Validation RC is logged when the dataset has a val split, and the
    best-val parameter snapshot is retained (best train RC otherwise).
    """
    train_set = [ex for ex in dataset if ex.split == "train"]
    val_set = [ex for ex in dataset if ex.split == "val"]
    if not train_set:
        raise TooFew("train split is empty")

    rng = np.random.default_rng(settings.seed)
    sampler = FrameSamplerMode(settings.sampler, settings.seed)
    opt = Adam(trainable_names(config), params, settings)
    log = TrainLog()
    best_key = -math.inf

    for epoch in range(settings.epochs):
        lr = settings.lr
        if settings.scheduler_step:
            lr *= settings.scheduler_gamma ** (epoch // settings.scheduler_step)

        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), settings.batch_size):
            chunk = order[start : start + settings.batch_size]
            batch = []
            for idx in chunk:
                ex = train_set[idx]
                picks = sample_segments(ex.features.shape[0], config.T, sampler, rng)
                batch.append((ex.features[picks], ex.score, ex.text_tokens))
            loss, grads = loss_and_grads(params, config, batch)
            opt.step(params, grads, lr)
            epoch_loss += loss * len(chunk)
        epoch_loss /= len(train_set)

        train_rc = _rank_corr(params, config, train_set)
        val_rc = _rank_corr(params, config, val_set) if val_set else None
        log.entries.append(
            {"epoch": epoch, "lr": lr, "train_loss": epoch_loss,
             "train_rc": train_rc, "val_rc": val_rc}
        )

        key = val_rc if val_set else train_rc
        if key is not None and key > best_key:
            best_key = key
            log.best_params = {k: v.copy() for k, v in params.items()}
            log.best_epoch = epoch

        if settings.stop_rc is not None and train_rc is not None:
            if train_rc >= settings.stop_rc:
                break
    return log


def predict_many(params, config, examples):
    """Deterministic middle-of-segment predictions keyed by video id."""
    return {ex.video_id: predict(params, config, ex.features, ex.text_tokens)
            for ex in examples}
