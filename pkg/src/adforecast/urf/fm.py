"""Order-2 factorization machine with a logistic link.

The model scores a sample with one active feature per sparse group plus a
dense block:

    logit = w0 + sum_i w[i] + sum_{i<j} <V[i], V[j]> + wd . dense

computed with the O(k n) sum-of-squares identity

    sum_{i<j} <V[i], V[j]> = 0.5 * (||sum_i V[i]||^2 - sum_i ||V[i]||^2)

over the active features. Training is minibatch Adam on the binary
cross-entropy, hand-written gradients, double precision throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..errors import DegenerateLabelsError, UndefinedMetricError

PROB_CLAMP = 1e-6   # predictions are clamped to [PROB_CLAMP, 1 - PROB_CLAMP]


@dataclass
class FmParams:
    w0: float
    w: np.ndarray    # (n_features,)
    V: np.ndarray    # (n_features, k)
    wd: np.ndarray   # (n_dense,)

    def copy(self) -> "FmParams":
        return FmParams(self.w0, self.w.copy(), self.V.copy(), self.wd.copy())

    def to_dict(self) -> dict:
        return {"w0": self.w0, "w": self.w.tolist(), "V": self.V.tolist(),
                "wd": self.wd.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "FmParams":
        return cls(w0=float(obj["w0"]), w=np.asarray(obj["w"], dtype=float),
                   V=np.asarray(obj["V"], dtype=float),
                   wd=np.asarray(obj["wd"], dtype=float))


def init_params(n_features: int, n_dense: int, k: int,
                rng: np.random.Generator) -> FmParams:
    return FmParams(
        w0=0.0,
        w=np.zeros(n_features),
        V=rng.normal(0.0, 0.01, size=(n_features, k)),
        wd=np.zeros(n_dense),
    )


def fm_logit(params: FmParams, idx: np.ndarray, dense: np.ndarray) -> np.ndarray:
    """Raw logit for a batch. idx (B, g) active indices, dense (B, d)."""
    idx = np.atleast_2d(idx)
    dense = np.atleast_2d(dense)
    Vx = params.V[idx]                          # (B, g, k)
    S = Vx.sum(axis=1)                          # (B, k)
    pair = 0.5 * ((S ** 2).sum(axis=1) - (Vx ** 2).sum(axis=(1, 2)))
    return params.w0 + params.w[idx].sum(axis=1) + dense @ params.wd + pair


def fm_predict(params: FmParams, idx: np.ndarray, dense: np.ndarray) -> np.ndarray:
    """Clamped click/conversion probability for a batch."""
    p = 1.0 / (1.0 + np.exp(-fm_logit(params, idx, dense)))
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def log_loss_and_grads(params: FmParams, idx: np.ndarray, dense: np.ndarray,
                       labels: np.ndarray) -> Tuple[float, FmParams]:
    """Mean binary cross-entropy over the batch and its parameter gradients.

    The loss is taken on the unclamped sigmoid so gradients stay exact.
    """
    idx = np.atleast_2d(idx)
    dense = np.atleast_2d(dense)
    logit = fm_logit(params, idx, dense)
    # stable BCE on logits: max(z,0) - z*y + log1p(exp(-|z|))
    loss = float(np.mean(np.maximum(logit, 0.0) - logit * labels
                         + np.log1p(np.exp(-np.abs(logit)))))
    p = 1.0 / (1.0 + np.exp(-logit))
    g = (p - labels) / len(labels)              # dL/dlogit

    Vx = params.V[idx]
    S = Vx.sum(axis=1)
    dw0 = float(g.sum())
    dw = np.zeros_like(params.w)
    np.add.at(dw, idx, g[:, None])
    dV = np.zeros_like(params.V)
    np.add.at(dV, idx, g[:, None, None] * (S[:, None, :] - Vx))
    dwd = dense.T @ g
    return loss, FmParams(w0=dw0, w=dw, V=dV, wd=dwd)


@dataclass
class FmTrainConfig:
    k: int = 8
    epochs: int = 20
    batch_size: int = 1024
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class _Adam:
    def __init__(self, shapes, config: FmTrainConfig):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0
        self.cfg = config

    def step(self, tensors, grads):
        self.t += 1
        cfg = self.cfg
        out = []
        for i, (x, g) in enumerate(zip(tensors, grads)):
            self.m[i] = cfg.beta1 * self.m[i] + (1 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1 - cfg.beta2) * g * g
            m_hat = self.m[i] / (1 - cfg.beta1 ** self.t)
            v_hat = self.v[i] / (1 - cfg.beta2 ** self.t)
            out.append(x - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps))
        return out


def train_fm(idx: np.ndarray, dense: np.ndarray, labels: np.ndarray,
             n_features: int, config: FmTrainConfig, seed: int
             ) -> Tuple[FmParams, list]:
    """Train an FM; returns the parameters and the per-epoch mean losses."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.min() == labels.max():
        raise DegenerateLabelsError(
            "training labels contain a single class")
    rng = np.random.default_rng(seed)
    params = init_params(n_features, dense.shape[1], config.k, rng)
    adam = _Adam([(), params.w.shape, params.V.shape, params.wd.shape], config)
    n = len(labels)
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            rows = order[start:start + config.batch_size]
            loss, grads = log_loss_and_grads(params, idx[rows], dense[rows],
                                             labels[rows])
            w0, w, V, wd = adam.step(
                [params.w0, params.w, params.V, params.wd],
                [grads.w0, grads.w, grads.V, grads.wd])
            params = FmParams(float(w0), w, V, wd)
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
    return params, epoch_losses


def fm_gradient_check(params: FmParams, idx: np.ndarray, dense: np.ndarray,
                      labels: np.ndarray, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads = log_loss_and_grads(params, idx, dense, labels)

    def loss_at(p: FmParams) -> float:
        loss, _ = log_loss_and_grads(p, idx, dense, labels)
        return loss

    worst = 0.0

    def check(analytic: float, bump) -> None:
        nonlocal worst
        plus = loss_at(bump(+epsilon))
        minus = loss_at(bump(-epsilon))
        numeric = (plus - minus) / (2 * epsilon)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)

    def bump_w0(e):
        p = params.copy()
        p.w0 += e
        return p

    check(grads.w0, bump_w0)
    for arr_name in ("w", "V", "wd"):
        arr = getattr(params, arr_name)
        garr = getattr(grads, arr_name)
        for pos in np.ndindex(arr.shape):
            def bump(e, pos=pos, arr_name=arr_name):
                p = params.copy()
                getattr(p, arr_name)[pos] += e
                return p
            check(float(garr[pos]), bump)
    return worst


@dataclass
class UrfEval:
    auc: float
    logloss: float


def evaluate_urf(scores: np.ndarray, labels: np.ndarray) -> UrfEval:
    """Ranking AUC (ties count half) and mean binary cross-entropy."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined: labels have a single class")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    # average ranks over tied scores
    i = 0
    rank_values = np.arange(1, len(scores) + 1, dtype=np.float64)
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = rank_values[i:j + 1].mean()
        i = j + 1
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    p = np.clip(scores, 1e-15, 1 - 1e-15)
    logloss = float(-np.mean(labels * np.log(p) + (1 - labels) * np.log(1 - p)))
    return UrfEval(auc=float(auc), logloss=logloss)
