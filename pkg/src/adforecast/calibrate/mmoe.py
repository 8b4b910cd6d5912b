"""Multi-gate mixture-of-experts calibration network, in plain numpy.

Per task k the prediction is

    y_k(x) = tower_k( sum_i softmax(Wg_k x)_i * expert_i(x) )

with N shared experts (dense layer to 64 units, batch normalization,
rectifier) and per-task gates (linear + softmax over experts) and towers
(dense 32, rectifier, dense 1). Targets are regressed in log1p space,
standardized per task so the equally weighted squared error means equal in
effect (otherwise the widest-ranging task dominates every shared
gradient); predictions invert both transforms and clamp at zero.

Single-task calibration is the K=1 instance of the same network, so the
multi-task and per-indicator baselines share every line of forward math.

Everything is double precision with hand-written backpropagation; the
gradients are validated against central finite differences, which is why
the code avoids any framework autodiff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, DegenerateLabelsError


@dataclass
class MmoeConfig:
    n_inputs: int
    n_tasks: int = 3
    n_experts: int = 6
    expert_hidden: int = 64
    tower_hidden: int = 32
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def validate(self) -> None:
        if min(self.n_inputs, self.n_tasks, self.n_experts,
               self.expert_hidden, self.tower_hidden) < 1:
            raise ConfigError("all network dimensions must be positive")


PARAM_NAMES = ("expert_w", "expert_b", "bn_gamma", "bn_beta",
               "gate_w", "tower_w1", "tower_b1", "tower_w2", "tower_b2")


class MmoeNet:
    """Network parameters plus batch-norm running statistics."""

    def __init__(self, config: MmoeConfig, rng: Optional[np.random.Generator] = None):
        config.validate()
        self.config = config
        c = config
        rng = rng or np.random.default_rng(0)
        he_in = np.sqrt(2.0 / c.n_inputs)
        he_h1 = np.sqrt(2.0 / c.expert_hidden)
        self.params: Dict[str, np.ndarray] = {
            "expert_w": rng.normal(0, he_in, (c.n_experts, c.n_inputs, c.expert_hidden)),
            "expert_b": np.zeros((c.n_experts, c.expert_hidden)),
            "bn_gamma": np.ones((c.n_experts, c.expert_hidden)),
            "bn_beta": np.zeros((c.n_experts, c.expert_hidden)),
            "gate_w": rng.normal(0, 0.1, (c.n_tasks, c.n_experts, c.n_inputs)),
            "tower_w1": rng.normal(0, he_h1, (c.n_tasks, c.expert_hidden, c.tower_hidden)),
            "tower_b1": np.zeros((c.n_tasks, c.tower_hidden)),
            "tower_w2": rng.normal(0, np.sqrt(2.0 / c.tower_hidden), (c.n_tasks, c.tower_hidden)),
            "tower_b2": np.zeros(c.n_tasks),
        }
        self.bn_mean = np.zeros((c.n_experts, c.expert_hidden))
        self.bn_var = np.ones((c.n_experts, c.expert_hidden))
        # per-task standardization of the log1p targets (identity until fit)
        self.target_mean = np.zeros(c.n_tasks)
        self.target_std = np.ones(c.n_tasks)

    def copy(self) -> "MmoeNet":
        clone = object.__new__(MmoeNet)
        clone.config = self.config
        clone.params = {k: v.copy() for k, v in self.params.items()}
        clone.bn_mean = self.bn_mean.copy()
        clone.bn_var = self.bn_var.copy()
        clone.target_mean = self.target_mean.copy()
        clone.target_std = self.target_std.copy()
        return clone

    # ---- forward -----------------------------------------------------

    def forward(self, X: np.ndarray, training: bool) -> Tuple[np.ndarray, dict]:
        """Transformed-space predictions, shape (n_tasks, batch).

        In training mode batch statistics normalize the expert
        pre-activations and the running statistics are updated; in
        inference mode the stored running statistics are used.
        """
        p = self.params
        c = self.config
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        H = np.einsum("bd,ndh->nbh", X, p["expert_w"]) + p["expert_b"][:, None, :]
        if training:
            mu = H.mean(axis=1, keepdims=True)
            var = H.var(axis=1, keepdims=True)
            self.bn_mean = (c.bn_momentum * self.bn_mean
                            + (1 - c.bn_momentum) * mu[:, 0, :])
            self.bn_var = (c.bn_momentum * self.bn_var
                           + (1 - c.bn_momentum) * var[:, 0, :])
        else:
            mu = self.bn_mean[:, None, :]
            var = self.bn_var[:, None, :]
        inv_std = 1.0 / np.sqrt(var + c.bn_eps)
        xhat = (H - mu) * inv_std
        bn_out = p["bn_gamma"][:, None, :] * xhat + p["bn_beta"][:, None, :]
        A = np.maximum(bn_out, 0.0)

        gate_logits = np.einsum("bd,knd->kbn", X, p["gate_w"])
        gate_logits -= gate_logits.max(axis=2, keepdims=True)
        expg = np.exp(gate_logits)
        G = expg / expg.sum(axis=2, keepdims=True)

        F = np.einsum("kbn,nbh->kbh", G, A)
        T1 = np.einsum("kbh,khj->kbj", F, p["tower_w1"]) + p["tower_b1"][:, None, :]
        T1r = np.maximum(T1, 0.0)
        Y = np.einsum("kbj,kj->kb", T1r, p["tower_w2"]) + p["tower_b2"][:, None]
        cache = {"X": X, "xhat": xhat, "inv_std": inv_std, "bn_out": bn_out,
                 "A": A, "G": G, "F": F, "T1": T1, "T1r": T1r,
                 "training": training}
        return Y, cache

    def gates(self, X: np.ndarray) -> np.ndarray:
        """Per-task gate distributions, shape (n_tasks, batch, n_experts)."""
        p = self.params
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        gate_logits = np.einsum("bd,knd->kbn", X, p["gate_w"])
        gate_logits -= gate_logits.max(axis=2, keepdims=True)
        expg = np.exp(gate_logits)
        return expg / expg.sum(axis=2, keepdims=True)

    # ---- loss and gradients -------------------------------------------

    def loss_and_grads(self, X: np.ndarray, Z: np.ndarray, training: bool
                       ) -> Tuple[float, Dict[str, np.ndarray]]:
        """Mean squared error in transformed space, averaged over tasks,
        plus gradients for every parameter tensor."""
        p = self.params
        Y, cache = self.forward(X, training)
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        ZT = Z.T                                   # (K, B)
        B = Y.shape[1]
        K = Y.shape[0]
        err = Y - ZT
        loss = float(np.mean(np.mean(err ** 2, axis=1)))
        dY = 2.0 * err / (K * B)

        A, G, F, T1r = cache["A"], cache["G"], cache["F"], cache["T1r"]
        X2 = cache["X"]
        grads: Dict[str, np.ndarray] = {}
        grads["tower_b2"] = dY.sum(axis=1)
        grads["tower_w2"] = np.einsum("kb,kbj->kj", dY, T1r)
        dT1 = dY[:, :, None] * p["tower_w2"][:, None, :]
        dT1 = dT1 * (cache["T1"] > 0)
        grads["tower_b1"] = dT1.sum(axis=1)
        grads["tower_w1"] = np.einsum("kbh,kbj->khj", F, dT1)
        dF = np.einsum("kbj,khj->kbh", dT1, p["tower_w1"])

        dG = np.einsum("kbh,nbh->kbn", dF, A)
        dA = np.einsum("kbn,kbh->nbh", G, dF)
        dgate_logits = G * (dG - (dG * G).sum(axis=2, keepdims=True))
        grads["gate_w"] = np.einsum("kbn,bd->knd", dgate_logits, X2)

        dbn_out = dA * (cache["bn_out"] > 0)
        xhat, inv_std = cache["xhat"], cache["inv_std"]
        grads["bn_gamma"] = (dbn_out * xhat).sum(axis=1)
        grads["bn_beta"] = dbn_out.sum(axis=1)
        dxhat = dbn_out * p["bn_gamma"][:, None, :]
        if cache["training"]:
            m = dxhat.shape[1]
            dH = (inv_std / m) * (m * dxhat
                                  - dxhat.sum(axis=1, keepdims=True)
                                  - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))
        else:
            dH = dxhat * inv_std
        grads["expert_b"] = dH.sum(axis=1)
        grads["expert_w"] = np.einsum("bd,nbh->ndh", X2, dH)
        return loss, grads

    # ---- inference ------------------------------------------------------

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Label-space predictions (inverse transforms, clamped at 0),
        shape (batch, n_tasks)."""
        Y, _ = self.forward(X, training=False)
        Z = Y.T * self.target_std + self.target_mean
        return np.maximum(np.expm1(Z), 0.0)

    def to_dict(self) -> dict:
        c = self.config
        return {
            "config": {"n_inputs": c.n_inputs, "n_tasks": c.n_tasks,
                       "n_experts": c.n_experts,
                       "expert_hidden": c.expert_hidden,
                       "tower_hidden": c.tower_hidden,
                       "bn_momentum": c.bn_momentum, "bn_eps": c.bn_eps},
            "params": {k: v.tolist() for k, v in self.params.items()},
            "bn_mean": self.bn_mean.tolist(),
            "bn_var": self.bn_var.tolist(),
            "target_mean": self.target_mean.tolist(),
            "target_std": self.target_std.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MmoeNet":
        net = cls(MmoeConfig(**obj["config"]))
        for k in PARAM_NAMES:
            net.params[k] = np.asarray(obj["params"][k], dtype=np.float64)
        net.bn_mean = np.asarray(obj["bn_mean"], dtype=np.float64)
        net.bn_var = np.asarray(obj["bn_var"], dtype=np.float64)
        net.target_mean = np.asarray(obj["target_mean"], dtype=np.float64)
        net.target_std = np.asarray(obj["target_std"], dtype=np.float64)
        return net


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 20         # epochs without validation improvement
    val_fraction: float = 0.15
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def train_net(net: MmoeNet, X: np.ndarray, Y_labels: np.ndarray,
              config: TrainConfig, seed: int,
              X_val: np.ndarray, Y_val: np.ndarray
              ) -> Tuple[MmoeNet, List[float]]:
    """Adam training with early stopping on validation loss.

    Targets are log1p-transformed labels, standardized per task with moments
    fitted on the training split; the validation metric is the same squared
    error in that space, evaluated in inference mode. Returns the best
    snapshot and the per-epoch validation history.
    """
    if len(X) < 2:
        raise DegenerateLabelsError("need at least two training samples")
    Z = np.log1p(np.asarray(Y_labels, dtype=np.float64))
    net.target_mean = Z.mean(axis=0)
    net.target_std = np.maximum(Z.std(axis=0), 1e-8)
    Z = (Z - net.target_mean) / net.target_std
    Z_val = ((np.log1p(np.asarray(Y_val, dtype=np.float64))
              - net.target_mean) / net.target_std)
    rng = np.random.default_rng(seed)
    m = {k: np.zeros_like(v) for k, v in net.params.items()}
    v = {k: np.zeros_like(va) for k, va in net.params.items()}
    t = 0
    best = net.copy()
    best_metric = float("inf")
    since_best = 0
    history: List[float] = []
    n = len(X)
    for _ in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            rows = order[start:start + config.batch_size]
            if len(rows) < 2:
                continue  # batch statistics need at least two samples
            _, grads = net.loss_and_grads(X[rows], Z[rows], training=True)
            t += 1
            for key in PARAM_NAMES:
                g = grads[key]
                m[key] = config.beta1 * m[key] + (1 - config.beta1) * g
                v[key] = config.beta2 * v[key] + (1 - config.beta2) * g * g
                m_hat = m[key] / (1 - config.beta1 ** t)
                v_hat = v[key] / (1 - config.beta2 ** t)
                net.params[key] -= (config.learning_rate * m_hat
                                    / (np.sqrt(v_hat) + config.eps))
        Y_hat, _ = net.forward(X_val, training=False)
        metric = float(np.mean((Y_hat.T - Z_val) ** 2))
        history.append(metric)
        if metric < best_metric:
            best_metric = metric
            best = net.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return best, history


def gradient_check(net: MmoeNet, X: np.ndarray, Z: np.ndarray,
                   epsilon: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central finite
    differences over every parameter, with batch norm in inference mode."""
    _, grads = net.loss_and_grads(X, Z, training=False)
    worst = 0.0
    for key in PARAM_NAMES:
        arr = net.params[key]
        garr = np.atleast_1d(grads[key])
        flat = arr.reshape(-1)
        gflat = np.atleast_1d(np.asarray(garr)).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up, _ = net.loss_and_grads(X, Z, training=False)
            flat[i] = orig - epsilon
            down, _ = net.loss_and_grads(X, Z, training=False)
            flat[i] = orig
            numeric = (up - down) / (2 * epsilon)
            denom = max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
