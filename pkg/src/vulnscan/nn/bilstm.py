"""Stacked bidirectional LSTM binary classifier.

Four bidirectional layers (gate order i, f, g, o), inverted dropout between
layers, final-state readout (forward state at the last step concatenated with
backward state at the first step) and a sigmoid head. Forward and
backpropagation-through-time are hand-rolled over numpy and dtype-agnostic:
parameters persist as float32, the gradient checker runs the same code in
float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import modelio
from ..vulntypes import VulnType
from .config import TrainingConfig

DIRECTIONS = ("fwd", "bwd")


class EmptyWindow(Exception):
    """Forward pass received a zero-length window."""


class DimensionMismatch(Exception):
    """Input vectors do not match the model's input width."""


@dataclass
class BiLstmModel:
    config: TrainingConfig
    vuln_type: VulnType | None
    params: dict[str, np.ndarray]

    def copy(self) -> "BiLstmModel":
        return BiLstmModel(self.config, self.vuln_type,
                           {k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype) -> "BiLstmModel":
        return BiLstmModel(self.config, self.vuln_type,
                           {k: v.astype(dtype) for k, v in self.params.items()})


def layer_dims(config: TrainingConfig) -> list[tuple[int, int]]:
    """(input_dim, units_per_direction) for each bidirectional layer."""
    dims = [(config.input_layer_units, config.input_layer_units)]
    prev_units = config.input_layer_units
    for _ in range(config.hidden_layers):
        dims.append((2 * prev_units, config.hidden_units))
        prev_units = config.hidden_units
    return dims


def param_shapes(config: TrainingConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for i, (in_dim, units) in enumerate(layer_dims(config)):
        for d in DIRECTIONS:
            shapes[f"layer{i}.{d}.W"] = (4 * units, in_dim)
            shapes[f"layer{i}.{d}.U"] = (4 * units, units)
            shapes[f"layer{i}.{d}.b"] = (4 * units,)
    pooled = 2 * layer_dims(config)[-1][1]
    shapes["head.W"] = (config.output_units, pooled)
    shapes["head.b"] = (config.output_units,)
    return shapes


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(config: TrainingConfig | None = None,
               vuln_type: VulnType | None = None) -> BiLstmModel:
    """Xavier-uniform weights per gate, forget-gate bias 1, other biases 0."""
    config = config or TrainingConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for i, (in_dim, units) in enumerate(layer_dims(config)):
        for d in DIRECTIONS:
            w_gates = [_xavier(rng, in_dim, units, (units, in_dim))
                       for _ in range(4)]
            u_gates = [_xavier(rng, units, units, (units, units))
                       for _ in range(4)]
            b = np.zeros(4 * units)
            b[units:2 * units] = 1.0  # forget gate
            params[f"layer{i}.{d}.W"] = np.vstack(w_gates).astype(np.float32)
            params[f"layer{i}.{d}.U"] = np.vstack(u_gates).astype(np.float32)
            params[f"layer{i}.{d}.b"] = b.astype(np.float32)
    pooled = 2 * layer_dims(config)[-1][1]
    params["head.W"] = _xavier(rng, pooled, config.output_units,
                               (config.output_units, pooled)).astype(np.float32)
    params["head.b"] = np.zeros(config.output_units, dtype=np.float32)
    return BiLstmModel(config=config, vuln_type=vuln_type, params=params)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _run_direction_h(x: np.ndarray, w: np.ndarray, u: np.ndarray,
                     b: np.ndarray) -> np.ndarray:
    """Outputs-only LSTM direction (no backprop caches); used by the
    finite-difference checker where allocation overhead dominates."""
    bsz, steps, _ = x.shape
    units = u.shape[1]
    pre = x @ w.T + b
    hs = np.empty((bsz, steps, units), dtype=x.dtype)
    h = np.zeros((bsz, units), dtype=x.dtype)
    c = np.zeros((bsz, units), dtype=x.dtype)
    for t in range(steps):
        z = pre[:, t] + h @ u.T
        sig = _sigmoid(z[:, :2 * units])
        i = sig[:, :units]
        f = sig[:, units:]
        g = np.tanh(z[:, 2 * units:3 * units])
        o = _sigmoid(z[:, 3 * units:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[:, t] = h
    return hs


def _run_direction(x: np.ndarray, w: np.ndarray, u: np.ndarray,
                   b: np.ndarray) -> dict[str, np.ndarray]:
    """One LSTM direction over (batch, steps, in_dim); returns full caches."""
    bsz, steps, _ = x.shape
    units = u.shape[1]
    pre = x @ w.T  # (B, T, 4H) input contribution, all steps at once
    gi = np.empty((bsz, steps, units), dtype=x.dtype)
    gf = np.empty_like(gi)
    gg = np.empty_like(gi)
    go = np.empty_like(gi)
    cs = np.empty_like(gi)
    tc = np.empty_like(gi)
    hs = np.empty_like(gi)
    h = np.zeros((bsz, units), dtype=x.dtype)
    c = np.zeros((bsz, units), dtype=x.dtype)
    for t in range(steps):
        z = pre[:, t] + h @ u.T + b
        i = _sigmoid(z[:, :units])
        f = _sigmoid(z[:, units:2 * units])
        g = np.tanh(z[:, 2 * units:3 * units])
        o = _sigmoid(z[:, 3 * units:])
        c = f * c + i * g
        t_c = np.tanh(c)
        h = o * t_c
        gi[:, t], gf[:, t], gg[:, t], go[:, t] = i, f, g, o
        cs[:, t], tc[:, t], hs[:, t] = c, t_c, h
    return {"x": x, "i": gi, "f": gf, "g": gg, "o": go, "c": cs, "tc": tc,
            "h": hs}


def _backprop_direction(cache: dict[str, np.ndarray], w: np.ndarray,
                        u: np.ndarray, d_h: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT through one direction. d_h is (B, T, H) upstream on outputs."""
    x, hs, cs = cache["x"], cache["h"], cache["c"]
    bsz, steps, units = hs.shape
    d_w = np.zeros_like(w)
    d_u = np.zeros_like(u)
    d_b = np.zeros(4 * units, dtype=x.dtype)
    d_x = np.zeros_like(x)
    dh_next = np.zeros((bsz, units), dtype=x.dtype)
    dc_next = np.zeros((bsz, units), dtype=x.dtype)
    for t in range(steps - 1, -1, -1):
        i, f = cache["i"][:, t], cache["f"][:, t]
        g, o = cache["g"][:, t], cache["o"][:, t]
        t_c = cache["tc"][:, t]
        dh = d_h[:, t] + dh_next
        do = dh * t_c
        dc = dc_next + dh * o * (1.0 - t_c * t_c)
        c_prev = cs[:, t - 1] if t > 0 else np.zeros_like(dc)
        dzi = (dc * g) * i * (1.0 - i)
        dzf = (dc * c_prev) * f * (1.0 - f)
        dzg = (dc * i) * (1.0 - g * g)
        dzo = do * o * (1.0 - o)
        dc_next = dc * f
        dz = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((bsz, units), dtype=x.dtype)
        d_w += dz.T @ x[:, t]
        d_u += dz.T @ h_prev
        d_b += dz.sum(axis=0)
        d_x[:, t] = dz @ w
        dh_next = dz @ u
    return d_x, d_w, d_u, d_b


def forward_batch(model: BiLstmModel, windows: np.ndarray, training: bool = False,
                  rng: np.random.Generator | None = None
                  ) -> tuple[np.ndarray, dict[str, Any]]:
    """Score a (batch, steps, dim) block; returns scores and backprop caches."""
    config = model.config
    params = model.params
    dtype = params["head.W"].dtype
    x = np.asarray(windows, dtype=dtype)
    if x.ndim != 3:
        raise DimensionMismatch(f"expected (batch, steps, dim), got {x.shape}")
    if x.shape[1] == 0:
        raise EmptyWindow("window has no tokens")
    if x.shape[2] != config.input_layer_units:
        raise DimensionMismatch(
            f"window vectors are {x.shape[2]}-dim, model consumes "
            f"{config.input_layer_units}-dim")
    if training and config.dropout_rate > 0 and rng is None:
        rng = np.random.default_rng(config.seed)

    n_layers = config.total_bilstm_layers
    layers: list[dict[str, Any]] = []
    masks: list[np.ndarray | None] = []
    cur = x
    top_fwd = top_bwd = None
    for li in range(n_layers):
        w_f = params[f"layer{li}.fwd.W"]
        u_f = params[f"layer{li}.fwd.U"]
        b_f = params[f"layer{li}.fwd.b"]
        w_b = params[f"layer{li}.bwd.W"]
        u_b = params[f"layer{li}.bwd.U"]
        b_b = params[f"layer{li}.bwd.b"]
        cache_f = _run_direction(cur, w_f, u_f, b_f)
        cache_b = _run_direction(cur[:, ::-1], w_b, u_b, b_b)
        h_f = cache_f["h"]
        h_b = cache_b["h"][:, ::-1]
        out = np.concatenate([h_f, h_b], axis=2)
        layers.append({"fwd": cache_f, "bwd": cache_b})
        if li == n_layers - 1:
            top_fwd, top_bwd = h_f, h_b
        elif training and config.dropout_rate > 0:
            keep = 1.0 - config.dropout_rate
            mask = (rng.random(out.shape) < keep).astype(dtype) / dtype.type(keep)
            out = out * mask
            masks.append(mask)
        else:
            masks.append(None)
        cur = out

    pooled = np.concatenate([top_fwd[:, -1, :], top_bwd[:, 0, :]], axis=1)
    logits = pooled @ params["head.W"].T + params["head.b"]
    scores = _sigmoid(logits[:, 0])
    info = np.finfo(dtype)
    scores = np.clip(scores, info.tiny, 1.0 - info.epsneg)
    cache = {"layers": layers, "masks": masks, "pooled": pooled,
             "scores": scores}
    return scores, cache


def backward_batch(model: BiLstmModel, cache: dict[str, Any],
                   d_scores: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of sum(d_scores * score) w.r.t. every parameter tensor."""
    config = model.config
    params = model.params
    scores = cache["scores"]
    pooled = cache["pooled"]
    dims = layer_dims(config)

    d_logit = np.asarray(d_scores, dtype=scores.dtype) * scores * (1.0 - scores)
    grads: dict[str, np.ndarray] = {
        "head.W": d_logit[None, :] @ pooled,
        "head.b": np.array([d_logit.sum()], dtype=scores.dtype),
    }
    d_pooled = d_logit[:, None] @ params["head.W"]

    n_layers = config.total_bilstm_layers
    d_out: np.ndarray | None = None
    for li in range(n_layers - 1, -1, -1):
        units = dims[li][1]
        layer = cache["layers"][li]
        h_f = layer["fwd"]["h"]
        if li == n_layers - 1:
            d_hf = np.zeros_like(h_f)
            d_hb = np.zeros_like(h_f)
            d_hf[:, -1] = d_pooled[:, :units]
            d_hb[:, 0] = d_pooled[:, units:]
        else:
            mask = cache["masks"][li]
            if mask is not None:
                d_out = d_out * mask
            d_hf = d_out[:, :, :units]
            d_hb = d_out[:, :, units:]
        d_xf, d_wf, d_uf, d_bf = _backprop_direction(
            layer["fwd"], params[f"layer{li}.fwd.W"],
            params[f"layer{li}.fwd.U"], d_hf)
        d_xb_rev, d_wb, d_ub, d_bb = _backprop_direction(
            layer["bwd"], params[f"layer{li}.bwd.W"],
            params[f"layer{li}.bwd.U"], d_hb[:, ::-1])
        grads[f"layer{li}.fwd.W"] = d_wf
        grads[f"layer{li}.fwd.U"] = d_uf
        grads[f"layer{li}.fwd.b"] = d_bf
        grads[f"layer{li}.bwd.W"] = d_wb
        grads[f"layer{li}.bwd.U"] = d_ub
        grads[f"layer{li}.bwd.b"] = d_bb
        d_out = d_xf + d_xb_rev[:, ::-1]
    return grads


def forward(model: BiLstmModel, window: np.ndarray, training: bool = False,
            rng: np.random.Generator | None = None) -> float:
    """Score one window of shape (steps, dim); strictly inside (0, 1)."""
    window = np.asarray(window)
    if window.ndim != 2:
        raise DimensionMismatch(f"expected (steps, dim) window, got {window.shape}")
    scores, _ = forward_batch(model, window[None], training=training, rng=rng)
    return float(scores[0])


def save_model(model: BiLstmModel, path: str | Path) -> None:
    extra = {"vuln_type": model.vuln_type.value if model.vuln_type else None}
    modelio.save_payload(path, "bilstm", model.config.to_dict(), model.params,
                         extra=extra)


def load_model(path: str | Path) -> BiLstmModel:
    doc = modelio.load_payload(path, expect_kind="bilstm")
    config = TrainingConfig.from_dict(doc["config"])
    try:
        config.validate()
    except ValueError as exc:
        raise modelio.FormatError(f"bad config: {exc}") from exc
    expected = param_shapes(config)
    tensors = doc["tensors"]
    missing = sorted(set(expected) - set(tensors))
    surplus = sorted(set(tensors) - set(expected))
    if missing or surplus:
        raise modelio.FormatError(
            f"tensor set mismatch: missing {missing}, unexpected {surplus}")
    for name, shape in expected.items():
        if tuple(tensors[name].shape) != shape:
            raise modelio.FormatError(
                f"tensor {name!r} has shape {tensors[name].shape}, "
                f"config implies {shape}")
    raw_type = doc.get("vuln_type")
    vuln_type = VulnType(raw_type) if raw_type else None
    return BiLstmModel(config=config, vuln_type=vuln_type, params=tensors)
