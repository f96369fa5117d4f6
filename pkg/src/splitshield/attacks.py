"""Reconstruction attacks against offloaded split-layer outputs.

Two adversaries are modeled:

* WRA — a white-box attacker (the cloud) who knows the full model and
  recovers the input by gradient descent on a feature-matching objective
  regularized by total variation:

      L(x) = || f_prefix(x) - observed ||^2
             + tv_weight * sum_{i,j} (dv_ij^2 + dh_ij^2)^(tv_exponent / 2)

  Plain gradient descent with a backtracking line search keeps the accepted
  objective sequence non-increasing and the whole run deterministic.

* BINA — a black-box attacker (a malicious edge node) who sees only
  (intermediate output, input) query pairs exactly as the deployed pipeline
  emits them, and trains an inverse decoder on them. The training entry
  point receives nothing but the query oracle and the decoder description,
  so it cannot touch the target model's weights by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import (Conv, Flatten, FullyConnected, ModelGraph, ReLU,
                     as_tensor, forward)
from .engine.graph import (_backprop_input, _layer_backward_input,
                           _layer_backward_params, _run_prefix)
from .errors import NonFiniteError, ShapeError
from .metrics import SimilarityReport, compare

ATTACK_WRA = "WRA"
ATTACK_BINA = "BINA"

_MAX_HALVINGS = 60


@dataclass(frozen=True)
class WraConfig:
    tv_weight: float = 1e-3
    tv_exponent: float = 2.0
    step_size: float = 0.05
    max_iters: int = 1000
    init: str = "zeros"  # or "random"
    init_seed: int = 0
    tol: float = 0.0  # stop when an accepted decrease falls at or below this

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.tv_weight < 0 or self.tv_exponent <= 0:
            raise ValueError("tv_weight must be >= 0 and tv_exponent > 0")
        if self.init not in ("zeros", "random"):
            raise ValueError("init must be 'zeros' or 'random'")


@dataclass
class AttackResult:
    x_hat: np.ndarray
    objective_trace: list[float]
    attack: str
    scores: SimilarityReport | None = None


def total_variation(x, beta: float) -> float:
    """Anisotropic-pair total variation, summed per channel.

    Every pixel contributes (dv^2 + dh^2)^(beta/2) where dv/dh are the
    forward differences toward the next row/column; differences past the
    image border count as zero.
    """
    arr = _spatial(x)
    dv, dh = _tv_diffs(arr)
    s = dv * dv + dh * dh
    return float(np.sum(s ** (beta / 2.0)))


def tv_gradient(x, beta: float) -> np.ndarray:
    """Analytic gradient of `total_variation` (zero where both diffs vanish)."""
    arr = _spatial(x)
    dv, dh = _tv_diffs(arr)
    s = dv * dv + dh * dh
    w = np.zeros_like(s)
    pos = s > 0
    w[pos] = beta * s[pos] ** (beta / 2.0 - 1.0)
    g = -w * (dv + dh)
    g[:, 1:, :] += (w * dv)[:, :-1, :]
    g[:, :, 1:] += (w * dh)[:, :, :-1]
    return g.reshape(np.asarray(x).shape)


def _spatial(x) -> np.ndarray:
    arr = as_tensor(x)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"total variation needs (h, w) or (c, h, w) input, got {arr.shape}")
    return arr


def _tv_diffs(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dv = np.zeros_like(arr)
    dh = np.zeros_like(arr)
    dv[:, :-1, :] = arr[:, 1:, :] - arr[:, :-1, :]
    dh[:, :, :-1] = arr[:, :, 1:] - arr[:, :, :-1]
    return dv, dh


def _wra_objective(model, m, x, observed, cfg) -> float:
    try:
        v = _run_prefix(model, x, m)[-1]
    except NonFiniteError:
        return math.inf
    with np.errstate(over="ignore"):
        r = v - observed
        obj = float(np.sum(r * r))
    if cfg.tv_weight > 0:
        obj += cfg.tv_weight * total_variation(x, cfg.tv_exponent)
    return obj


def _wra_objective_grad(model, m, x, observed, cfg) -> tuple[float, np.ndarray]:
    acts = _run_prefix(model, x, m)
    with np.errstate(over="ignore"):
        r = acts[-1] - observed
        obj = float(np.sum(r * r))
    if not math.isfinite(obj):
        raise NonFiniteError(f"WRA feature-match objective is non-finite ({obj})")
    g = _backprop_input(model, m, acts, 2.0 * r)
    if cfg.tv_weight > 0:
        obj += cfg.tv_weight * total_variation(x, cfg.tv_exponent)
        g = g + cfg.tv_weight * tv_gradient(x, cfg.tv_exponent)
    return obj, g


def wra_reconstruct(model: ModelGraph, m: int, observed, cfg: WraConfig,
                    true_input=None, peak: float = 1.0) -> AttackResult:
    """Recover the input behind `observed`, the (possibly noised) split output.

    Returns the best iterate by objective value; exhausting the iteration
    budget is not an error. A non-finite objective at an accepted point
    aborts with a diagnostic.
    """
    model._check_split(m)
    observed = as_tensor(observed)
    if observed.shape != model.output_shape(m):
        raise ShapeError(f"observed shape {observed.shape} does not match layer-{m} "
                         f"output {model.output_shape(m)}", layer=m)

    if cfg.init == "zeros":
        x = np.zeros(model.input_shape)
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.init_seed)))
        x = rng.uniform(0.0, 1.0, size=model.input_shape)

    obj, grad = _wra_objective_grad(model, m, x, observed, cfg)
    if not math.isfinite(obj):
        raise NonFiniteError(f"WRA objective is non-finite at the initial point ({obj})")
    trace = [obj]
    step = cfg.step_size
    for _ in range(cfg.max_iters):
        accepted = False
        for _ in range(_MAX_HALVINGS):
            cand = x - step * grad
            cand_obj = _wra_objective(model, m, cand, observed, cfg)
            if cand_obj < obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        decrease = obj - cand_obj
        x, obj = cand, cand_obj
        trace.append(obj)
        if decrease <= cfg.tol * max(1.0, abs(obj)):
            break
        obj, grad = _wra_objective_grad(model, m, x, observed, cfg)
        step *= 1.25

    scores = compare(x, true_input, peak=peak) if true_input is not None else None
    return AttackResult(x_hat=x, objective_trace=trace, attack=ATTACK_WRA, scores=scores)


@dataclass(frozen=True)
class InverseModelSpec:
    """Decoder architecture plus its training schedule.

    output_shape is the shape reconstructions are reported in (the target
    model's input shape); the decoder itself emits the flat equivalent.
    step_size is normalized by the mean squared norm of the observed
    training inputs (normalized-LMS style), so descent stays stable whatever
    noise scale the protected pipeline emits at.
    """

    decoder: ModelGraph
    output_shape: tuple[int, ...]
    query_count: int = 512
    epochs: int = 20
    batch_size: int = 32
    step_size: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.query_count < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("query_count, epochs and batch_size must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        flat_out = self.decoder.output_shape()
        if len(flat_out) != 1 or flat_out[0] != int(np.prod(self.output_shape)):
            raise ShapeError(f"decoder emits {flat_out}, cannot reshape to {self.output_shape}")


@dataclass
class TrainedDecoder:
    graph: ModelGraph
    output_shape: tuple[int, ...]
    final_loss: float
    loss_trace: list[float] = field(default_factory=list)


def bina_train(query_oracle, spec: InverseModelSpec) -> TrainedDecoder:
    """Fit the inverse decoder on pairs drawn from the deployed pipeline.

    query_oracle(n) must return n (observed, input) pairs; it is the only
    window this code has onto the target system. Training is mini-batch
    gradient descent on the mean squared reconstruction error.
    """
    pairs = query_oracle(spec.query_count)
    if len(pairs) != spec.query_count:
        raise ValueError(f"oracle returned {len(pairs)} pairs, expected {spec.query_count}")
    in_shape = spec.decoder.input_shape
    observed = np.empty((spec.query_count, int(np.prod(in_shape))))
    targets = np.empty((spec.query_count, int(np.prod(spec.output_shape))))
    for i, (v, x) in enumerate(pairs):
        v, x = as_tensor(v), as_tensor(x)
        if v.shape != in_shape:
            raise ShapeError(f"query pair {i}: observed shape {v.shape} does not match "
                             f"decoder input {in_shape}")
        if x.shape != tuple(spec.output_shape):
            raise ShapeError(f"query pair {i}: input shape {x.shape} does not match "
                             f"expected {tuple(spec.output_shape)}")
        observed[i] = v.reshape(-1)
        targets[i] = x.reshape(-1)

    if _is_dense_chain(spec.decoder):
        graph, losses = _train_dense_chain(spec, observed, targets)
    else:
        graph, losses = _train_generic(spec, observed, targets)
    return TrainedDecoder(graph=graph, output_shape=tuple(spec.output_shape),
                          final_loss=losses[-1], loss_trace=losses)


def bina_reconstruct(decoder: TrainedDecoder, observed, true_input=None,
                     peak: float = 1.0) -> AttackResult:
    """One decoder forward pass; deterministic for a fixed decoder."""
    observed = as_tensor(observed)
    if observed.shape != decoder.graph.input_shape:
        raise ShapeError(f"observed shape {observed.shape} does not match decoder "
                         f"input {decoder.graph.input_shape}")
    y = forward(decoder.graph, observed)[-1]
    x_hat = y.reshape(decoder.output_shape)
    scores = compare(x_hat, true_input, peak=peak) if true_input is not None else None
    return AttackResult(x_hat=x_hat, objective_trace=[], attack=ATTACK_BINA, scores=scores)


def _is_dense_chain(graph: ModelGraph) -> bool:
    layers = graph.layers
    body = layers[1:] if isinstance(layers[0], Flatten) else layers
    return all(isinstance(l, (FullyConnected, ReLU)) for l in body)


def _dataset_loss(h: np.ndarray, t: np.ndarray) -> float:
    d = h - t
    return float(np.mean(np.sum(d * d, axis=1)))


def _normalized_step(spec, observed: np.ndarray) -> float:
    return spec.step_size / max(1.0, float(np.mean(np.sum(observed * observed, axis=1))))


def _epoch_order(spec, epoch: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, 1, epoch])))
    return rng.permutation(n)


def _train_dense_chain(spec, observed, targets):
    """Batched trainer for flatten/FC/ReLU decoders (the common case).

    An epoch that fails to reduce the dataset loss is rolled back and the
    step halved, so training never diverges whatever the noise scale of the
    query pairs.
    """
    layers = list(spec.decoder.layers)
    start = 1 if isinstance(layers[0], Flatten) else 0
    params = {j: (layers[j].weight.copy(), layers[j].bias.copy())
              for j in range(start, len(layers)) if isinstance(layers[j], FullyConnected)}

    def batch_forward(state, vb):
        acts = [vb]
        for j in range(start, len(layers)):
            if isinstance(layers[j], FullyConnected):
                w, b = state[j]
                acts.append(acts[-1] @ w.T + b)
            else:
                acts.append(np.maximum(acts[-1], 0.0))
        return acts

    def run_epoch(state, lr, epoch):
        state = dict(state)
        order = _epoch_order(spec, epoch, observed.shape[0])
        for lo in range(0, observed.shape[0], spec.batch_size):
            idx = order[lo:lo + spec.batch_size]
            vb, tb = observed[idx], targets[idx]
            acts = batch_forward(state, vb)
            g = 2.0 * (acts[-1] - tb) / idx.size
            for j in reversed(range(start, len(layers))):
                a_in = acts[j - start]
                if isinstance(layers[j], FullyConnected):
                    w, b = state[j]
                    gw = g.T @ a_in
                    gb = g.sum(axis=0)
                    g = g @ w
                    state[j] = (w - lr * gw, b - lr * gb)
                else:
                    g = g * (a_in > 0.0)
        return state

    lr = _normalized_step(spec, observed)
    loss = _dataset_loss(batch_forward(params, observed)[-1], targets)
    losses = [loss]
    for epoch in range(spec.epochs):
        candidate = run_epoch(params, lr, epoch)
        with np.errstate(over="ignore", invalid="ignore"):
            cand_loss = _dataset_loss(batch_forward(candidate, observed)[-1], targets)
        if math.isfinite(cand_loss) and cand_loss <= loss:
            params, loss = candidate, cand_loss
        else:
            lr *= 0.5
        losses.append(loss)
    for j, (w, b) in params.items():
        layers[j] = FullyConnected(w, b)
    return spec.decoder.with_layers(layers), losses


def _train_generic(spec, observed, targets):
    """Per-sample trainer for decoders with layers outside the dense chain.

    Same epoch-level rollback rule as the dense-chain path.
    """
    in_shape = spec.decoder.input_shape
    n = observed.shape[0]

    def dataset_loss(g):
        total = 0.0
        for i in range(n):
            try:
                y = forward(g, observed[i].reshape(in_shape))[-1]
            except NonFiniteError:
                return math.inf
            d = y - targets[i]
            total += float(np.sum(d * d))
        return total / n

    def run_epoch(graph, lr, epoch):
        order = _epoch_order(spec, epoch, n)
        for lo in range(0, n, spec.batch_size):
            idx = order[lo:lo + spec.batch_size]
            grads = {j: None for j, l in enumerate(graph.layers)
                     if isinstance(l, (Conv, FullyConnected))}
            for i in idx:
                acts = _run_prefix(graph, observed[i].reshape(in_shape), graph.n_layers)
                g = 2.0 * (acts[-1] - targets[i]) / idx.size
                for j in range(graph.n_layers, 0, -1):
                    layer = graph.layers[j - 1]
                    pg = _layer_backward_params(layer, acts[j - 1], g)
                    if pg is not None:
                        prev = grads[j - 1]
                        grads[j - 1] = pg if prev is None else (prev[0] + pg[0], prev[1] + pg[1])
                    g = _layer_backward_input(layer, acts[j - 1], g)
            new_layers = list(graph.layers)
            for j, pg in grads.items():
                if pg is None:
                    continue
                layer = new_layers[j]
                new_layers[j] = replace(layer,
                                        weight=layer.weight - lr * pg[0],
                                        bias=layer.bias - lr * pg[1])
            graph = graph.with_layers(new_layers)
        return graph

    graph = spec.decoder
    lr = _normalized_step(spec, observed)
    loss = dataset_loss(graph)
    losses = [loss]
    for epoch in range(spec.epochs):
        try:
            candidate = run_epoch(graph, lr, epoch)
            cand_loss = dataset_loss(candidate)
        except NonFiniteError:
            cand_loss = math.inf
        if math.isfinite(cand_loss) and cand_loss <= loss:
            graph, loss = candidate, cand_loss
        else:
            lr *= 0.5
        losses.append(loss)
    return graph, losses
