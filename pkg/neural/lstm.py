# neural/lstm.py
"""LSTM cell, vocabulary projection and batched forward/backward passes.

Gate weights are (K+K)xK matrices applied to the row vector [h_prev; x].
Shapes follow the batch-major convention: states are (B, K), time-major
id arrays are (T, B).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import NonFiniteState

GATES = ("input", "forget", "output", "candidate")


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class LstmParams:
    """Embedding, per-layer gate weights and an optional vocabulary projection."""
    hidden_size: int
    vocab_size: int
    embedding: np.ndarray
    layers: List[Dict[str, np.ndarray]]
    w_vocab: Optional[np.ndarray] = None
    b_vocab: Optional[np.ndarray] = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def blocks(self) -> Dict[str, np.ndarray]:
        """Named parameter blocks in a fixed order."""
        named = {"embedding": self.embedding}
        for l, layer in enumerate(self.layers):
            for gate in GATES:
                named[f"layer{l}.w_{gate}"] = layer[f"w_{gate}"]
            for gate in GATES:
                named[f"layer{l}.b_{gate}"] = layer[f"b_{gate}"]
        if self.w_vocab is not None:
            named["w_vocab"] = self.w_vocab
            named["b_vocab"] = self.b_vocab
        return named

    def map(self, fn) -> "LstmParams":
        return LstmParams(
            hidden_size=self.hidden_size,
            vocab_size=self.vocab_size,
            embedding=fn(self.embedding),
            layers=[{name: fn(value) for name, value in layer.items()} for layer in self.layers],
            w_vocab=None if self.w_vocab is None else fn(self.w_vocab),
            b_vocab=None if self.b_vocab is None else fn(self.b_vocab),
        )

    def astype(self, dtype) -> "LstmParams":
        return self.map(lambda a: a.astype(dtype))

    def zeros_like(self) -> "LstmParams":
        return self.map(np.zeros_like)

    def copy(self) -> "LstmParams":
        return self.map(np.copy)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(block)) for block in self.blocks().values())

    def stacked(self, l: int) -> Tuple[np.ndarray, np.ndarray]:
        layer = self.layers[l]
        w = np.concatenate([layer[f"w_{gate}"] for gate in GATES], axis=1)
        b = np.concatenate([layer[f"b_{gate}"] for gate in GATES])
        return w, b

    @classmethod
    def from_blocks(cls, hidden_size: int, vocab_size: int, blocks: Dict[str, np.ndarray]) -> "LstmParams":
        num_layers = len({name.split(".")[0] for name in blocks if name.startswith("layer")})
        layers = []
        for l in range(num_layers):
            layer = {}
            for gate in GATES:
                layer[f"w_{gate}"] = blocks[f"layer{l}.w_{gate}"]
                layer[f"b_{gate}"] = blocks[f"layer{l}.b_{gate}"].reshape(-1)
            layers.append(layer)
        return cls(
            hidden_size=hidden_size,
            vocab_size=vocab_size,
            embedding=blocks["embedding"],
            layers=layers,
            w_vocab=blocks.get("w_vocab"),
            b_vocab=None if "b_vocab" not in blocks else blocks["b_vocab"].reshape(-1),
        )


def init_params(hidden_size: int, vocab_size: int, rng: np.random.Generator, num_layers: int = 1,
                with_output: bool = True, scale: float = 0.1, dtype=np.float32) -> LstmParams:
    """Uniform(-scale, scale) weights, zero biases."""
    k = hidden_size

    def uniform(*shape):
        return rng.uniform(-scale, scale, size=shape).astype(dtype)

    layers = []
    for _ in range(num_layers):
        layer = {}
        for gate in GATES:
            layer[f"w_{gate}"] = uniform(2 * k, k)
        for gate in GATES:
            layer[f"b_{gate}"] = np.zeros(k, dtype=dtype)
        layers.append(layer)
    return LstmParams(
        hidden_size=k,
        vocab_size=vocab_size,
        embedding=uniform(vocab_size, k),
        layers=layers,
        w_vocab=uniform(k, vocab_size) if with_output else None,
        b_vocab=np.zeros(vocab_size, dtype=dtype) if with_output else None,
    )


@dataclass
class LstmState:
    h: List[np.ndarray]
    c: List[np.ndarray]

    @classmethod
    def zeros(cls, num_layers: int, batch: int, hidden_size: int, dtype=np.float32) -> "LstmState":
        return cls([np.zeros((batch, hidden_size), dtype) for _ in range(num_layers)],
                   [np.zeros((batch, hidden_size), dtype) for _ in range(num_layers)])

    def copy(self) -> "LstmState":
        return LstmState([h.copy() for h in self.h], [c.copy() for c in self.c])


def lstm_step(params: LstmParams, h_prev: np.ndarray, c_prev: np.ndarray, input_id: int,
              layer: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """One cell update for a single example (first layer reads the embedding)."""
    if not (np.all(np.isfinite(h_prev)) and np.all(np.isfinite(c_prev))):
        raise NonFiniteState(f"non-finite state entering layer {layer}: "
                             f"|h|max={np.nanmax(np.abs(h_prev))}, |c|max={np.nanmax(np.abs(c_prev))}")
    k = params.hidden_size
    x = params.embedding[input_id]
    w, b = params.stacked(layer)
    z = np.concatenate([h_prev, x]) @ w + b
    i, f, o = sigmoid(z[:k]), sigmoid(z[k:2 * k]), sigmoid(z[2 * k:3 * k])
    g = np.tanh(z[3 * k:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise NonFiniteState(f"non-finite state leaving layer {layer} for input id {input_id}")
    return h, c


def vocab_dist(params: LstmParams, h: np.ndarray) -> np.ndarray:
    """Softmax over the vocabulary for hidden state(s) h."""
    return np.exp(log_softmax(h @ params.w_vocab + params.b_vocab))


@dataclass
class StepCache:
    hc: np.ndarray
    gates: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    c_prev: np.ndarray
    tanh_c: np.ndarray
    out_mask: Optional[np.ndarray]


@dataclass
class Trace:
    """Everything backward() needs from a forward() call."""
    input_ids: np.ndarray
    state_mask: np.ndarray
    embed_masks: List[Optional[np.ndarray]] = field(default_factory=list)
    steps: List[List[StepCache]] = field(default_factory=list)


def _dropout_mask(rng: Optional[np.random.Generator], keep: float, shape, dtype) -> Optional[np.ndarray]:
    if rng is None or keep >= 1.0:
        return None
    return ((rng.random(shape) < keep) / keep).astype(dtype)


def forward(params: LstmParams, input_ids: np.ndarray, state_mask: np.ndarray, state: LstmState,
            keep: float = 1.0, rng: Optional[np.random.Generator] = None):
    """Run the stack over (T, B) ids.

    Positions with state_mask 0 leave the state untouched (padding).
    Dropout with keep probability ``keep`` hits the embedding and every
    layer output, never the recurrent path. Returns (top outputs (T, B, K),
    final state, trace).
    """
    steps, batch = input_ids.shape
    k = params.hidden_size
    dtype = params.embedding.dtype
    stacked = [params.stacked(l) for l in range(params.num_layers)]
    h = [s.astype(dtype, copy=True) for s in state.h]
    c = [s.astype(dtype, copy=True) for s in state.c]
    tops = np.empty((steps, batch, k), dtype=dtype)
    trace = Trace(input_ids=input_ids, state_mask=state_mask)

    for t in range(steps):
        x = params.embedding[input_ids[t]]
        embed_mask = _dropout_mask(rng, keep, x.shape, dtype)
        if embed_mask is not None:
            x = x * embed_mask
        trace.embed_masks.append(embed_mask)
        m = state_mask[t][:, None].astype(dtype)
        caches = []
        for l, (w, b) in enumerate(stacked):
            hc = np.concatenate([h[l], x], axis=1)
            z = hc @ w + b
            i, f, o = sigmoid(z[:, :k]), sigmoid(z[:, k:2 * k]), sigmoid(z[:, 2 * k:3 * k])
            g = np.tanh(z[:, 3 * k:])
            c_new = f * c[l] + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            out_mask = _dropout_mask(rng, keep, h_new.shape, dtype)
            caches.append(StepCache(hc, (i, f, o, g), c[l], tanh_c, out_mask))
            h[l] = m * h_new + (1 - m) * h[l]
            c[l] = m * c_new + (1 - m) * c[l]
            x = h[l] if out_mask is None else h[l] * out_mask
        trace.steps.append(caches)
        tops[t] = x
    return tops, LstmState(h, c), trace


def backward(params: LstmParams, trace: Trace, d_tops: Optional[np.ndarray], d_final: Optional[LstmState],
             grads: LstmParams) -> LstmState:
    """Accumulate parameter gradients into ``grads``; return d(initial state)."""
    steps, batch = trace.input_ids.shape
    k = params.hidden_size
    dtype = grads.embedding.dtype
    stacked = [params.stacked(l)[0] for l in range(params.num_layers)]
    if d_final is None:
        d_final = LstmState.zeros(params.num_layers, batch, k, dtype)
    dh = [d.astype(dtype, copy=True) for d in d_final.h]
    dc = [d.astype(dtype, copy=True) for d in d_final.c]
    dw = [np.zeros_like(w) for w in stacked]
    db = [np.zeros(4 * k, dtype=dtype) for _ in stacked]

    for t in reversed(range(steps)):
        m = trace.state_mask[t][:, None].astype(dtype)
        dx = np.zeros((batch, k), dtype=dtype) if d_tops is None else d_tops[t].astype(dtype)
        for l in reversed(range(params.num_layers)):
            cache = trace.steps[t][l]
            i, f, o, g = cache.gates
            if cache.out_mask is not None:
                dx = dx * cache.out_mask
            d_after = dh[l] + dx
            dh_new = m * d_after
            dh_keep = (1 - m) * d_after
            dc_new = m * dc[l]
            dc_keep = (1 - m) * dc[l]

            do = dh_new * cache.tanh_c
            dc_new = dc_new + dh_new * o * (1 - cache.tanh_c ** 2)
            di = dc_new * g
            dg = dc_new * i
            df = dc_new * cache.c_prev
            dz = np.concatenate([
                di * i * (1 - i),
                df * f * (1 - f),
                do * o * (1 - o),
                dg * (1 - g ** 2),
            ], axis=1)
            dw[l] += cache.hc.T @ dz
            db[l] += dz.sum(axis=0)
            dhc = dz @ stacked[l].T
            dh[l] = dhc[:, :k] + dh_keep
            dc[l] = dc_new * f + dc_keep
            dx = dhc[:, k:]
        if trace.embed_masks[t] is not None:
            dx = dx * trace.embed_masks[t]
        np.add.at(grads.embedding, trace.input_ids[t], dx)

    for l in range(params.num_layers):
        layer = grads.layers[l]
        for n, gate in enumerate(GATES):
            layer[f"w_{gate}"] += dw[l][:, n * k:(n + 1) * k]
            layer[f"b_{gate}"] += db[l][n * k:(n + 1) * k]
    return LstmState(dh, dc)


def projection_loss(params: LstmParams, tops: np.ndarray, targets: np.ndarray, loss_mask: np.ndarray,
                    grads: Optional[LstmParams] = None, scale: float = 1.0):
    """Masked negative log-likelihood of targets under the vocabulary softmax.

    Returns (loss, per-position log-probabilities, d_tops); the loss and
    gradients are multiplied by ``scale``.
    """
    logits = tops @ params.w_vocab + params.b_vocab
    logp = log_softmax(logits)
    target_logp = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    mask = loss_mask.astype(logp.dtype)
    loss = -scale * float(np.sum(mask * target_logp, dtype=np.float64))
    if grads is None:
        return loss, target_logp, None

    d_logits = np.exp(logp)
    np.put_along_axis(d_logits, targets[..., None],
                      np.take_along_axis(d_logits, targets[..., None], axis=-1) - 1.0, axis=-1)
    d_logits *= (scale * mask)[..., None]
    k = params.hidden_size
    flat_tops = tops.reshape(-1, k)
    flat_d = d_logits.reshape(-1, params.vocab_size)
    grads.w_vocab += flat_tops.T @ flat_d
    grads.b_vocab += flat_d.sum(axis=0)
    d_tops = d_logits @ params.w_vocab.T
    return loss, target_logp, d_tops
