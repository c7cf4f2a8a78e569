"""Character-window sequence labeler: embeddings -> bidirectional GRU -> softmax.

The forward network reads the window left to right, the backward network
right to left; per-timestep logits combine both hidden states.  Gradients
are derived analytically (backpropagation through time), no autodiff.

All heavy code paths are batched with a leading batch axis.  The
single-window entry points wrap the batched ones with batch size 1.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import (AdamState, DimensionError, Rng, adam_step, dropout_mask,
                       dtype_for, sigmoid, softmax)

PAD_ID = 0  # reserved vocabulary index for padding


@dataclass
class ModelConfig:
    vocab_size: int
    label_count: int
    embed_dim: int = 200
    hidden_dim: int = 500
    window: int = 200
    keep_prob: float = 0.5
    precision: int = 32

    def __post_init__(self):
        if min(self.vocab_size, self.label_count, self.embed_dim,
               self.hidden_dim, self.window) < 1:
            raise ValueError("all model dimensions must be >= 1")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError(f"keep_prob must be in (0, 1], got {self.keep_prob}")

    @property
    def dtype(self):
        return dtype_for(self.precision)


@dataclass
class GruBlock:
    """Weights for one recurrence direction.

    w_* act on the input vector (hidden x embed), v_* on the previous
    hidden state (hidden x hidden); b_* are biases.  Gates: z update,
    r reset, h candidate.
    """
    w_z: np.ndarray
    v_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    v_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    v_h: np.ndarray
    b_h: np.ndarray

    def tensors(self, prefix):
        for name in ("w_z", "v_z", "b_z", "w_r", "v_r", "b_r", "w_h", "v_h", "b_h"):
            yield f"{prefix}.{name}", getattr(self, name)


@dataclass
class ModelParams:
    """All trainable tensors of the model."""
    embedding: np.ndarray          # vocab_size x embed_dim
    fwd: GruBlock
    bwd: GruBlock
    out_fwd: np.ndarray            # label_count x hidden_dim
    out_bwd: np.ndarray            # label_count x hidden_dim
    out_bias: np.ndarray           # label_count

    def tensors(self):
        """(name, array) pairs in the canonical serialization order."""
        yield "embedding", self.embedding
        yield from self.fwd.tensors("fwd")
        yield from self.bwd.tensors("bwd")
        yield "out_fwd", self.out_fwd
        yield "out_bwd", self.out_bwd
        yield "out_bias", self.out_bias

    def copy(self):
        return map_params(self, np.copy)

    def astype(self, dtype):
        return map_params(self, lambda a: a.astype(dtype))


def map_params(params, fn):
    def block(b):
        return GruBlock(*(fn(t) for _, t in b.tensors("")))
    return ModelParams(fn(params.embedding), block(params.fwd), block(params.bwd),
                       fn(params.out_fwd), fn(params.out_bwd), fn(params.out_bias))


def zeros_like_params(params):
    return map_params(params, np.zeros_like)


def init_params(config, rng):
    """Uniform fan-based init for weights, zeros for biases.

    Each matrix is drawn from [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
    Deterministic for a given Rng state.
    """
    dt = config.dtype
    e, h, v, l = (config.embed_dim, config.hidden_dim, config.vocab_size,
                  config.label_count)

    def mat(rows, cols):
        s = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-s, s, (rows, cols), dtype=dt)

    def gru_block():
        ten = []
        for _ in range(3):  # z, r, h gates in order
            ten.extend([mat(h, e), mat(h, h), np.zeros(h, dtype=dt)])
        return GruBlock(*ten)

    # draw order is fixed and documented: embedding, fwd block, bwd block, outputs
    embedding = mat(v, e)
    fwd = gru_block()
    bwd = gru_block()
    out_fwd = mat(l, h)
    out_bwd = mat(l, h)
    out_bias = np.zeros(l, dtype=dt)
    return ModelParams(embedding, fwd, bwd, out_fwd, out_bwd, out_bias)


@dataclass
class ForwardTrace:
    """Cached activations of one forward pass, batch-first.

    Shapes: char_ids (B, T); x (B, T, e) embeddings after dropout;
    z/r/hc/h (B, T, H) per direction; logits and posteriors (B, T, L);
    drop_mask (B, T, e); valid_len (B,) counts of non-padding positions.
    """
    char_ids: np.ndarray
    x: np.ndarray
    drop_mask: np.ndarray
    z_f: np.ndarray
    r_f: np.ndarray
    hc_f: np.ndarray
    h_f: np.ndarray
    z_b: np.ndarray
    r_b: np.ndarray
    hc_b: np.ndarray
    h_b: np.ndarray
    logits: np.ndarray
    posteriors: np.ndarray
    valid_len: np.ndarray


def gru_step(block, x, h_prev):
    """One GRU update for a single timestep.

    z = sigmoid(w_z x + v_z h_prev + b_z)
    r = sigmoid(w_r x + v_r h_prev + b_r)
    hc = tanh(w_h x + v_h (r * h_prev) + b_h)
    h = (1 - z) * h_prev + z * hc
    """
    x = np.asarray(x)
    h_prev = np.asarray(h_prev)
    if x.shape[-1] != block.w_z.shape[1]:
        raise DimensionError(f"input len {x.shape} vs w_z {block.w_z.shape}")
    if h_prev.shape[-1] != block.v_z.shape[1]:
        raise DimensionError(f"hidden len {h_prev.shape} vs v_z {block.v_z.shape}")
    h, _, _, _ = _gru_step_batch(block, x[None, :], h_prev[None, :],
                                 x[None, :] @ block.w_z.T + block.b_z,
                                 x[None, :] @ block.w_r.T + block.b_r,
                                 x[None, :] @ block.w_h.T + block.b_h)
    return h[0]


def _gru_step_batch(block, x, h_prev, xz, xr, xh):
    """Batched GRU update; x-projections are precomputed by the caller."""
    z = sigmoid(xz + h_prev @ block.v_z.T)
    r = sigmoid(xr + h_prev @ block.v_r.T)
    hc = np.tanh(xh + (r * h_prev) @ block.v_h.T)
    h = (1.0 - z) * h_prev + z * hc
    return h, z, r, hc


def _run_direction(block, x, reverse):
    """Unroll one direction over the window.  x is (B, T, e)."""
    B, T, _ = x.shape
    H = block.v_z.shape[0]
    dt = x.dtype
    xz = x @ block.w_z.T + block.b_z
    xr = x @ block.w_r.T + block.b_r
    xh = x @ block.w_h.T + block.b_h
    z_a = np.empty((B, T, H), dtype=dt)
    r_a = np.empty((B, T, H), dtype=dt)
    hc_a = np.empty((B, T, H), dtype=dt)
    h_a = np.empty((B, T, H), dtype=dt)
    h = np.zeros((B, H), dtype=dt)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h, z, r, hc = _gru_step_batch(block, x[:, t], h, xz[:, t], xr[:, t], xh[:, t])
        z_a[:, t], r_a[:, t], hc_a[:, t], h_a[:, t] = z, r, hc, h
    return z_a, r_a, hc_a, h_a


def forward_batch(params, config, char_ids, train_mode=False, rng=None,
                  drop_mask=None):
    """Forward pass over a batch of windows; returns a ForwardTrace.

    In train mode a fresh inverted-dropout mask multiplies every embedding
    vector (one mask per timestep per window); pass drop_mask to reuse a
    recorded mask (gradient checking).  Inference applies no dropout.
    """
    char_ids = np.asarray(char_ids)
    if char_ids.ndim != 2:
        raise DimensionError(f"char_ids must be (batch, window), got {char_ids.shape}")
    if char_ids.min() < 0 or char_ids.max() >= config.vocab_size:
        bad = char_ids.flat[np.argmax((char_ids < 0) | (char_ids >= config.vocab_size))]
        raise IndexError(f"character id {bad} outside vocabulary of size {config.vocab_size}")
    dt = config.dtype
    B, T = char_ids.shape

    x = params.embedding[char_ids]  # (B, T, e)
    if drop_mask is None:
        if train_mode and config.keep_prob < 1.0:
            if rng is None:
                raise ValueError("train_mode requires an Rng for dropout")
            drop_mask = dropout_mask(rng, None, config.keep_prob, dtype=dt,
                                     shape=(B, T, config.embed_dim))
        else:
            drop_mask = np.ones((B, T, config.embed_dim), dtype=dt)
    x = x * drop_mask

    z_f, r_f, hc_f, h_f = _run_direction(params.fwd, x, reverse=False)
    z_b, r_b, hc_b, h_b = _run_direction(params.bwd, x, reverse=True)

    logits = h_f @ params.out_fwd.T + h_b @ params.out_bwd.T + params.out_bias
    posteriors = softmax(logits)
    valid_len = np.sum(char_ids != PAD_ID, axis=1)
    return ForwardTrace(char_ids, x, drop_mask, z_f, r_f, hc_f, h_f,
                        z_b, r_b, hc_b, h_b, logits, posteriors, valid_len)


def forward_window(params, config, char_ids, train_mode=False, rng=None,
                   drop_mask=None):
    """Single-window forward pass.  Trace arrays keep a batch axis of 1."""
    char_ids = np.asarray(char_ids)
    if drop_mask is not None and drop_mask.ndim == 2:
        drop_mask = drop_mask[None]
    return forward_batch(params, config, char_ids[None, :], train_mode, rng, drop_mask)


def _backprop_direction(block, x, trace_zrh, dH, reverse):
    """BPTT through one direction.  Returns (grads dict, dX)."""
    z_a, r_a, hc_a, h_a = trace_zrh
    B, T, H = h_a.shape
    dt = x.dtype
    dAz = np.empty((B, T, H), dtype=dt)
    dAr = np.empty((B, T, H), dtype=dt)
    dAh = np.empty((B, T, H), dtype=dt)
    dVz = np.zeros_like(block.v_z)
    dVr = np.zeros_like(block.v_r)
    dVh = np.zeros_like(block.v_h)
    carry = np.zeros((B, H), dtype=dt)
    zero = np.zeros((B, H), dtype=dt)
    # walk time in the direction opposite to the unroll
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        if reverse:
            h_prev = h_a[:, t + 1] if t + 1 < T else zero
        else:
            h_prev = h_a[:, t - 1] if t > 0 else zero
        z, r, hc = z_a[:, t], r_a[:, t], hc_a[:, t]
        dh = dH[:, t] + carry
        dz = dh * (hc - h_prev)
        dah = dh * z * (1.0 - hc * hc)
        carry = dh * (1.0 - z)
        drh = dah @ block.v_h
        dVh += dah.T @ (r * h_prev)
        dar = drh * h_prev * r * (1.0 - r)
        carry += drh * r
        dVr += dar.T @ h_prev
        carry += dar @ block.v_r
        daz = dz * z * (1.0 - z)
        dVz += daz.T @ h_prev
        carry += daz @ block.v_z
        dAz[:, t], dAr[:, t], dAh[:, t] = daz, dar, dah
    xf = x.reshape(B * T, -1)
    grads = {
        "w_z": dAz.reshape(B * T, H).T @ xf, "v_z": dVz, "b_z": dAz.sum((0, 1)),
        "w_r": dAr.reshape(B * T, H).T @ xf, "v_r": dVr, "b_r": dAr.sum((0, 1)),
        "w_h": dAh.reshape(B * T, H).T @ xf, "v_h": dVh, "b_h": dAh.sum((0, 1)),
    }
    dX = dAz @ block.w_z + dAr @ block.w_r + dAh @ block.w_h
    return grads, dX


def backward_batch(params, config, trace, gold, loss_mask):
    """Loss and exact analytic gradients for a batch of windows.

    Per window the loss is the mean cross-entropy over masked-in timesteps;
    the batch loss (and every gradient) is the mean over windows.
    """
    gold = np.asarray(gold)
    loss_mask = np.asarray(loss_mask)
    B, T, L = trace.posteriors.shape
    if gold.shape != (B, T) or loss_mask.shape != (B, T):
        raise DimensionError(
            f"gold {gold.shape} / loss_mask {loss_mask.shape} do not match trace ({B}, {T})")
    dt = config.dtype

    n_masked = np.maximum(loss_mask.sum(axis=1), 1)
    weight = (loss_mask / n_masked[:, None] / B).astype(dt)  # (B, T)

    p_gold = np.take_along_axis(trace.posteriors, gold[..., None], axis=2)[..., 0]
    nll = -np.log(np.maximum(p_gold, 1e-12))
    loss = float(np.sum(nll * weight))

    dlogits = trace.posteriors * weight[..., None]
    np.subtract.at(dlogits.reshape(B * T, L),
                   (np.arange(B * T), gold.ravel()),
                   weight.ravel())

    grads = zeros_like_params(params)
    flat = dlogits.reshape(B * T, L)
    grads.out_fwd[...] = flat.T @ trace.h_f.reshape(B * T, -1)
    grads.out_bwd[...] = flat.T @ trace.h_b.reshape(B * T, -1)
    grads.out_bias[...] = flat.sum(0)

    dHf = dlogits @ params.out_fwd
    dHb = dlogits @ params.out_bwd
    gf, dXf = _backprop_direction(params.fwd, trace.x,
                                  (trace.z_f, trace.r_f, trace.hc_f, trace.h_f),
                                  dHf, reverse=False)
    gb, dXb = _backprop_direction(params.bwd, trace.x,
                                  (trace.z_b, trace.r_b, trace.hc_b, trace.h_b),
                                  dHb, reverse=True)
    for name, g in gf.items():
        setattr(grads.fwd, name, g)
    for name, g in gb.items():
        setattr(grads.bwd, name, g)

    dE = (dXf + dXb) * trace.drop_mask
    np.add.at(grads.embedding, trace.char_ids.ravel(),
              dE.reshape(B * T, -1))
    return grads, loss


def backward_window(params, config, trace, gold, loss_mask):
    """Single-window wrapper around backward_batch."""
    return backward_batch(params, config, trace,
                          np.asarray(gold)[None, :], np.asarray(loss_mask)[None, :])


def make_adam_states(params, learning_rate=1e-4, beta1=0.9, beta2=0.999,
                     epsilon=1e-8):
    """One AdamState per parameter tensor, keyed by canonical tensor name."""
    return {name: AdamState(t.shape, dtype=t.dtype, learning_rate=learning_rate,
                            beta1=beta1, beta2=beta2, epsilon=epsilon)
            for name, t in params.tensors()}


def train_step(params, config, batch, adam_states, rng):
    """One optimization step on a batch of windows; returns the mean loss.

    batch is (char_ids, gold, loss_mask), each (B, T).  Gradients are
    averaged over windows, then each tensor gets one Adam update.
    """
    char_ids, gold, loss_mask = batch
    if len(char_ids) == 0:
        raise ValueError("empty batch")
    trace = forward_batch(params, config, char_ids, train_mode=True, rng=rng)
    grads, loss = backward_batch(params, config, trace, gold, loss_mask)
    grad_map = dict(grads.tensors())
    for name, tensor in params.tensors():
        adam_step(tensor, grad_map[name], adam_states[name])
    return loss
