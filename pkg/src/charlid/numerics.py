"""Minimal dense numerics: matmul, activations, loss, Adam and seeded RNG.

Everything runs on plain numpy arrays.  Two precisions are supported:
float32 (production training) and float64 (used by gradient checks and
oracle comparisons, where rounding noise would hide real bugs).
"""

import numpy as np

LOG_FLOOR = 1e-12


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ParameterError(ValueError):
    """A hyperparameter is outside its valid range."""


def dtype_for(precision):
    if precision == 32:
        return np.float32
    if precision == 64:
        return np.float64
    raise ParameterError(f"precision must be 32 or 64, got {precision}")


class Rng:
    """Seeded random generator (PCG64 under the hood).

    The stream is fully determined by the seed: same seed, same draws,
    on every platform and in every run.  No global numpy state is touched.
    """

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, shape, dtype=np.float32):
        return self._gen.uniform(low, high, size=shape).astype(dtype)

    def random(self, shape=None):
        return self._gen.random(size=shape)

    def integers(self, low, high, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, p=None):
        return int(self._gen.choice(n, p=p))

    def shuffle_list(self, items):
        """Return a new list with the items in a seeded random order."""
        order = self._gen.permutation(len(items))
        return [items[i] for i in order]


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def sigmoid(x):
    # evaluate on the negative half-line only, so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    x = np.asarray(x)
    if x.size == 0:
        raise ParameterError("softmax of an empty vector")
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(probs, gold):
    probs = np.asarray(probs)
    gold = int(gold)
    if not 0 <= gold < probs.shape[-1]:
        raise IndexError(f"gold label {gold} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(float(probs[gold]), LOG_FLOOR)))


class AdamState:
    """First/second moment accumulators for one parameter tensor."""

    def __init__(self, shape, dtype=np.float32, learning_rate=1e-4,
                 beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.step = 0
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon


def adam_step(params, grads, state):
    """One Adam update with bias correction.  Mutates params and state in place."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise DimensionError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * np.square(grads)
    m_hat = state.m / (1.0 - b1 ** t)
    v_hat = state.v / (1.0 - b2 ** t)
    params -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


def dropout_mask(rng, length, keep_prob, dtype=np.float32, shape=None):
    """Inverted-dropout mask: entries are 0 or 1/keep_prob, mean 1.

    Inference needs no rescaling because the scaling happens at train time.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ParameterError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if shape is None:
        shape = (length,)
    if keep_prob == 1.0:
        return np.ones(shape, dtype=dtype)
    keep = rng.random(shape) < keep_prob
    return keep.astype(dtype) / dtype(keep_prob)
