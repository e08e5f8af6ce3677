"""Feed-forward and recurrent layers built on the autodiff tensor."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, softmax


def _init_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class PerceptronNet:
    """Fully connected net. Hidden layers use tanh, output is linear logits."""

    def __init__(self, sizes, rng: np.random.Generator):
        self.sizes = list(sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(Tensor(_init_weight(rng, fan_in, fan_out), requires_grad=True))
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    def forward(self, x) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        if h.data.ndim != 2 or h.data.shape[1] != self.sizes[0]:
            raise ValueError(
                f"input width {h.data.shape} incompatible with net input {self.sizes[0]}"
            )
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = h.tanh()
        return h

    __call__ = forward

    def logits(self, x) -> np.ndarray:
        """Forward without building a graph; returns raw numpy logits."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i != last:
                h = np.tanh(h)
        return h

    def parameters(self):
        return self.weights + self.biases

    def param_dict(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out


class LSTMCell:
    """Standard LSTM cell; gate order in the packed matrices is i, f, g, o."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.wx = Tensor(_init_weight(rng, input_size, 4 * hidden_size), requires_grad=True)
        self.wh = Tensor(_init_weight(rng, hidden_size, 4 * hidden_size), requires_grad=True)
        self.b = Tensor(np.zeros(4 * hidden_size), requires_grad=True)

    def init_state(self, batch: int):
        zeros = np.zeros((batch, self.hidden_size))
        return Tensor(zeros), Tensor(zeros.copy())

    def step(self, x: Tensor, h: Tensor, c: Tensor):
        if x.data.shape[1] != self.input_size:
            raise ValueError(f"input width {x.data.shape[1]} != {self.input_size}")
        gates = x @ self.wx + h @ self.wh + self.b
        hs = self.hidden_size
        i = gates[:, 0 * hs:1 * hs].sigmoid()
        f = gates[:, 1 * hs:2 * hs].sigmoid()
        g = gates[:, 2 * hs:3 * hs].tanh()
        o = gates[:, 3 * hs:4 * hs].sigmoid()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        return h_new, c_new

    def parameters(self):
        return [self.wx, self.wh, self.b]

    def param_dict(self):
        return {"wx": self.wx, "wh": self.wh, "b": self.b}


def sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> int:
    """Sample an index from softmax(logits) using inverse-CDF on one uniform."""
    probs = softmax(np.asarray(logits).ravel())
    return int(np.searchsorted(np.cumsum(probs), rng.random()))
