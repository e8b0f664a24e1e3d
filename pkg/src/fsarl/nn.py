"""Small feedforward networks with hand-written gradients and an Adam optimiser."""

from __future__ import annotations

import numpy as np

CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class Mlp:
    """Fully connected network, ReLU hidden layers, identity or bounded tanh head.

    All weights and biases live in one flat vector ``params``; ``weights[i]``
    and ``biases[i]`` are views into it, so optimisers and Polyak averaging
    work on ``params`` directly.

    Args:
        sizes: layer widths including input and output, e.g. ``(12, 100, 100, 2)``.
        out_scale: ``None`` for an identity head, otherwise outputs are
            ``out_scale * tanh(z)``.
        rng: generator used for initialisation.
        final_init: half-width of the uniform init of the last layer.
    """

    def __init__(self, sizes, out_scale=None, rng=None, final_init=3e-3):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ShapeError("need at least an input and an output size")
        self.out_scale = None if out_scale is None else float(out_scale)
        self.params = np.zeros(self.n_params)
        self._bind()
        if rng is not None:
            self.init(rng, final_init)

    @property
    def n_params(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def _bind(self):
        self.weights, self.biases = [], []
        off = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(self.params[off : off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(self.params[off : off + b])
            off += b

    def init(self, rng, final_init=3e-3):
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            bound = final_init if i == last else 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != self.params.shape:
            raise ShapeError(f"expected {self.params.shape[0]} parameters, got {flat.shape}")
        self.params[...] = flat

    def copy(self) -> "Mlp":
        net = Mlp(self.sizes, self.out_scale)
        net.params[...] = self.params
        return net

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.sizes[0]:
            raise ShapeError(f"input has {x.shape[-1]} features, network expects {self.sizes[0]}")
        return x

    def _forward(self, x):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_scale is not None:
                h = self.out_scale * np.tanh(z)
            else:
                h = z
            acts.append(h)
        return acts

    def forward(self, x) -> np.ndarray:
        """Outputs for one input ``(n_in,)`` or a batch ``(B, n_in)``."""
        x = self._check(x)
        return self._forward(x)[-1]

    __call__ = forward

    def backward(self, x, grad_out):
        """Reverse-mode gradients of ``sum(grad_out * forward(x))``.

        Returns ``(grad_params, grad_input)``; ``grad_params`` is laid out
        like ``params``.
        """
        x = self._check(x)
        single = x.ndim == 1
        if single:
            x = x[None]
        g = np.asarray(grad_out, dtype=float).reshape(x.shape[0], self.sizes[-1])
        acts = self._forward(x)
        grads = np.zeros_like(self.params)
        gw, gb = [], []
        off = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            gw.append(grads[off : off + a * b].reshape(a, b))
            off += a * b
            gb.append(grads[off : off + b])
            off += b
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            out = acts[i + 1]
            if i == last:
                if self.out_scale is not None:
                    g = g * (self.out_scale - out * out / self.out_scale)
            else:
                g = g * (out > 0)
            gw[i][...] = acts[i].T @ g
            gb[i][...] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, (g[0] if single else g)

    # -- checkpoints

    def save(self, path):
        """``.npz`` with ``version``, ``sizes``, ``out_scale`` (NaN = identity) and flat ``params``."""
        np.savez(
            path,
            version=np.int64(CHECKPOINT_VERSION),
            sizes=np.asarray(self.sizes, dtype=np.int64),
            out_scale=np.float64(np.nan if self.out_scale is None else self.out_scale),
            params=self.params,
        )

    @classmethod
    def load(cls, path) -> "Mlp":
        with np.load(path) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            scale = float(data["out_scale"])
            net = cls(data["sizes"].tolist(), None if np.isnan(scale) else scale)
            net.set_params(data["params"])
        return net


class Adam:
    """Adam with bias correction, operating in place on a flat parameter vector."""

    def __init__(self, n_params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params, grads):
        if grads.shape != self.m.shape:
            raise ShapeError("gradient length does not match optimiser state")
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grads
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grads * grads
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def polyak_update(target: Mlp, source: Mlp, tau: float) -> None:
    target.params *= 1.0 - tau
    target.params += tau * source.params
