"""MLP models with analytic gradients and exact Hessian-vector products.

Two model families:

* ``MlpClassifier`` — multi-layer perceptron with softmax cross-entropy and a
  per-layer output scale knob. Scaling every layer's pre-activation output by
  a constant c >= 1 rescales the curvature of layers at different depths by
  different powers of c, which is how the scale knob manufactures block
  heterogeneity without touching the weight initialization.

* ``OneHiddenBinary`` — the bias-free one-hidden-layer binary classifier
  f(x) = sum_i v_i phi(w_i . x) with logistic loss. Its cross-neuron
  curvature has the closed form
  mean_n p(1-p) v_i v_j phi'(z_i) phi'(z_j) x x^T, which vanishes as the
  classifier grows confident; ``off_block_curvature`` evaluates it directly.

Hessian-vector products propagate directional tangents through the forward
and backward passes (no automatic differentiation, no finite differences).
``exact_hessian_small`` builds a dense Hessian from central differences of
the analytic gradient instead, deliberately implementation-distinct so the
two can cross-validate each other.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError, NumericalError
from ..operators import BlockPartition, SymmetricOperator, symmetrize
from .data import Dataset

EXACT_HESSIAN_MAX_PARAMS = 2000
FD_STEP = 1e-5


def _activation(name: str):
    if name == "tanh":
        return (
            np.tanh,
            lambda z: 1.0 - np.tanh(z) ** 2,
            lambda z: -2.0 * np.tanh(z) * (1.0 - np.tanh(z) ** 2),
        )
    if name == "relu":
        return (
            lambda z: np.maximum(z, 0.0),
            lambda z: (z > 0).astype(float),
            lambda z: np.zeros_like(z),
        )
    raise InputError(f"unknown activation {name!r}; choose tanh or relu")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class MlpClassifier:
    """Fully-connected classifier; parameters live in one flat vector."""

    def __init__(self, in_dim: int, hidden, n_classes: int,
                 activation: str = "relu", output_scale: float = 1.0):
        if output_scale < 1.0:
            raise InputError(f"output scale must be >= 1, got {output_scale}")
        self.dims = [int(in_dim)] + [int(h) for h in hidden] + [int(n_classes)]
        self.activation = activation
        self.phi, self.dphi, self.ddphi = _activation(activation)
        self.scale = float(output_scale)
        self.n_classes = int(n_classes)
        shapes = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            shapes.append((fan_out, fan_in))
            shapes.append((fan_out,))
        self.shapes = shapes
        self.n_params = sum(int(np.prod(s)) for s in shapes)

    # parameter layout: W1, b1, W2, b2, ...
    def unpack(self, w: np.ndarray):
        if w.shape != (self.n_params,):
            raise InputError(f"parameter vector has shape {w.shape}, expected ({self.n_params},)")
        out = []
        pos = 0
        for s in self.shapes:
            size = int(np.prod(s))
            out.append(w[pos : pos + size].reshape(s))
            pos += size
        return out

    def pack(self, tensors) -> np.ndarray:
        return np.concatenate([np.asarray(t, dtype=float).ravel() for t in tensors])

    def tensor_partition(self) -> BlockPartition:
        """One block per weight tensor and per bias tensor."""
        return BlockPartition.from_sizes([int(np.prod(s)) for s in self.shapes])

    def block_labels(self):
        labels = []
        for k in range(len(self.dims) - 1):
            labels += [f"layer{k + 1}.weight", f"layer{k + 1}.bias"]
        return labels

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor, fan_in of the layer."""
        tensors = []
        for idx, s in enumerate(self.shapes):
            bound = 1.0 / np.sqrt(self.dims[idx // 2])  # W and b share a layer
            tensors.append(rng.uniform(-bound, bound, size=s))
        return self.pack(tensors)

    def _forward(self, w, x):
        params = self.unpack(w)
        a = x
        zs, acts = [], [a]
        n_layers = len(self.dims) - 1
        for k in range(n_layers):
            wk, bk = params[2 * k], params[2 * k + 1]
            z = self.scale * (a @ wk.T + bk)
            zs.append(z)
            a = self.phi(z) if k < n_layers - 1 else z
            acts.append(a)
        return params, zs, acts

    def loss_grad(self, w: np.ndarray, data: Dataset, indices=None):
        x, y = _select(data, indices)
        params, zs, acts = self._forward(w, x)
        n = len(x)
        logp = _log_softmax(acts[-1])
        loss = -float(logp[np.arange(n), y].mean())
        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = self._backward(params, zs, acts, delta)
        return loss, self.pack(grads)

    def _backward(self, params, zs, acts, delta):
        n_layers = len(self.dims) - 1
        grads = [None] * (2 * n_layers)
        for k in reversed(range(n_layers)):
            grads[2 * k] = self.scale * (delta.T @ acts[k])
            grads[2 * k + 1] = self.scale * delta.sum(axis=0)
            if k > 0:
                wk = params[2 * k]
                delta = self.scale * (delta @ wk) * self.dphi(zs[k - 1])
        return grads

    def hvp(self, w: np.ndarray, data: Dataset, v: np.ndarray, indices=None) -> np.ndarray:
        """Hessian-vector product via forward-over-reverse tangent propagation."""
        if np.shape(v) != (self.n_params,):
            raise InputError(f"direction has shape {np.shape(v)}, expected ({self.n_params},)")
        x, y = _select(data, indices)
        params, zs, acts = self._forward(w, x)
        tangents = self.unpack(np.asarray(v, dtype=float))
        n = len(x)
        n_layers = len(self.dims) - 1

        # forward tangents
        a_dot = np.zeros_like(x)
        z_dots, a_dots = [], [a_dot]
        for k in range(n_layers):
            wk, bk = params[2 * k], params[2 * k + 1]
            vk, vbk = tangents[2 * k], tangents[2 * k + 1]
            z_dot = self.scale * (a_dot @ wk.T + acts[k] @ vk.T + vbk)
            z_dots.append(z_dot)
            a_dot = self.dphi(zs[k]) * z_dot if k < n_layers - 1 else z_dot
            a_dots.append(a_dot)

        p = np.exp(_log_softmax(acts[-1]))
        delta = p.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        zk_dot = z_dots[-1]
        delta_dot = (p * zk_dot - p * (p * zk_dot).sum(axis=1, keepdims=True)) / n

        hv = [None] * (2 * n_layers)
        for k in reversed(range(n_layers)):
            hv[2 * k] = self.scale * (delta_dot.T @ acts[k] + delta.T @ a_dots[k])
            hv[2 * k + 1] = self.scale * delta_dot.sum(axis=0)
            if k > 0:
                wk, vk = params[2 * k], tangents[2 * k]
                dphi = self.dphi(zs[k - 1])
                back = delta @ wk
                delta_dot = self.scale * (
                    (delta_dot @ wk + delta @ vk) * dphi
                    + back * self.ddphi(zs[k - 1]) * z_dots[k - 1]
                )
                delta = self.scale * back * dphi
        return self.pack(hv)

    def logits(self, w: np.ndarray, x: np.ndarray) -> np.ndarray:
        _, _, acts = self._forward(w, x)
        return acts[-1]

    def accuracy(self, w: np.ndarray, data: Dataset) -> float:
        pred = self.logits(w, data.inputs).argmax(axis=1)
        return float((pred == data.labels).mean())


class OneHiddenBinary:
    """Bias-free one-hidden-layer binary classifier with logistic loss."""

    def __init__(self, in_dim: int, width: int, activation: str = "tanh"):
        self.in_dim = int(in_dim)
        self.width = int(width)
        self.activation = activation
        self.phi, self.dphi, self.ddphi = _activation(activation)
        self.n_params = self.width * self.in_dim + self.width

    def unpack(self, w: np.ndarray):
        if w.shape != (self.n_params,):
            raise InputError(f"parameter vector has shape {w.shape}, expected ({self.n_params},)")
        cut = self.width * self.in_dim
        return w[:cut].reshape(self.width, self.in_dim), w[cut:]

    def pack(self, weight, head) -> np.ndarray:
        return np.concatenate([np.asarray(weight, float).ravel(), np.asarray(head, float)])

    def neuron_partition(self) -> BlockPartition:
        """One block per hidden neuron's input weights, plus the head block."""
        return BlockPartition.from_sizes([self.in_dim] * self.width + [self.width])

    def neuron_slice(self, i: int) -> slice:
        if not 0 <= i < self.width:
            raise InputError(f"neuron index {i} out of range 0..{self.width - 1}")
        return slice(i * self.in_dim, (i + 1) * self.in_dim)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        bound_w = 1.0 / np.sqrt(self.in_dim)
        bound_v = 1.0 / np.sqrt(self.width)
        return self.pack(
            rng.uniform(-bound_w, bound_w, (self.width, self.in_dim)),
            rng.uniform(-bound_v, bound_v, self.width),
        )

    @staticmethod
    def _signs(y: np.ndarray) -> np.ndarray:
        bad = set(np.unique(y)) - {0, 1}
        if bad:
            raise InputError(f"binary model needs labels in {{0, 1}}, got extras {sorted(bad)}")
        return 2.0 * y - 1.0

    def _forward(self, w, x):
        weight, head = self.unpack(w)
        z = x @ weight.T
        a = self.phi(z)
        return weight, head, z, a, a @ head

    def loss_grad(self, w: np.ndarray, data: Dataset, indices=None):
        x, y = _select(data, indices)
        s = self._signs(y)
        weight, head, z, a, f = self._forward(w, x)
        n = len(x)
        loss = float(np.logaddexp(0.0, -s * f).mean())
        dldf = -s * _sigmoid(-s * f) / n
        gv = a.T @ dldf
        e = dldf[:, None] * head[None, :] * self.dphi(z)
        return loss, self.pack(e.T @ x, gv)

    def hvp(self, w: np.ndarray, data: Dataset, v: np.ndarray, indices=None) -> np.ndarray:
        if np.shape(v) != (self.n_params,):
            raise InputError(f"direction has shape {np.shape(v)}, expected ({self.n_params},)")
        x, y = _select(data, indices)
        s = self._signs(y)
        weight, head, z, a, f = self._forward(w, x)
        vw, vh = self.unpack(np.asarray(v, dtype=float))
        n = len(x)

        dphi = self.dphi(z)
        z_dot = x @ vw.T
        f_dot = (dphi * z_dot) @ head + a @ vh
        p = _sigmoid(s * f)
        dldf = -s * (1.0 - p) / n
        dldf_dot = p * (1.0 - p) * f_dot / n

        gv_dot = (dphi * z_dot).T @ dldf + a.T @ dldf_dot
        e_dot = (
            dldf_dot[:, None] * head[None, :] * dphi
            + dldf[:, None] * vh[None, :] * dphi
            + dldf[:, None] * head[None, :] * self.ddphi(z) * z_dot
        )
        return self.pack(e_dot.T @ x, gv_dot)

    def off_block_curvature(self, w: np.ndarray, data: Dataset, i: int, j: int) -> np.ndarray:
        """Closed-form cross-neuron curvature block (i != j), averaged over data."""
        if i == j:
            raise InputError("closed form covers distinct neurons only")
        x, y = _select(data, None)
        s = self._signs(y)
        weight, head, z, a, f = self._forward(w, x)
        p = _sigmoid(s * f)
        coeff = p * (1.0 - p) * head[i] * head[j] * self.dphi(z[:, i]) * self.dphi(z[:, j])
        return (x.T * coeff) @ x / len(x)

    def scores(self, w: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self._forward(w, x)[-1]

    def accuracy(self, w: np.ndarray, data: Dataset) -> float:
        pred = (self.scores(w, data.inputs) > 0).astype(int)
        return float((pred == data.labels).mean())


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    ex = np.exp(t[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _select(data: Dataset, indices):
    if indices is None:
        return data.inputs, data.labels
    return data.inputs[indices], data.labels[indices]


def loss_grad(model, data: Dataset, w: np.ndarray):
    return model.loss_grad(w, data)


def hvp(model, data: Dataset, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return model.hvp(w, data, v)


def hessian_operator(model, data: Dataset, w: np.ndarray) -> SymmetricOperator:
    """The loss curvature at w as a matrix-free symmetric operator."""
    w = np.asarray(w, dtype=float).copy()
    return SymmetricOperator(model.n_params, lambda v: model.hvp(w, data, v))


def exact_hessian_small(model, data: Dataset, w: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Dense Hessian from central differences of the analytic gradient.

    Guarded to small models; the pre-symmetrization asymmetry must stay below
    1e-6 relative or the result is rejected as numerically unsound.
    """
    if model.n_params > EXACT_HESSIAN_MAX_PARAMS:
        raise InputError(
            f"model has {model.n_params} parameters; dense finite-difference "
            f"Hessian is guarded to {EXACT_HESSIAN_MAX_PARAMS}"
        )
    w = np.asarray(w, dtype=float)
    d = model.n_params
    h = np.empty((d, d))
    for k in range(d):
        hk = step * max(1.0, abs(w[k]))
        wp = w.copy()
        wp[k] += hk
        wm = w.copy()
        wm[k] -= hk
        _, gp = model.loss_grad(wp, data)
        _, gm = model.loss_grad(wm, data)
        h[:, k] = (gp - gm) / (2.0 * hk)
    scale = np.max(np.abs(h)) or 1.0
    asym = np.max(np.abs(h - h.T)) / scale
    if asym > 1e-6:
        raise NumericalError(
            f"finite-difference Hessian asymmetry {asym:.2e} exceeds 1e-6; "
            f"gradient or step size is unsound"
        )
    return symmetrize(h)


def block_dominance(hessian: np.ndarray, part: BlockPartition) -> float:
    """Share of squared Frobenius mass held by the principal blocks."""
    hessian = np.asarray(hessian, dtype=float)
    if hessian.shape != (part.dim, part.dim):
        raise InputError(
            f"partition covers {part.dim} indices but matrix is {hessian.shape}"
        )
    total = float(np.sum(hessian**2))
    if total == 0.0:
        return 1.0
    on_blocks = sum(float(np.sum(hessian[a:b, a:b] ** 2)) for a, b in part.ranges)
    return on_blocks / total
