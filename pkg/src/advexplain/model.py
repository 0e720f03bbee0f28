"""Linear-softmax and ReLU MLP classifiers with hand-written backpropagation."""

import json
import struct

import numpy as np

from .nslkdd import N_CLASSES

PROB_FLOOR = 1e-12


class ClassifierModel:
    """Feed-forward classifier; ``hidden=()`` gives the linear softmax model.

    Weights are stored as ``(fan_out, fan_in)`` matrices so that
    ``logits = W @ x + b`` for a single sample.
    """

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix")
        for i, (W, b) in enumerate(zip(weights, biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {i}: bad shapes {W.shape}, {b.shape}")
            if i and W.shape[1] != weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width {W.shape[1]} != {weights[i - 1].shape[0]}")
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def linear(cls, input_dim, n_classes=N_CLASSES, seed=42):
        return cls.create(input_dim, (), n_classes, seed)

    @classmethod
    def mlp(cls, input_dim, hidden=(64, 64), n_classes=N_CLASSES, seed=42):
        return cls.create(input_dim, tuple(hidden), n_classes, seed)

    @classmethod
    def create(cls, input_dim, hidden=(), n_classes=N_CLASSES, seed=42):
        rng = np.random.default_rng(seed)
        widths = [input_dim, *hidden, n_classes]
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def architecture(self):
        return "linear" if len(self.weights) == 1 else "mlp"

    @property
    def hidden(self):
        return tuple(W.shape[0] for W in self.weights[:-1])

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def n_classes(self):
        return self.weights[-1].shape[0]

    def params(self):
        """Parameters in layer order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self):
        return ClassifierModel([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def _forward(self, X):
        """Return (pre-activations, activations) per layer for a batch."""
        acts = [X]
        pre = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W.T + b
            pre.append(z)
            acts.append(z if i == len(self.weights) - 1 else np.maximum(z, 0.0))
        return pre, acts

    def logits(self, X):
        return self._forward(_as_batch(self, X))[1][-1]

    def _backward(self, pre, acts, dlogits):
        """Backpropagate d(loss)/d(logits); returns (param grads, input grad)."""
        grads_W = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        dz = dlogits
        for i in range(len(self.weights) - 1, -1, -1):
            grads_W[i] = dz.T @ acts[i]
            grads_b[i] = dz.sum(axis=0)
            da = dz @ self.weights[i]
            if i:
                dz = da * (pre[i - 1] > 0)
        return grads_W, grads_b, da


def _as_batch(model, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.input_dim:
        raise ValueError(f"dimension mismatch: input has {X.shape[-1]} features, model expects {model.input_dim}")
    return X.reshape(-1, model.input_dim)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_proba(model, x):
    """Class probabilities; a single vector in gives a single vector out."""
    x = np.asarray(x, dtype=float)
    p = softmax(model.logits(x))
    return p[0] if x.ndim == 1 else p


def one_hot(labels, n_classes=N_CLASSES):
    labels = np.asarray(labels, dtype=np.intp)
    T = np.zeros(labels.shape + (n_classes,))
    np.put_along_axis(T, labels[..., None], 1.0, axis=-1)
    return T


def cross_entropy(target, probs):
    """-sum(target * log(probs)) with probs clamped at 1e-12; batched over leading axes."""
    return -np.sum(np.asarray(target) * np.log(np.maximum(probs, PROB_FLOOR)), axis=-1)


def grad_input(model, x, target):
    """d cross_entropy(target, forward_proba(model, x)) / dx for one sample."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"dimension mismatch: expected shape ({model.input_dim},), got {x.shape}")
    target = _target_vector(target, model.n_classes)
    pre, acts = model._forward(x[None, :])
    dlogits = softmax(acts[-1]) - target
    return model._backward(pre, acts, dlogits)[2][0]


def grad_params(model, batch_X, batch_targets, weight_decay=0.0):
    """Mean cross-entropy gradient over the batch plus L2 decay on the weights.

    Returns ``(loss, grads)`` with ``grads`` ordered like ``model.params()``;
    ``loss`` is the mean data term without the decay penalty.
    """
    X = _as_batch(model, batch_X)
    T = np.asarray(batch_targets, dtype=float)
    if T.ndim == 1:
        T = one_hot(T.astype(np.intp), model.n_classes)
    n = X.shape[0]
    pre, acts = model._forward(X)
    probs = softmax(acts[-1])
    loss = float(cross_entropy(T, probs).mean())
    gW, gb, _ = model._backward(pre, acts, (probs - T) / n)
    grads = []
    for W, dW, db in zip(model.weights, gW, gb):
        grads += [dW + weight_decay * W, db]
    return loss, grads


def predict_class(model, x):
    """Argmax of the probabilities; ties go to the lowest index (numpy argmax semantics)."""
    x = np.asarray(x, dtype=float)
    pred = np.argmax(model.logits(x), axis=-1)
    return int(pred[0]) if x.ndim == 1 else pred


def _target_vector(target, n_classes):
    if np.isscalar(target) or np.ndim(target) == 0:
        return one_hot(int(target), n_classes)
    return np.asarray(target, dtype=float)


# -- persistence ------------------------------------------------------------
#
# Layout (all integers little-endian):
#   8 bytes   magic b"ADVXMDL\0"
#   uint32    format version (1)
#   uint32    header length H
#   H bytes   UTF-8 JSON header (sorted keys)
#   payload   float64 little-endian arrays, row-major, in header["arrays"] order

MAGIC = b"ADVXMDL\0"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def save_model(path, model, schema=None, stats=None, bounds=None, metadata=None):
    arrays = []
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays += [(f"W{i}", W), (f"b{i}", b)]
    if stats is not None:
        arrays += [("stats_mean", stats.mean), ("stats_std", stats.std)]
    if bounds is not None:
        arrays += [("x_min", bounds[0]), ("x_max", bounds[1])]
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": model.architecture,
        "hidden": list(model.hidden),
        "input_dim": model.input_dim,
        "n_classes": model.n_classes,
        "layer_shapes": [list(W.shape) for W in model.weights],
        "arrays": [{"name": name, "shape": list(np.shape(a))} for name, a in arrays],
        "schema_fingerprint": schema.fingerprint() if schema is not None else None,
        "stats_fingerprint": stats.fingerprint() if stats is not None else None,
        "schema": schema.to_dict() if schema is not None else None,
        "metadata": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path):
    """Return ``(model, header, arrays)``; ``arrays`` holds every stored array by name."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    header = json.loads(data[16:16 + hlen].decode())
    offset = 16 + hlen
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        if offset + 8 * count > len(data):
            raise ModelFormatError(f"{path}: truncated payload")
        arrays[spec["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=offset) \
            .reshape(spec["shape"]).astype(float)
        offset += 8 * count
    n_layers = len(header["layer_shapes"])
    model = ClassifierModel([arrays[f"W{i}"] for i in range(n_layers)],
                            [arrays[f"b{i}"] for i in range(n_layers)])
    return model, header, arrays
