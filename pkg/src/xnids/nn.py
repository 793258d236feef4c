"""Feed-forward attack/normal classifier.

A fully connected network with rectifier hidden layers and a two-unit
softmax output, trained with Adam on cross-entropy. Weights are stored
as 32-bit floats; all arithmetic runs in 64-bit. Input gradients are
exposed in logit space for the contrastive explainer.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError

MODEL_MAGIC = "xnids-model/1"


@dataclass
class MlpModel:
    layer_sizes: tuple
    weights: list          # per layer, (fan_in, fan_out) float32
    biases: list           # per layer, (fan_out,) float32
    dropout_rate: float = 0.0
    seed: int = 0
    hidden_activation: str = "relu"
    output_activation: str = "softmax"

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(list(self.layer_sizes)).encode())
        for W, b in zip(self.weights, self.biases):
            h.update(W.astype("<f4").tobytes())
            h.update(b.astype("<f4").tobytes())
        return h.hexdigest()[:16]

    def copy(self):
        return MlpModel(
            layer_sizes=tuple(self.layer_sizes),
            weights=[W.copy() for W in self.weights],
            biases=[b.copy() for b in self.biases],
            dropout_rate=self.dropout_rate,
            seed=self.seed,
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 512
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    dropout_rate: float = 0.1
    rng_seed: int = 0

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    zero_division: bool = False

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "zero_division": self.zero_division,
        }


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)


def init_model(layer_sizes, dropout_rate=0.0, seed=0) -> MlpModel:
    """Build a model with He-scaled random weights and zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(s < 1 for s in sizes):
        raise ValueError("every layer size must be >= 1")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)).astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases,
                    dropout_rate=float(dropout_rate), seed=int(seed))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logits(model: MlpModel, batch) -> np.ndarray:
    """Pre-softmax outputs; dropout disabled."""
    h = _check_batch(model, batch)
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ W.astype(np.float64) + b.astype(np.float64), 0.0)
    return h @ model.weights[-1].astype(np.float64) + model.biases[-1].astype(np.float64)


def forward(model: MlpModel, batch) -> np.ndarray:
    """Class probabilities, one row per input; rows sum to 1."""
    return _softmax(logits(model, batch))


def _check_batch(model, batch):
    h = np.asarray(batch, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    if h.shape[1] != model.n_inputs:
        raise ValueError(
            f"expected {model.n_inputs} input columns, got {h.shape[1]}")
    return h


def input_gradient(model: MlpModel, instance, target_class) -> np.ndarray:
    """Gradient of the target class's logit with respect to the inputs."""
    t = int(target_class)
    if not 0 <= t < model.n_outputs:
        raise ValueError(f"target_class {t} out of range")
    seed = np.zeros(model.n_outputs)
    seed[t] = 1.0
    _, grad = logit_combination_grad(model, instance, seed)
    return grad


def logit_combination_grad(model: MlpModel, instance, seed):
    """Value and input gradient of seed . logits(x) in one backward pass.

    Used by the contrastive explainer to differentiate logit margins
    (seed = e_target - e_other) without two separate passes.
    """
    x = np.asarray(instance, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_inputs:
        raise ValueError(f"expected a {model.n_inputs}-vector")
    h = x[None, :]
    pre = []
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        z = h @ W.astype(np.float64) + b.astype(np.float64)
        pre.append(z)
        h = np.maximum(z, 0.0)
    out = h @ model.weights[-1].astype(np.float64) + model.biases[-1].astype(np.float64)
    value = float(out[0] @ seed)

    g = np.asarray(seed, dtype=np.float64)[None, :]
    g = g @ model.weights[-1].astype(np.float64).T
    for W, z in zip(reversed(model.weights[:-1]), reversed(pre)):
        g = g * (z > 0.0)
        g = g @ W.astype(np.float64).T
    return value, g[0]


def train(model: MlpModel, data, config: TrainConfig):
    """Adam training on cross-entropy; returns (trained model, history).

    The input model is left untouched. Mini-batches are reshuffled each
    epoch with the seeded generator; dropout masks hidden activations
    during training only. Deterministic for a fixed seed and data.
    """
    config.validate()
    X = np.asarray(data.values, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise DataError("training data is empty")
    if X.shape[1] != model.n_inputs:
        raise ValueError(f"data has {X.shape[1]} columns, model expects {model.n_inputs}")
    if y.min(initial=0) < 0 or y.max(initial=0) >= model.n_outputs:
        raise DataError("labels must index model output classes")

    history = TrainHistory()
    trained = model.copy()
    if config.epochs == 0:
        return trained, history

    rng = np.random.default_rng(config.rng_seed)
    Ws = [W.astype(np.float64) for W in trained.weights]
    bs = [b.astype(np.float64) for b in trained.biases]
    mW = [np.zeros_like(W) for W in Ws]
    vW = [np.zeros_like(W) for W in Ws]
    mb = [np.zeros_like(b) for b in bs]
    vb = [np.zeros_like(b) for b in bs]
    onehot = np.eye(model.n_outputs)[y]
    drop = config.dropout_rate
    step = 0

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = X[idx], onehot[idx]
            bsize = len(idx)
            if drop > 0:
                masks = [
                    (rng.random((bsize, Ws[li].shape[1])) >= drop) / (1.0 - drop)
                    for li in range(len(Ws) - 1)
                ]
            else:
                masks = None
            loss, correct, gWs, gbs = _forward_backward(Ws, bs, xb, yb, y[idx], masks)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            total_loss += loss * bsize
            total_correct += correct

            step += 1
            b1c = 1.0 - config.adam_beta1 ** step
            b2c = 1.0 - config.adam_beta2 ** step
            for li in range(len(Ws)):
                for theta, grad, m, v in (
                    (Ws[li], gWs[li], mW[li], vW[li]),
                    (bs[li], gbs[li], mb[li], vb[li]),
                ):
                    m *= config.adam_beta1
                    m += (1.0 - config.adam_beta1) * grad
                    v *= config.adam_beta2
                    v += (1.0 - config.adam_beta2) * grad * grad
                    theta -= config.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + config.adam_epsilon)

        history.loss.append(total_loss / n)
        history.accuracy.append(total_correct / n)

    trained.weights = [W.astype(np.float32) for W in Ws]
    trained.biases = [b.astype(np.float32) for b in bs]
    trained.dropout_rate = drop
    return trained, history


def _forward_backward(Ws, bs, xb, onehot_b, y_idx, masks):
    """Cross-entropy loss, correct count, and parameter gradients for a batch.

    masks: per-hidden-layer inverted-dropout multipliers, or None.
    """
    bsize = xb.shape[0]
    acts = [xb]
    pre = []
    h = xb
    for li in range(len(Ws) - 1):
        z = h @ Ws[li] + bs[li]
        pre.append(z)
        h = np.maximum(z, 0.0)
        if masks is not None:
            h = h * masks[li]
        acts.append(h)
    out = h @ Ws[-1] + bs[-1]
    probs = _softmax(out)
    loss = -np.mean(np.log(probs[np.arange(bsize), y_idx] + 1e-12))
    correct = int((probs.argmax(axis=1) == y_idx).sum())

    gz = (probs - onehot_b) / bsize
    gWs = [None] * len(Ws)
    gbs = [None] * len(bs)
    gWs[-1] = acts[-1].T @ gz
    gbs[-1] = gz.sum(axis=0)
    g = gz @ Ws[-1].T
    for li in range(len(Ws) - 2, -1, -1):
        if masks is not None:
            g = g * masks[li]
        g = g * (pre[li] > 0.0)
        gWs[li] = acts[li].T @ g
        gbs[li] = g.sum(axis=0)
        if li > 0:
            g = g @ Ws[li].T
    return float(loss), correct, gWs, gbs


def loss_and_param_grads(model: MlpModel, X, y):
    """Deterministic (dropout-free) loss and parameter gradients.

    Same math the training loop runs; exposed so gradient checks can
    compare against finite differences.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    Ws = [W.astype(np.float64) for W in model.weights]
    bs = [b.astype(np.float64) for b in model.biases]
    onehot = np.eye(model.n_outputs)[y]
    loss, _, gWs, gbs = _forward_backward(Ws, bs, X, onehot, y, None)
    return loss, gWs, gbs


def predict_classes(model: MlpModel, X, batch_size=4096) -> np.ndarray:
    """Argmax class per row, evaluated in batches."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], batch_size):
        out[start : start + batch_size] = forward(
            model, X[start : start + batch_size]).argmax(axis=1)
    return out


def attack_probability(model: MlpModel, X, batch_size=4096) -> np.ndarray:
    """Probability of the attack class (index 1) per row."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], batch_size):
        out[start : start + batch_size] = forward(
            model, X[start : start + batch_size])[:, 1]
    return out


def evaluate(model: MlpModel, data) -> Metrics:
    """Accuracy/precision/recall/F1 with attack (label 1) as positive."""
    X = np.asarray(data.values, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise DataError("cannot evaluate on empty data")
    pred = predict_classes(model, X)
    return metrics_from_predictions(y, pred)


def metrics_from_predictions(y_true, y_pred) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    tn = int(np.sum((y_pred == 0) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    total = tp + fp + tn + fn
    zero_division = False
    accuracy = (tp + tn) / total
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, zero_division = 0.0, True
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, zero_division = 0.0, True
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, zero_division = 0.0, True
    return Metrics(accuracy=accuracy, precision=precision, recall=recall,
                   f1=f1, tp=tp, fp=fp, tn=tn, fn=fn, zero_division=zero_division)


# ---------------------------------------------------------------------------
# model artifact


def save_model(path, model: MlpModel):
    header = {
        "format_version": 1,
        "layer_sizes": list(model.layer_sizes),
        "dropout_rate": model.dropout_rate,
        "seed": model.seed,
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
    }
    with open(path, "wb") as fh:
        fh.write((MODEL_MAGIC + "\n").encode())
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for W, b in zip(model.weights, model.biases):
            fh.write(W.astype("<f4").tobytes(order="C"))
            fh.write(b.astype("<f4").tobytes(order="C"))


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        magic = fh.readline().decode().rstrip("\n")
        if magic != MODEL_MAGIC:
            raise DataError(f"not a model artifact: bad magic {magic!r}")
        header = json.loads(fh.readline().decode())
        sizes = tuple(header["layer_sizes"])
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            wb = fh.read(fan_in * fan_out * 4)
            bb = fh.read(fan_out * 4)
            if len(wb) != fan_in * fan_out * 4 or len(bb) != fan_out * 4:
                raise DataError("model artifact truncated")
            weights.append(np.frombuffer(wb, dtype="<f4").reshape(fan_in, fan_out).copy())
            biases.append(np.frombuffer(bb, dtype="<f4").copy())
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases,
                    dropout_rate=header["dropout_rate"], seed=header["seed"])
