"""Recognition networks: amortized posterior marginals from observation vectors.

An LR network computes z = sigmoid(a + W x). An MLP adds a tanh hidden layer,
z = sigmoid(a + W x + U tanh(b + V x)). The input x marks positive findings
only, so negative and unobserved findings look the same to the network.
Training minimizes the cross-entropy between z and sampled reference
diagnoses from the augmented network.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import POS, Bn2oNetwork, ObservationModel, ObservationVector
from .sampler import sample_augmented_batch

LR = "lr"
MLP = "mlp"

_PARAMS = ("W", "a", "V", "b", "U")
_BIASES = ("a", "b")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(eq=False)
class RecognitionModel:
    kind: str
    W: np.ndarray
    a: np.ndarray
    V: np.ndarray | None = None
    b: np.ndarray | None = None
    U: np.ndarray | None = None
    frozen_W: bool = False
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (LR, MLP):
            raise ValueError(f"unknown model kind {self.kind!r}")
        K, I = self.W.shape
        if self.a.shape != (K,):
            raise ValueError("bias a must have one entry per disease")
        if self.kind == MLP:
            H = self.V.shape[0]
            if self.V.shape != (H, I) or self.b.shape != (H,) or self.U.shape != (K, H):
                raise ValueError("inconsistent MLP weight shapes")

    @property
    def num_inputs(self) -> int:
        return self.W.shape[1]

    @property
    def num_outputs(self) -> int:
        return self.W.shape[0]

    @property
    def num_hidden(self) -> int:
        return 0 if self.kind == LR else self.V.shape[0]

    def params(self) -> dict:
        names = _PARAMS if self.kind == MLP else ("W", "a")
        return {n: getattr(self, n) for n in names}

    def copy(self) -> "RecognitionModel":
        arrays = {n: (None if v is None else v.copy()) for n, v in
                  ((n, getattr(self, n)) for n in _PARAMS)}
        return RecognitionModel(self.kind, frozen_W=self.frozen_W, config=dict(self.config), **arrays)

    def to_json(self) -> str:
        arrays = {}
        for name, value in self.params().items():
            arr = np.ascontiguousarray(value, dtype="<f8")
            arrays[name] = {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode("ascii")}
        doc = {
            "kind": self.kind,
            "I": self.num_inputs,
            "K": self.num_outputs,
            "H": self.num_hidden,
            "frozen_W": self.frozen_W,
            "config": self.config,
            "dtype": "<f8",
            "encoding": "base64",
            "arrays": arrays,
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RecognitionModel":
        doc = json.loads(text)
        if doc.get("dtype") != "<f8" or doc.get("encoding") != "base64":
            raise ValueError("unsupported weight encoding")
        arrays = {}
        for name, spec in doc["arrays"].items():
            raw = np.frombuffer(base64.b64decode(spec["data"]), dtype="<f8")
            arrays[name] = raw.reshape(spec["shape"]).astype(float)
        model = cls(doc["kind"], frozen_W=doc["frozen_W"], config=doc.get("config", {}), **arrays)
        if model.num_inputs != doc["I"] or model.num_outputs != doc["K"] or model.num_hidden != doc["H"]:
            raise ValueError("model header disagrees with weight shapes")
        return model


def init_lr(prior, num_inputs: int) -> RecognitionModel:
    """LR model that predicts the prior until trained: W = 0, a = prior log-odds."""
    prior = np.asarray(prior, dtype=float)
    a = np.log(prior) - np.log1p(-prior)
    return RecognitionModel(LR, np.zeros((len(prior), num_inputs)), a)


def init_mlp(base: RecognitionModel, hidden: int, rng: np.random.Generator,
             freeze_W: bool = True, scale: float = 0.01) -> RecognitionModel:
    """MLP sharing the input-output weights and output biases of an LR model."""
    K, I = base.W.shape
    return RecognitionModel(
        MLP,
        base.W.copy(),
        base.a.copy(),
        V=rng.uniform(-scale, scale, size=(hidden, I)),
        b=np.zeros(hidden),
        U=rng.uniform(-scale, scale, size=(K, hidden)),
        frozen_W=freeze_W,
    )


def encode_input(o) -> np.ndarray:
    """Binary input vector: 1 where the finding was observed positive, else 0."""
    values = o.values if isinstance(o, ObservationVector) else np.asarray(o)
    return (values == POS).astype(float)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward_full(model: RecognitionModel, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.num_inputs:
        raise ValueError(f"input has {X.shape[-1]} entries, model expects {model.num_inputs}")
    logits = model.a + X @ model.W.T
    Y = None
    if model.kind == MLP:
        Y = np.tanh(model.b + X @ model.V.T)
        logits = logits + Y @ model.U.T
    return _sigmoid(logits), Y


def forward(model: RecognitionModel, x) -> np.ndarray:
    """Output marginals z for one input vector or a batch of rows."""
    return _forward_full(model, x)[0]


def predict_case(model: RecognitionModel, o: ObservationVector) -> np.ndarray:
    return forward(model, encode_input(o))


def cross_entropy(model: RecognitionModel, X, D, eps: float = 1e-7) -> float:
    Z = np.clip(forward(model, X), eps, 1.0 - eps)
    D = np.asarray(D, dtype=float)
    return float(-np.sum(D * np.log(Z) + (1.0 - D) * np.log1p(-Z)))


def loss_and_grad(model: RecognitionModel, X, D, eps: float = 1e-7):
    """Summed cross-entropy over the batch and its gradient for every parameter.

    Outputs are clipped to [eps, 1 - eps]; a clipped output passes no gradient.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if len(X) == 0:
        raise ValueError("empty batch")
    Z, Y = _forward_full(model, X)
    Zc = np.clip(Z, eps, 1.0 - eps)
    E = float(-np.sum(D * np.log(Zc) + (1.0 - D) * np.log1p(-Zc)))

    G = (Z - D) * ((Z > eps) & (Z < 1.0 - eps))  # dE/dlogit
    grads = {
        "W": np.zeros_like(model.W) if model.frozen_W else G.T @ X,
        "a": G.sum(axis=0),
    }
    if model.kind == MLP:
        GH = (G @ model.U) * (1.0 - Y * Y)
        grads["U"] = G.T @ Y
        grads["V"] = GH.T @ X
        grads["b"] = GH.sum(axis=0)
    return E, grads


@dataclass
class TrainerConfig:
    momentum: float = 0.95
    lr0: float = 0.01
    lr_up: float = 1.1
    lr_down: float = 0.5
    adapt_every: int = 100
    batch_size: int = 100
    center_decay: float = 0.999
    loss_decay: float = 0.99
    eps_z: float = 1e-7
    samples: int = 100_000
    p_plus: float = 0.5
    p_minus: float = 1.0
    centering: bool = True
    seed: int = 0

    def check(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 < self.eps_z < 0.5:
            raise ValueError("eps_z must lie in (0, 0.5)")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.lr0 <= 0:
            raise ValueError("learning rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingResult:
    model: RecognitionModel
    loss_trace: list
    lr_trace: list


def augmented_batches(net: Bn2oNetwork, obsmodel: ObservationModel, samples: int,
                      batch_size: int, rng: np.random.Generator):
    """Stream of (x, d) minibatches drawn fresh from the augmented network."""
    done = 0
    while done < samples:
        n = min(batch_size, samples - done)
        D, codes = sample_augmented_batch(net, obsmodel, n, rng)
        yield (codes == POS).astype(float), D.astype(float)
        done += n


def train(model: RecognitionModel, batches, cfg: TrainerConfig) -> TrainingResult:
    """Minibatch descent with momentum, error centering and a bold-driver global rate.

    For every non-bias weight w the applied step is

        step_t = -lr_t * dE/dw + momentum * step_{t-1} - center_t

    where center_t is an exponential moving average of past steps. Bias
    weights skip the centering term. The rate grows by ``lr_up`` when the
    smoothed loss fell since the last check and shrinks by ``lr_down`` otherwise.
    The model is updated in place and also returned.
    """
    cfg.check()
    params = model.params()
    trainable = {n: p for n, p in params.items() if not (n == "W" and model.frozen_W)}
    steps = {n: np.zeros_like(p) for n, p in trainable.items()}
    centers = {n: np.zeros_like(p) for n, p in trainable.items() if n not in _BIASES}

    lr = cfg.lr0
    smoothed = None
    checkpoint = None
    loss_trace, lr_trace = [], []
    for t, (X, D) in enumerate(batches):
        E, grads = loss_and_grad(model, X, D, cfg.eps_z)
        if not math.isfinite(E):
            raise TrainingDiverged(f"non-finite loss at batch {t} (lr={lr:g})")
        per_sample = E / len(X)
        smoothed = per_sample if smoothed is None else cfg.loss_decay * smoothed + (1 - cfg.loss_decay) * per_sample

        for name, p in trainable.items():
            step = cfg.momentum * steps[name] - lr * grads[name]
            if cfg.centering and name in centers:
                step -= centers[name]
                centers[name] *= cfg.center_decay
                centers[name] += (1.0 - cfg.center_decay) * step
            p += step
            steps[name] = step
            if not np.all(np.isfinite(p)):
                raise TrainingDiverged(f"non-finite {name} weights at batch {t} (lr={lr:g})")

        if (t + 1) % cfg.adapt_every == 0:
            if checkpoint is not None:
                lr *= cfg.lr_up if smoothed < checkpoint else cfg.lr_down
            checkpoint = smoothed
        loss_trace.append(smoothed)
        lr_trace.append(lr)

    model.config = cfg.to_dict()
    return TrainingResult(model, loss_trace, lr_trace)


def train_on_network(net: Bn2oNetwork, cfg: TrainerConfig, kind: str = LR, hidden: int = 100,
                     init_from: RecognitionModel | None = None) -> TrainingResult:
    """Train a fresh LR model, or an MLP on top of ``init_from`` with its W frozen."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    if kind == LR:
        model = init_from.copy() if init_from is not None else init_lr(net.prior, net.num_findings)
    elif kind == MLP:
        base = init_from if init_from is not None else init_lr(net.prior, net.num_findings)
        model = init_mlp(base, hidden, rng, freeze_W=init_from is not None)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    obsmodel = ObservationModel(cfg.p_plus, cfg.p_minus)
    stream = augmented_batches(net, obsmodel, cfg.samples, cfg.batch_size, rng)
    return train(model, stream, cfg)
