"""One-hidden-layer sigmoid MLP trained with scaled conjugate gradient.

The objective is regularised MSE::

    perf = (1 - reg_ratio) * mean((y - t)**2) + reg_ratio * mean(theta**2)

where ``theta`` holds every weight and bias. Training is full batch. Inputs
are z-scored with statistics frozen into the model at training time.

Reference: M. F. Moller, "A scaled conjugate gradient algorithm for fast
supervised learning", Neural Networks 6 (1993) 525-533.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyBatch,
    IoFailure,
    MalformedModelFile,
    NonFiniteObjective,
    VersionMismatch,
)
from .phonemes import VOWELS, VowelLabel

FORMAT_VERSION = 1


def sigmoid(t):
    # split by sign so exp never overflows
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class MlpModel:
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray
    w2: np.ndarray  # (outputs, hidden)
    b2: np.ndarray
    norm_mean: np.ndarray
    norm_std: np.ndarray
    labels: list = field(default_factory=lambda: list(VOWELS))
    config: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.w2.shape[0]

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def params(self) -> np.ndarray:
        """All weights and biases as one flat vector (w1, b1, w2, b2 order)."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_params(self, theta: np.ndarray) -> "MlpModel":
        w1, b1, w2, b2 = _unpack(theta, self.n_inputs, self.n_hidden, self.n_outputs)
        return MlpModel(w1, b1, w2, b2, self.norm_mean.copy(), self.norm_std.copy(),
                        list(self.labels), dict(self.config), self.format_version)


def _unpack(theta, n_in, n_hid, n_out):
    i = 0
    parts = []
    for shape in ((n_hid, n_in), (n_hid,), (n_out, n_hid), (n_out,)):
        size = int(np.prod(shape))
        parts.append(np.array(theta[i:i + size], dtype=float).reshape(shape))
        i += size
    return parts


def init_model(n_inputs: int, n_hidden: int = 50, n_outputs: int = 6, seed: int = 0,
               labels=None) -> MlpModel:
    """Glorot-uniform weights, zero biases, identity normalisation."""
    if min(n_inputs, n_hidden, n_outputs) < 1:
        raise ValueError("layer sizes must be at least 1")
    labels = list(VOWELS[:n_outputs]) if labels is None else list(labels)
    if len(labels) != n_outputs:
        raise ValueError(f"{len(labels)} labels for {n_outputs} outputs")
    rng = np.random.default_rng(seed)
    r1 = math.sqrt(6.0 / (n_inputs + n_hidden))
    r2 = math.sqrt(6.0 / (n_hidden + n_outputs))
    w1 = rng.uniform(-r1, r1, (n_hidden, n_inputs))
    w2 = rng.uniform(-r2, r2, (n_outputs, n_hidden))
    return MlpModel(w1, np.zeros(n_hidden), w2, np.zeros(n_outputs),
                    np.zeros(n_inputs), np.ones(n_inputs), labels,
                    {"n_inputs": n_inputs, "n_hidden": n_hidden, "n_outputs": n_outputs,
                     "init_seed": seed, "msw_includes_biases": True})


def normalisation_stats(X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


def _as_batch(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=float)
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.n_inputs:
        raise DimensionMismatch(f"model expects {model.n_inputs} features, got {x2.shape[1]}")
    return x2


def forward(model: MlpModel, x):
    """Hidden and output activations for raw (un-normalised) features.

    ``x`` may be one vector or a batch of rows; the result has matching rank.
    """
    single = np.ndim(getattr(x, "values", x)) == 1
    z = (_as_batch(model, x) - model.norm_mean) / model.norm_std
    h = sigmoid(z @ model.w1.T + model.b1)
    y = sigmoid(h @ model.w2.T + model.b2)
    return (h[0], y[0]) if single else (h, y)


def _check_batch(model, X, T):
    X = _as_batch(model, X)
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if X.shape[0] == 0:
        raise EmptyBatch("batch has no examples")
    if T.shape != (X.shape[0], model.n_outputs):
        raise DimensionMismatch(f"targets shape {T.shape} does not match ({X.shape[0]}, {model.n_outputs})")
    return X, T


def _objective(theta, Z, T, shape, reg_ratio, need_grad=True):
    """Performance and gradient at flat parameters ``theta`` on normalised inputs ``Z``."""
    n_in, n_hid, n_out = shape
    w1, b1, w2, b2 = _unpack(theta, n_in, n_hid, n_out)
    h = sigmoid(Z @ w1.T + b1)
    y = sigmoid(h @ w2.T + b2)
    err = y - T
    mse = float(np.mean(err * err))
    msw = float(np.mean(theta * theta))
    perf = (1.0 - reg_ratio) * mse + reg_ratio * msw
    if not need_grad:
        return perf, None
    d2 = (2.0 / err.size) * err * y * (1.0 - y)
    d1 = (d2 @ w2) * h * (1.0 - h)
    g_mse = np.concatenate([(d1.T @ Z).ravel(), d1.sum(axis=0), (d2.T @ h).ravel(), d2.sum(axis=0)])
    grad = (1.0 - reg_ratio) * g_mse + reg_ratio * (2.0 / theta.size) * theta
    return perf, grad


def _shape(model):
    return model.n_inputs, model.n_hidden, model.n_outputs


def performance(model: MlpModel, X, T, reg_ratio: float = 0.5) -> float:
    X, T = _check_batch(model, X, T)
    Z = (X - model.norm_mean) / model.norm_std
    return _objective(model.params(), Z, T, _shape(model), reg_ratio, need_grad=False)[0]


def gradient(model: MlpModel, X, T, reg_ratio: float = 0.5) -> np.ndarray:
    """Backpropagated gradient of :func:`performance` w.r.t. ``model.params()``."""
    X, T = _check_batch(model, X, T)
    Z = (X - model.norm_mean) / model.norm_std
    return _objective(model.params(), Z, T, _shape(model), reg_ratio)[1]


@dataclass
class TrainOptions:
    max_epochs: int = 1000
    gradient_tolerance: float = 1e-6
    performance_goal: float = 1e-6
    reg_ratio: float = 0.5
    seed: int = 0
    sigma0: float = 5e-5
    lambda_init: float = 5e-7

    def __post_init__(self):
        if not 0.0 <= self.reg_ratio <= 1.0:
            raise ValueError(f"reg_ratio must lie in [0, 1], got {self.reg_ratio}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if min(self.gradient_tolerance, self.performance_goal, self.sigma0, self.lambda_init) <= 0:
            raise ValueError("tolerances and SCG constants must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    performance: list  # after each iteration; entry 0 is the initial value
    accepted: list  # per iteration, whether the step was taken
    stop_reason: str  # "MaxEpochs" | "GradientTolerance" | "PerformanceGoal"
    iterations: int
    mse: float = float("nan")

    @property
    def initial_performance(self) -> float:
        return self.performance[0]

    @property
    def final_performance(self) -> float:
        return self.performance[-1]

    def to_dict(self) -> dict:
        return {
            "initial_performance": self.initial_performance,
            "final_performance": self.final_performance,
            "final_mse": self.mse,
            "iterations": self.iterations,
            "accepted_steps": int(sum(self.accepted)),
            "stop_reason": self.stop_reason,
        }


def train_scg(model: MlpModel, X, T, opts: TrainOptions = TrainOptions(), normalise: bool = True):
    """Fit ``model`` to (X, T) with Moller's scaled conjugate gradient.

    Returns a new model and a :class:`TrainReport`. Curvature along the
    search direction comes from a finite difference of gradients with step
    ``sigma0 / |p|``; the Levenberg-Marquardt term ``lambda`` is halved when
    the quadratic model fits well (comparison > 0.75), quadrupled when it
    fits badly (< 0.25), and steps with negative comparison are rejected.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    model = model.with_params(model.params())
    if normalise:
        model.norm_mean, model.norm_std = normalisation_stats(X)
    X, T = _check_batch(model, X, T)
    Z = (X - model.norm_mean) / model.norm_std
    shape = _shape(model)
    gamma = opts.reg_ratio

    def objective(theta):
        f, g = _objective(theta, Z, T, shape, gamma)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise NonFiniteObjective("objective or gradient became non-finite; check feature scaling")
        return f, g

    w = model.params()
    n_params = w.size
    f, g = objective(w)
    r = -g
    p = r.copy()
    lam, lam_bar = opts.lambda_init, 0.0
    success = True
    delta = 0.0
    history, accepted = [f], []
    stop = "MaxEpochs"

    for k in range(1, opts.max_epochs + 1):
        if f < opts.performance_goal:
            stop = "PerformanceGoal"
            break
        if np.linalg.norm(g) < opts.gradient_tolerance:
            stop = "GradientTolerance"
            break

        p2 = float(p @ p)
        if success:
            sigma = opts.sigma0 / math.sqrt(p2)
            _, g_sigma = objective(w + sigma * p)
            delta = float(p @ (g_sigma - g)) / sigma

        delta += (lam - lam_bar) * p2
        if delta <= 0:
            # force a positive-definite local model
            lam_bar = 2.0 * (lam - delta / p2)
            delta = -delta + lam * p2
            lam = lam_bar

        mu = float(p @ r)
        alpha = mu / delta
        w_new = w + alpha * p
        f_new, g_new = objective(w_new)
        comparison = 2.0 * delta * (f - f_new) / (mu * mu)

        if comparison >= 0:
            r_old = r
            w, f, g = w_new, f_new, g_new
            r = -g
            lam_bar = 0.0
            success = True
            if k % n_params == 0:
                p = r.copy()
            else:
                beta = (float(r @ r) - float(r @ r_old)) / mu
                p = r + beta * p
            if float(p @ r) <= 0:
                p = r.copy()
            if comparison > 0.75:
                lam *= 0.5
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam = min(lam * 4.0, 1e100)
        history.append(f)
        accepted.append(comparison >= 0)

    mse = _objective(w, Z, T, shape, 0.0, need_grad=False)[0]
    trained = model.with_params(w)
    trained.config.update({"train_options": opts.to_dict()})
    return trained, TrainReport(history, accepted, stop, len(accepted), mse)


def argmax_label(scores, labels):
    scores = np.asarray(scores)
    i = int(np.argmax(scores))  # first maximum, so ties go to the lower index
    return labels[i]


def predict(model: MlpModel, x):
    _, y = forward(model, x)
    if y.ndim != 1:
        raise DimensionMismatch("predict takes a single feature vector")
    return argmax_label(y, model.labels), y


def model_to_json(model: MlpModel) -> str:
    doc = {
        "format_version": model.format_version,
        "config": model.config,
        "labels": [v.value if isinstance(v, VowelLabel) else v for v in model.labels],
        "norm_mean": model.norm_mean.tolist(),
        "norm_std": model.norm_std.tolist(),
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
    }
    # json writes floats with repr(), which round-trips float64 exactly
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def save_model(model: MlpModel, path) -> None:
    try:
        Path(path).write_text(model_to_json(model), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write model {path}: {exc}") from exc


def model_from_json(text: str) -> MlpModel:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise MalformedModelFile(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise MalformedModelFile("model file lacks format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(f"model format {doc['format_version']!r}, this build reads {FORMAT_VERSION}")
    try:
        arrays = {k: np.array(doc[k], dtype=float) for k in ("w1", "b1", "w2", "b2", "norm_mean", "norm_std")}
        labels = [VowelLabel.parse(s) for s in doc["labels"]]
        config = dict(doc["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModelFile(f"bad model file: {exc}") from None
    w1, w2 = arrays["w1"], arrays["w2"]
    n_hid, n_out = w1.shape[0] if w1.ndim == 2 else -1, w2.shape[0] if w2.ndim == 2 else -1
    ok = (w1.ndim == 2 and w2.ndim == 2 and w2.shape[1] == n_hid
          and arrays["b1"].shape == (n_hid,) and arrays["b2"].shape == (n_out,)
          and arrays["norm_mean"].shape == arrays["norm_std"].shape == (w1.shape[1],)
          and len(labels) == n_out and np.all(arrays["norm_std"] > 0))
    if not ok:
        raise MalformedModelFile("model arrays have inconsistent shapes")
    return MlpModel(w1, arrays["b1"], w2, arrays["b2"], arrays["norm_mean"], arrays["norm_std"],
                    labels, config, FORMAT_VERSION)


def load_model(path) -> MlpModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read model {path}: {exc}") from exc
    return model_from_json(text)
