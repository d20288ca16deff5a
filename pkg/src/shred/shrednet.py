"""Recurrent decoder surrogate: LSTM over lagged sensor windows followed
by a shallow dense decoder that predicts latent SVD coefficients.

Everything is plain numpy: forward recursion, exact reverse-mode
gradients (backpropagation through time), Adam, and early stopping.
Training is deterministic for a fixed seed.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, Diverged, GridMismatch
from .rom import SvdBundle, relative_error
from .sense import MeasurementTrajectory

GATES = ("input", "forget", "cell", "output")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- parameter containers ----------------------------------------------------

@dataclass
class LstmLayerParams:
    """Per-gate weights: W (hidden x in), U (hidden x hidden), b (hidden)."""

    W: dict
    U: dict
    b: dict

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator):
        def uniform(shape, fan_in):
            bound = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        W = {g: uniform((hidden_size, input_size), input_size) for g in GATES}
        U = {g: uniform((hidden_size, hidden_size), hidden_size) for g in GATES}
        b = {g: np.zeros(hidden_size) for g in GATES}
        return cls(W=W, U=U, b=b)

    @property
    def hidden_size(self) -> int:
        return self.b["input"].size


@dataclass
class DecoderParams:
    """Dense layers, ReLU on hidden layers, identity on the output."""

    weights: list
    biases: list

    @classmethod
    def init(cls, widths: Sequence[int], rng: np.random.Generator):
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights=weights, biases=biases)


@dataclass
class Normalization:
    """Per-feature min-max scaling fitted on the training split only."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "Normalization":
        flat = data.reshape(-1, data.shape[-1])
        return cls(minimum=flat.min(axis=0), maximum=flat.max(axis=0))

    @property
    def scale(self) -> np.ndarray:
        span = self.maximum - self.minimum
        # a constant feature carries no information; leave it shifted only
        return np.where(span > 0, span, 1.0)

    def normalize(self, data: np.ndarray) -> np.ndarray:
        return (data - self.minimum) / self.scale

    def denormalize(self, data: np.ndarray) -> np.ndarray:
        return data * self.scale + self.minimum


@dataclass
class ShredModel:
    """LSTM stack + decoder + normalization + lag window length."""

    lstm: list
    decoder: DecoderParams
    lag: int
    input_width: int
    output_width: int
    in_norm: Optional[Normalization] = None
    out_norm: Optional[Normalization] = None
    seed: int = 0

    @classmethod
    def build(cls, input_width: int, output_width: int, lag: int = 50,
              hidden_size: int = 64, num_lstm_layers: int = 2,
              decoder_widths: Sequence[int] = (350, 400), seed: int = 0) -> "ShredModel":
        if lag < 1:
            raise ValueError("lag window length must be >= 1")
        rng = np.random.default_rng(seed)
        lstm = []
        in_size = input_width
        for _ in range(num_lstm_layers):
            lstm.append(LstmLayerParams.init(in_size, hidden_size, rng))
            in_size = hidden_size
        decoder = DecoderParams.init([hidden_size, *decoder_widths, output_width], rng)
        return cls(lstm=lstm, decoder=decoder, lag=lag,
                   input_width=input_width, output_width=output_width, seed=seed)

    def parameters(self) -> list:
        """(name, array) pairs in a fixed order; arrays are live views."""
        out = []
        for l, layer in enumerate(self.lstm):
            for g in GATES:
                out.append((f"lstm{l}.W.{g}", layer.W[g]))
                out.append((f"lstm{l}.U.{g}", layer.U[g]))
                out.append((f"lstm{l}.b.{g}", layer.b[g]))
        for i, (w, b) in enumerate(zip(self.decoder.weights, self.decoder.biases)):
            out.append((f"dec{i}.W", w))
            out.append((f"dec{i}.b", b))
        return out


# -- forward / backward ------------------------------------------------------

def _lstm_layer_forward(layer: LstmLayerParams, X: np.ndarray):
    """Run one layer over a batch of sequences X (B, L, in).

    Returns the hidden sequence (B, L, H) and the per-step cache needed
    for backpropagation through time.
    """
    B, L, _ = X.shape
    H = layer.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hidden_seq = np.empty((B, L, H))
    steps = []
    for t in range(L):
        x = X[:, t, :]
        i = _sigmoid(x @ layer.W["input"].T + h @ layer.U["input"].T + layer.b["input"])
        f = _sigmoid(x @ layer.W["forget"].T + h @ layer.U["forget"].T + layer.b["forget"])
        g = np.tanh(x @ layer.W["cell"].T + h @ layer.U["cell"].T + layer.b["cell"])
        o = _sigmoid(x @ layer.W["output"].T + h @ layer.U["output"].T + layer.b["output"])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append({"x": x, "h_prev": h, "c_prev": c, "i": i, "f": f,
                      "g": g, "o": o, "tanh_c": tanh_c})
        h, c = h_new, c_new
        hidden_seq[:, t, :] = h
    return hidden_seq, steps


def _lstm_layer_backward(layer: LstmLayerParams, steps: list, dH: np.ndarray, grads: dict,
                         prefix: str):
    """BPTT through one layer given dH (B, L, H), the loss gradient on
    every hidden output.  Returns dX (B, L, in)."""
    B, L, H = dH.shape
    in_size = steps[0]["x"].shape[1]
    dX = np.empty((B, L, in_size))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(L - 1, -1, -1):
        st = steps[t]
        dh = dH[:, t, :] + dh_next
        i, f, g, o, tanh_c = st["i"], st["f"], st["g"], st["o"], st["tanh_c"]
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c**2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * st["c_prev"]
        dz = {
            "input": di * i * (1.0 - i),
            "forget": df * f * (1.0 - f),
            "cell": dg * (1.0 - g**2),
            "output": do * o * (1.0 - o),
        }
        dx = np.zeros((B, in_size))
        dh_prev = np.zeros((B, H))
        for gate in GATES:
            z = dz[gate]
            grads[f"{prefix}.W.{gate}"] += z.T @ st["x"]
            grads[f"{prefix}.U.{gate}"] += z.T @ st["h_prev"]
            grads[f"{prefix}.b.{gate}"] += z.sum(axis=0)
            dx += z @ layer.W[gate]
            dh_prev += z @ layer.U[gate]
        dX[:, t, :] = dx
        dh_next = dh_prev
        dc_next = dc * f
    return dX


def _decoder_forward(decoder: DecoderParams, h: np.ndarray):
    acts = [h]
    z = h
    last = len(decoder.weights) - 1
    for i, (w, b) in enumerate(zip(decoder.weights, decoder.biases)):
        z = z @ w.T + b
        if i < last:
            z = np.maximum(z, 0.0)
        acts.append(z)
    return z, acts


def _decoder_backward(decoder: DecoderParams, acts: list, dout: np.ndarray, grads: dict):
    dz = dout
    last = len(decoder.weights) - 1
    for i in range(last, -1, -1):
        if i < last:
            dz = dz * (acts[i + 1] > 0)
        grads[f"dec{i}.W"] += dz.T @ acts[i]
        grads[f"dec{i}.b"] += dz.sum(axis=0)
        dz = dz @ decoder.weights[i]
    return dz


def forward(model: ShredModel, windows: np.ndarray) -> np.ndarray:
    """Latent predictions for normalized windows (B, L, F) or (L, F)."""
    out, _ = _forward_cached(model, _as_batch(windows))
    return out if np.asarray(windows).ndim == 3 else out[0]


def _as_batch(windows: np.ndarray) -> np.ndarray:
    w = np.asarray(windows, dtype=float)
    return w[None, :, :] if w.ndim == 2 else w


def _forward_cached(model: ShredModel, X: np.ndarray):
    seq = X
    caches = []
    for layer in model.lstm:
        seq, steps = _lstm_layer_forward(layer, seq)
        caches.append(steps)
    h_last = seq[:, -1, :]
    out, acts = _decoder_forward(model.decoder, h_last)
    return out, (caches, acts, X.shape)


def backward(model: ShredModel, windows: np.ndarray, targets: np.ndarray):
    """Loss and exact gradients of the batch-mean MSE.

    Returns (loss, grads) where grads maps parameter names (as in
    ``model.parameters()``) to arrays of matching shape.
    """
    X = _as_batch(windows)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    pred, (caches, acts, _) = _forward_cached(model, X)
    diff = pred - targets
    loss = float(np.mean(diff**2))
    grads = {name: np.zeros_like(arr) for name, arr in model.parameters()}
    dout = 2.0 * diff / diff.size
    dh_last = _decoder_backward(model.decoder, acts, dout, grads)

    B, L, _ = X.shape
    H = model.lstm[-1].hidden_size
    dH = np.zeros((B, L, H))
    dH[:, -1, :] = dh_last
    for l in range(len(model.lstm) - 1, -1, -1):
        dH = _lstm_layer_backward(model.lstm[l], caches[l], dH, grads, f"lstm{l}")
    return loss, grads


# -- datasets ----------------------------------------------------------------

@dataclass
class WindowDataset:
    """Lagged input windows paired with latent targets.

    inputs: (num_samples, lag, features) raw (unnormalized) values;
    targets: (num_samples, latent_dim); ``padded`` flags samples whose
    window was front-padded by repeating the first measurement.
    """

    inputs: np.ndarray
    targets: np.ndarray
    padded: np.ndarray

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx) -> "WindowDataset":
        idx = np.asarray(idx)
        return WindowDataset(self.inputs[idx], self.targets[idx], self.padded[idx])


def build_windows(traj: MeasurementTrajectory, latent: np.ndarray, lag: int,
                  params: Optional[Sequence[float]] = None) -> WindowDataset:
    """One sample per time index: the window of the last ``lag``
    measurements ending there, targeting the latent vector at its end.

    Windows ending before index lag-1 are front-padded by repeating the
    first measurement.  Known parameters are appended as constant extra
    feature channels.
    """
    latent = np.atleast_2d(np.asarray(latent, dtype=float))
    values = traj.values if hasattr(traj, "values") else np.atleast_2d(np.asarray(traj, dtype=float))
    nt = values.shape[1]
    if latent.shape[1] != nt:
        raise GridMismatch(
            f"latent has {latent.shape[1]} columns, trajectory has {nt}"
        )
    if lag < 1 or lag > nt:
        raise GridMismatch(f"lag {lag} outside 1..{nt}")
    meas = values.T  # (nt, sensors)
    if params is not None:
        extra = np.tile(np.asarray(params, dtype=float), (nt, 1))
        meas = np.hstack([meas, extra])
    series = np.vstack([meas[:1].repeat(lag - 1, axis=0), meas]) if lag > 1 else meas
    inputs = np.stack([series[j:j + lag] for j in range(nt)])
    flags = np.arange(nt) < (lag - 1)
    return WindowDataset(inputs=inputs, targets=latent.T.copy(), padded=flags)


# -- training ----------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 2000
    patience: int = 50
    validation_fraction: float = 0.125
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.max_epochs) <= 0:
            raise ValueError("learning rate, batch size and max epochs must be positive")
        if self.patience < 0 or self.patience >= self.max_epochs:
            raise ValueError("patience must lie in [0, max_epochs)")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation fraction must lie in (0, 1)")


@dataclass
class TrainHistory:
    train_loss: list
    valid_loss: list
    best_epoch: int


class _Adam:
    """Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: list, lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = {name: np.zeros_like(arr) for name, arr in params}
        self.v = {name: np.zeros_like(arr) for name, arr in params}
        self.t = 0

    def step(self, params: list, grads: dict) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, arr in params:
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            arr -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def _mse(model: ShredModel, X: np.ndarray, Y: np.ndarray) -> float:
    pred, _ = _forward_cached(model, X)
    return float(np.mean((pred - Y) ** 2))


def train(model: ShredModel, train_ds: WindowDataset, valid_ds: WindowDataset,
          config: TrainConfig):
    """Adam + early stopping on validation latent MSE.

    Normalization is fitted here on the training split only and stored
    in the model.  The weights of the best validation epoch are
    restored.  Returns (model, TrainHistory).
    """
    model.in_norm = Normalization.fit(train_ds.inputs)
    model.out_norm = Normalization.fit(train_ds.targets)

    Xtr = model.in_norm.normalize(train_ds.inputs)
    Ytr = model.out_norm.normalize(train_ds.targets)
    Xva = model.in_norm.normalize(valid_ds.inputs)
    Yva = model.out_norm.normalize(valid_ds.targets)

    params = model.parameters()
    opt = _Adam(params, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    n = len(train_ds)

    best_loss = np.inf
    best_epoch = -1
    best_state = None
    strikes = 0
    history = TrainHistory(train_loss=[], valid_loss=[], best_epoch=0)

    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = backward(model, Xtr[idx], Ytr[idx])
            if not np.isfinite(loss):
                raise Diverged(f"training loss became non-finite at epoch {epoch}")
            opt.step(params, grads)
            epoch_loss += loss * idx.size
        history.train_loss.append(epoch_loss / n)

        valid_loss = _mse(model, Xva, Yva)
        if not np.isfinite(valid_loss):
            raise Diverged(f"validation loss became non-finite at epoch {epoch}")
        history.valid_loss.append(valid_loss)

        if valid_loss < best_loss:
            best_loss = valid_loss
            best_epoch = epoch
            best_state = copy.deepcopy([arr for _, arr in params])
            strikes = 0
        else:
            strikes += 1
            if strikes > config.patience:
                break

    if best_state is not None:
        for (_, arr), saved in zip(params, best_state):
            arr[...] = saved
    history.best_epoch = best_epoch
    return model, history


def predict(model: ShredModel, windows: np.ndarray) -> np.ndarray:
    """Denormalized latent predictions for raw windows (B, L, F)."""
    if model.in_norm is None or model.out_norm is None:
        raise ValueError("model has no fitted normalization; train it first")
    X = model.in_norm.normalize(_as_batch(windows))
    out, _ = _forward_cached(model, X)
    return model.out_norm.denormalize(out)


# -- splits ------------------------------------------------------------------

def split_parametric(num_params: int, ratios=(0.75, 0.125, 0.125), seed=0):
    """Whole-trajectory split over parameter indices.

    Validation and test sizes are rounded to nearest; training takes the
    remainder.  Returns (train, valid, test) index arrays.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_valid = round(ratios[1] * num_params)
    n_test = round(ratios[2] * num_params)
    n_train = num_params - n_valid - n_test
    if min(n_train, n_valid, n_test) < 1:
        raise ValueError(f"{num_params} parameters cannot populate all three splits")
    perm = np.random.default_rng(seed).permutation(num_params)
    return (np.sort(perm[:n_train]),
            np.sort(perm[n_train:n_train + n_valid]),
            np.sort(perm[n_train + n_valid:]))


def split_temporal(num_steps: int, ratios=(0.75, 0.15, 0.10)):
    """Contiguous train/valid/test index ranges; test lies strictly in
    the future of train.  Sizes use the floor rule, test taking the
    remainder."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_train = math.floor(ratios[0] * num_steps)
    n_valid = math.floor(ratios[1] * num_steps)
    if min(n_train, n_valid, num_steps - n_train - n_valid) < 1:
        raise ValueError(f"{num_steps} steps cannot populate all three splits")
    return (range(0, n_train),
            range(n_train, n_train + n_valid),
            range(n_train + n_valid, num_steps))


# -- evaluation and ensembles ------------------------------------------------

@dataclass
class EvaluationMetrics:
    latent_relative_error: float
    full_field_relative_error: float
    sensor_series: dict


def evaluate(model: ShredModel, bundle: SvdBundle, windows: np.ndarray,
             truth, sensors=None) -> EvaluationMetrics:
    """Latent and full-field errors of the model on one trajectory.

    ``truth`` is the ground-truth SnapshotMatrix (or matrix) whose
    columns align with the windows; sensor series are reported at the
    given stationary sensor indices.
    """
    truth_vals = truth.values if hasattr(truth, "values") else np.asarray(truth)
    latent_true = bundle.U.T @ truth_vals
    latent_pred = predict(model, windows).T
    if latent_pred.shape != latent_true.shape:
        raise DimensionMismatch(
            f"predicted latent {latent_pred.shape} vs true {latent_true.shape}"
        )
    field_pred = bundle.U @ latent_pred
    series = {}
    if sensors is not None:
        for sensor in sensors:
            i = sensor.indices[0]
            series[sensor.id] = {
                "truth": truth_vals[i, :].copy(),
                "prediction": field_pred[i, :].copy(),
            }
    return EvaluationMetrics(
        latent_relative_error=relative_error(latent_pred, latent_true),
        full_field_relative_error=relative_error(field_pred, truth_vals),
        sensor_series=series,
    )


@dataclass
class EnsembleResult:
    models: list
    histories: list
    member_fields: list
    mean_field: np.ndarray
    std_field: np.ndarray


def ensemble_train(make_member: Callable, sensor_configs: Sequence, config: TrainConfig,
                   bundle: SvdBundle) -> EnsembleResult:
    """Train one model per sensor configuration and aggregate their
    full-field estimates.

    ``make_member(sensors, seed)`` must return (model, train_ds,
    valid_ds, eval_windows); member seeds are spawned from config.seed
    so members are independent and reproducible.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(len(sensor_configs))
    models, histories, fields = [], [], []
    for sensors, seq in zip(sensor_configs, seeds):
        member_seed = int(seq.generate_state(1)[0])
        model, train_ds, valid_ds, eval_windows = make_member(sensors, member_seed)
        member_config = TrainConfig(
            learning_rate=config.learning_rate, batch_size=config.batch_size,
            max_epochs=config.max_epochs, patience=config.patience,
            validation_fraction=config.validation_fraction, seed=member_seed,
        )
        model, history = train(model, train_ds, valid_ds, member_config)
        latent_pred = predict(model, eval_windows).T
        fields.append(bundle.U @ latent_pred)
        models.append(model)
        histories.append(history)
    stacked = np.stack(fields)
    return EnsembleResult(
        models=models,
        histories=histories,
        member_fields=fields,
        mean_field=stacked.mean(axis=0),
        std_field=stacked.std(axis=0),
    )
