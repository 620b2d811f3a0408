"""Semi-structured network: structured linear part plus latent MLP features.

The model predicts eta = X beta + U gamma, where U are the latent features
produced by a small fully-connected network on the unstructured inputs Z.
Two training-time forward modes exist:

- "unconstrained": the latent contribution enters as-is;
- "ono": the latent contribution is projected out of the column space of the
  current batch's structured rows before it enters the sum, so the
  structured part alone carries anything expressible by X within the batch.

The projection is rebuilt per batch and treated as a constant in the
backward pass. Gradients are hand-written and verified against central
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import StructuredDesign
from .errors import DataError, DimensionError, SpecError
from .linalg import orthonormal_basis

MODES = ("unconstrained", "ono")


@dataclass(frozen=True)
class MLPConfig:
    """Architecture of the latent-feature network.

    layer_sizes runs input width -> hidden widths -> latent width q. Hidden
    layers use the configured activation followed by (inverted) dropout in
    training mode. The final layer producing the latent features is linear
    unless activate_latent is set, in which case it is treated like the
    hidden layers. use_bias is per layer; default all True.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    dropout_rate: float = 0.0
    use_bias: tuple[bool, ...] | None = None
    activate_latent: bool = False

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise SpecError("layer_sizes needs at least input and latent width")
        if any(s < 1 for s in self.layer_sizes):
            raise SpecError(f"layer widths must be >= 1, got {self.layer_sizes}")
        if self.activation not in ("relu", "tanh"):
            raise SpecError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise SpecError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            )
        if self.use_bias is not None and len(self.use_bias) != self.n_layers:
            raise SpecError(
                f"use_bias needs {self.n_layers} entries, got "
                f"{len(self.use_bias)}"
            )

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def latent_dim(self) -> int:
        return self.layer_sizes[-1]

    def bias_flags(self) -> tuple[bool, ...]:
        if self.use_bias is None:
            return (True,) * self.n_layers
        return tuple(self.use_bias)

    def layer_is_activated(self, i: int) -> bool:
        return i < self.n_layers - 1 or self.activate_latent


@dataclass
class MLPParams:
    """Weight matrices (fan_in, fan_out) and bias vectors per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MLPParams":
        return MLPParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_mlp(config: MLPConfig, rng: np.random.Generator) -> MLPParams:
    """Uniform Glorot initialization: W ~ U(+-sqrt(6/(fan_in+fan_out))).

    Biases start at zero. Disabled biases stay zero arrays and are never
    updated.
    """
    weights, biases = [], []
    for d_in, d_out in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MLPParams(weights=weights, biases=biases)


def _activate(a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(a, 0.0)
    return np.tanh(a)


def _activate_grad(a: np.ndarray, z: np.ndarray, activation: str) -> np.ndarray:
    # a: pre-activation, z: activation output (pre-dropout).
    if activation == "relu":
        return (a > 0.0).astype(float)
    return 1.0 - z * z


def _mlp_forward_cached(
    params: MLPParams,
    config: MLPConfig,
    Z: np.ndarray,
    train_mode: bool,
    rng: np.random.Generator | None,
):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise DimensionError(f"Z must be 2-D, got ndim={Z.ndim}")
    if Z.shape[1] != config.layer_sizes[0]:
        raise DimensionError(
            f"Z has {Z.shape[1]} columns, network expects "
            f"{config.layer_sizes[0]}"
        )
    use_dropout = train_mode and config.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise SpecError("training-mode forward with dropout requires an rng")
    bias_flags = config.bias_flags()
    h = Z
    inputs, preacts, actouts, masks = [], [], [], []
    for i in range(config.n_layers):
        inputs.append(h)
        a = h @ params.weights[i]
        if bias_flags[i]:
            a = a + params.biases[i]
        preacts.append(a)
        if config.layer_is_activated(i):
            z = _activate(a, config.activation)
            actouts.append(z)
            if use_dropout:
                keep = 1.0 - config.dropout_rate
                mask = (rng.random(z.shape) < keep) / keep
                z = z * mask
                masks.append(mask)
            else:
                masks.append(None)
            h = z
        else:
            actouts.append(None)
            masks.append(None)
            h = a
    cache = (inputs, preacts, actouts, masks)
    return h, cache


def mlp_forward(
    params: MLPParams,
    config: MLPConfig,
    Z: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Latent features U for inputs Z: (n, q).

    Dropout is applied only in training mode; evaluation is deterministic
    and per-observation independent.
    """
    U, _ = _mlp_forward_cached(params, config, Z, train_mode, rng)
    return U


def _mlp_backward(
    params: MLPParams,
    config: MLPConfig,
    cache,
    dU: np.ndarray,
):
    inputs, preacts, actouts, masks = cache
    bias_flags = config.bias_flags()
    dW = [None] * config.n_layers
    db = [None] * config.n_layers
    g = dU
    for i in range(config.n_layers - 1, -1, -1):
        if config.layer_is_activated(i):
            if masks[i] is not None:
                g = g * masks[i]
            g = g * _activate_grad(preacts[i], actouts[i], config.activation)
        dW[i] = inputs[i].T @ g
        db[i] = g.sum(axis=0) if bias_flags[i] else np.zeros_like(params.biases[i])
        g = g @ params.weights[i].T
    return dW, db


# ---- Model ----


@dataclass
class SSNModel:
    """Structured design + latent network + both coefficient vectors.

    mode selects the training-time forward ("unconstrained" or "ono").
    rng_seed is the seed the parameters were initialized from. z_columns
    optionally records which data columns feed the network (used by the
    file formats and the command-line tools).
    """

    design: StructuredDesign
    beta: np.ndarray
    mlp: MLPParams
    mlp_config: MLPConfig
    gamma: np.ndarray
    mode: str = "unconstrained"
    rng_seed: int = 0
    z_columns: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}")

    def copy_params(self):
        return (self.beta.copy(), self.mlp.copy(), self.gamma.copy())

    def restore_params(self, snapshot):
        beta, mlp, gamma = snapshot
        self.beta[...] = beta
        for w, ws in zip(self.mlp.weights, mlp.weights):
            w[...] = ws
        for b, bs in zip(self.mlp.biases, mlp.biases):
            b[...] = bs
        self.gamma[...] = gamma


def init_ssn(
    design: StructuredDesign,
    mlp_config: MLPConfig,
    mode: str = "unconstrained",
    seed: int = 0,
    z_columns: tuple[str, ...] = (),
) -> SSNModel:
    """Fresh model: Glorot network weights, zero beta and gamma."""
    rng = np.random.default_rng(seed)
    mlp = init_mlp(mlp_config, rng)
    return SSNModel(
        design=design,
        beta=np.zeros(design.n_columns),
        mlp=mlp,
        mlp_config=mlp_config,
        gamma=np.zeros(mlp_config.latent_dim),
        mode=mode,
        rng_seed=seed,
        z_columns=tuple(z_columns),
    )


def _check_batch(model: SSNModel, X: np.ndarray, Z: np.ndarray):
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.ndim != 2 or Z.ndim != 2:
        raise DimensionError("X and Z must be 2-D")
    if X.shape[0] != Z.shape[0]:
        raise DimensionError(
            f"X has {X.shape[0]} rows, Z has {Z.shape[0]}"
        )
    if X.shape[1] != model.beta.shape[0]:
        raise DimensionError(
            f"X has {X.shape[1]} columns, beta has {model.beta.shape[0]}"
        )
    return X, Z


def ssn_forward(
    model: SSNModel,
    X: np.ndarray,
    Z: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Batch predictions under the model's training-time semantics.

    Unconstrained: eta = X beta + U gamma. Orthogonalizing mode: the latent
    contribution is replaced by its component orthogonal to the batch's
    structured columns; when the batch has at most as many rows as the
    structured rank, that component is exactly zero.
    """
    X, Z = _check_batch(model, X, Z)
    U = mlp_forward(model.mlp, model.mlp_config, Z, train_mode, rng)
    unstr = U @ model.gamma
    if model.mode == "ono":
        Q = orthonormal_basis(X)
        if Q.shape[1] == X.shape[0]:
            unstr = np.zeros(X.shape[0])
        else:
            unstr = unstr - Q @ (Q.T @ unstr)
    return X @ model.beta + unstr


def trainable_params(model: SSNModel) -> list[np.ndarray]:
    """Ordered list of arrays updated by the optimizer.

    Order: beta, weight matrices, enabled bias vectors, gamma. Disabled
    biases are excluded and stay zero.
    """
    params = [model.beta]
    params.extend(model.mlp.weights)
    for flag, b in zip(model.mlp_config.bias_flags(), model.mlp.biases):
        if flag:
            params.append(b)
    params.append(model.gamma)
    return params


def loss_and_gradients(
    model: SSNModel,
    X: np.ndarray,
    Z: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None = None,
    train_mode: bool = True,
):
    """Batch loss ||y - eta||^2 / (2 b) and gradients for trainable_params.

    In the orthogonalizing mode the batch projection is a constant of the
    backward pass: gradients flow through it into gamma and the network.
    """
    X, Z = _check_batch(model, X, Z)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"y must have shape ({X.shape[0]},), got {y.shape}")
    b = X.shape[0]
    U, cache = _mlp_forward_cached(
        model.mlp, model.mlp_config, Z, train_mode, rng
    )
    if model.mode == "ono":
        Q = orthonormal_basis(X)
        if Q.shape[1] == b:
            U_eff = np.zeros_like(U)
        else:
            U_eff = U - Q @ (Q.T @ U)
    else:
        U_eff = U
    eta = X @ model.beta + U_eff @ model.gamma
    resid = eta - y
    loss = float(resid @ resid) / (2.0 * b)
    d_eta = resid / b
    d_beta = X.T @ d_eta
    d_gamma = U_eff.T @ d_eta
    d_U = np.outer(d_eta, model.gamma)
    if model.mode == "ono":
        if Q.shape[1] == b:
            d_U = np.zeros_like(d_U)
        else:
            d_U = d_U - Q @ (Q.T @ d_U)
    dW, db = _mlp_backward(model.mlp, model.mlp_config, cache, d_U)
    grads = [d_beta]
    grads.extend(dW)
    for flag, g in zip(model.mlp_config.bias_flags(), db):
        if flag:
            grads.append(g)
    grads.append(d_gamma)
    return loss, grads


# ---- Adam ----


@dataclass
class AdamState:
    """First/second moment accumulators with bias correction."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: list[np.ndarray], lr: float = 1e-3) -> AdamState:
    return AdamState(
        lr=lr,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> None:
    """One in-place update of every parameter array."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise DimensionError("params/grads do not match optimizer state")
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---- Training ----


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings.

    The validation split takes the last validation_fraction of the
    seed-shuffled rows. Early stopping triggers after patience epochs
    without validation improvement and restores the best-validation
    parameters; with validation_fraction = 0 the loop always runs to
    max_epochs and keeps the final parameters.
    """

    batch_size: int = 32
    max_epochs: int = 1000
    learning_rate: float = 1e-3
    validation_fraction: float = 0.1
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise SpecError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise SpecError(
                "validation_fraction must be in [0, 1), got "
                f"{self.validation_fraction}"
            )
        if self.patience < 1:
            raise SpecError(f"patience must be >= 1, got {self.patience}")


@dataclass
class TrainResult:
    model: SSNModel
    history: list[tuple[int, float, float]]  # (epoch, train_loss, val_loss)
    epochs_run: int
    best_epoch: int
    best_val_loss: float


def _eval_loss(model: SSNModel, X, Z, y) -> float:
    eta = ssn_forward(model, X, Z, train_mode=False)
    r = eta - y
    return float(r @ r) / (2.0 * len(y))


def train_ssn(
    model: SSNModel,
    X: np.ndarray,
    Z: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
) -> TrainResult:
    """Minibatch Adam training with early stopping; mutates model in place.

    Each epoch reshuffles the training rows with the continuing seeded
    generator; the final short batch is kept. The same generator drives the
    dropout masks, so identical seeds give bit-identical trajectories.
    """
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise DataError("training data has no rows")
    if Z.shape[0] != n or y.shape[0] != n:
        raise DimensionError("X, Z, y must have the same number of rows")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_val = int(round(n * config.validation_fraction))
    n_train = n - n_val
    if n_train < 2:
        raise DataError(
            f"{n_train} training rows left after validation split; need >= 2"
        )
    train_idx = perm[:n_train]
    val_idx = perm[n_train:]
    X_tr, Z_tr, y_tr = X[train_idx], Z[train_idx], y[train_idx]
    X_val, Z_val, y_val = X[val_idx], Z[val_idx], y[val_idx]

    params = trainable_params(model)
    opt = adam_init(params, lr=config.learning_rate)
    history: list[tuple[int, float, float]] = []
    best_val = np.inf
    best_epoch = -1
    best_snapshot = None
    since_best = 0
    epochs_run = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(n_train)
        batch_losses = []
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_gradients(
                model, X_tr[idx], Z_tr[idx], y_tr[idx], rng=rng
            )
            adam_step(opt, params, grads)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses))
        epochs_run = epoch + 1
        if n_val > 0:
            val_loss = _eval_loss(model, X_val, Z_val, y_val)
            history.append((epoch, train_loss, val_loss))
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_snapshot = model.copy_params()
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    break
        else:
            history.append((epoch, train_loss, float("nan")))
    if best_snapshot is not None:
        model.restore_params(best_snapshot)
    return TrainResult(
        model=model,
        history=history,
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
    )


def predict(
    model: SSNModel,
    X: np.ndarray,
    Z: np.ndarray,
    projection_active: bool = True,
    batch_size: int | None = None,
) -> np.ndarray:
    """Predictions on new data, optionally with banded projection.

    For orthogonalizing-mode models with projection_active, rows are
    processed in bands of batch_size (whole set if None) and the latent
    contribution is projected out of each band's structured columns, so a
    row's prediction depends on its band companions. With projection_active
    False (or for unconstrained models, which ignore the flag) predictions
    are the plain sum X beta + U gamma, independent per row.
    """
    X, Z = _check_batch(model, X, Z)
    use_projection = projection_active and model.mode == "ono"
    if not use_projection:
        U = mlp_forward(model.mlp, model.mlp_config, Z)
        return X @ model.beta + U @ model.gamma
    n = X.shape[0]
    if batch_size is None:
        batch_size = n
    if batch_size < 1:
        raise SpecError(f"batch_size must be >= 1, got {batch_size}")
    out = np.empty(n)
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        out[sl] = ssn_forward(model, X[sl], Z[sl], train_mode=False)
    return out
