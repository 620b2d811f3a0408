"""Synthetic-data generators and simulation-study drivers.

Every driver returns long-format report rows (scenario, method, replicate,
config fingerprint, metric, value) and is deterministic given its seed:
per-cell seeds are derived from (seed, cell indices) through a seed
sequence, so cells are independent of execution order and thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import basis
from .basis import StructuredDesign, bspline_basis_from_knots, build_design
from .errors import DataError, SpecError
from .linalg import project_onto
from .network import (
    MLPConfig,
    SSNModel,
    TrainConfig,
    init_ssn,
    mlp_forward,
    predict,
    train_ssn,
)
from .pho import (
    decompose_out_of_sample,
    gam_fit,
    pho_full,
    phogam_adjust,
)

# ---- Synthetic truth functions ----


def f0(x):
    return np.cos(5.0 * x)


def f1(x):
    return np.tanh(3.0 * x)


def f2(x):
    return -np.power(x, 3)


def f3(x):
    return -3.0 * x * np.cos(3.0 * x - 2.0)


def f4(x):
    return np.exp(0.5 * x) - 1.0


def f5(x):
    return np.square(x)


def f6(x):
    return np.sin(x) * np.cos(x)


def f7(x):
    return np.sqrt(np.abs(x))


def f8(x):
    # Standard normal density minus 1/8.
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi) - 0.125


def f9(x):
    return -x * np.tanh(3.0 * x) * np.sin(4.0 * x)


TRUTH_FUNCTIONS: tuple[Callable[[np.ndarray], np.ndarray], ...] = (
    f0, f1, f2, f3, f4, f5, f6, f7, f8, f9,
)


def true_beta(p: int) -> np.ndarray:
    """p coefficients equispaced on [-2.5, 2.5], endpoints included."""
    if p < 1:
        raise SpecError(f"p must be >= 1, got {p}")
    return np.linspace(-2.5, 2.5, p)


def derive_seed(*parts: int) -> int:
    """Well-mixed child seed from integer coordinates."""
    return int(np.random.SeedSequence(tuple(int(x) for x in parts)).generate_state(1)[0])


# ---- Generators ----


@dataclass(frozen=True)
class SimConfig:
    """Shared knobs of the synthetic generators."""

    n: int
    p: int
    q: int
    overlap: bool = True
    noise_sd: float = 1.0
    seed: int = 0
    scenario: str = "linear"

    def __post_init__(self):
        if self.n < 1:
            raise SpecError(f"n must be >= 1, got {self.n}")
        if self.p < 1:
            raise SpecError(f"p must be >= 1, got {self.p}")
        if self.q < 1:
            raise SpecError(f"q must be >= 1, got {self.q}")
        if self.noise_sd < 0:
            raise SpecError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.overlap and self.q < self.p:
            raise SpecError(
                f"overlap requires q >= p, got q={self.q} < p={self.p}"
            )


@dataclass
class SimData:
    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray | None = None
    functions: tuple[Callable, ...] = ()


def _unstructured_inputs(
    cfg: SimConfig, X: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    if cfg.overlap:
        if cfg.q == cfg.p:
            return X.copy()
        extra = rng.standard_normal((cfg.n, cfg.q - cfg.p))
        return np.hstack([X, extra])
    return rng.standard_normal((cfg.n, cfg.q))


def gen_linear_data(cfg: SimConfig) -> SimData:
    """Pure linear truth: y = X beta* + noise.

    X is standard normal (n, p); beta* = true_beta(p). With overlap, Z
    contains the columns of X padded to width q with independent standard
    normal columns; without, Z is independent noise of width q.
    """
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, cfg.p))
    Z = _unstructured_inputs(cfg, X, rng)
    beta_star = true_beta(cfg.p)
    y = X @ beta_star + cfg.noise_sd * rng.standard_normal(cfg.n)
    return SimData(X=X, Z=Z, y=y, beta_star=beta_star)


def gen_nonlinear_data(cfg: SimConfig) -> SimData:
    """Additive nonlinear truth: y = sum_j f_j(x_j) + noise, first p of
    the ten fixed functions."""
    if cfg.p > len(TRUTH_FUNCTIONS):
        raise SpecError(
            f"p must be <= {len(TRUTH_FUNCTIONS)}, got {cfg.p}"
        )
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, cfg.p))
    Z = _unstructured_inputs(cfg, X, rng)
    funcs = TRUTH_FUNCTIONS[: cfg.p]
    y = sum(f(X[:, j]) for j, f in enumerate(funcs))
    y = y + cfg.noise_sd * rng.standard_normal(cfg.n)
    return SimData(X=X, Z=Z, y=y, beta_star=None, functions=funcs)


def gen_error_rate_data(cfg: SimConfig) -> SimData:
    """Null structured part next to a nonlinear unstructured signal.

    X is (n, 10) standard normal with zero true coefficients; Z is (n, 20)
    independent standard normal; y = sin(Z_1) + Z_2^2 + noise (columns
    indexed from 1).
    """
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, 10))
    Z = rng.standard_normal((cfg.n, 20))
    y = np.sin(Z[:, 0]) + np.square(Z[:, 1])
    y = y + cfg.noise_sd * rng.standard_normal(cfg.n)
    return SimData(X=X, Z=Z, y=y, beta_star=np.zeros(10))


# ---- Report rows ----


@dataclass
class ExperimentReport:
    """One method's metrics for one replicate of one scenario cell."""

    scenario: str
    method: str
    replicate: int
    config: str
    metrics: dict[str, float]

    def __post_init__(self):
        for key, value in self.metrics.items():
            if not np.isfinite(value):
                raise DataError(
                    f"metric {key!r} is non-finite in {self.scenario}/"
                    f"{self.method} replicate {self.replicate}"
                )


def fingerprint(**kwargs) -> str:
    """Stable config fingerprint: 'key=value' pairs sorted by key."""
    return ";".join(f"{k}={kwargs[k]}" for k in sorted(kwargs))


def write_reports_csv(reports: Sequence[ExperimentReport], path: str) -> None:
    """Long-format CSV: one row per (report, metric)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario", "method", "replicate", "config", "metric", "value"]
        )
        for rep in reports:
            for metric in sorted(rep.metrics):
                writer.writerow(
                    [
                        rep.scenario,
                        rep.method,
                        rep.replicate,
                        rep.config,
                        metric,
                        f"{rep.metrics[metric]:.17g}",
                    ]
                )


def _map_cells(cells: Sequence[Callable[[], list]], threads: int) -> list:
    """Run cell closures, optionally on a thread pool, preserving order."""
    if threads <= 1:
        nested = [cell() for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(lambda cell: cell(), cells))
    return [row for rows in nested for row in rows]


# ---- Shared model construction ----


def _linear_terms(p: int, with_intercept: bool = True) -> list[basis.TermSpec]:
    head = [basis.intercept()] if with_intercept else []
    return head + [basis.linear(f"x{j}") for j in range(p)]


def _spline_terms(p: int, num_basis: int) -> list[basis.TermSpec]:
    return [basis.intercept()] + [
        basis.bspline(f"x{j}", num_basis=num_basis) for j in range(p)
    ]


def _column_table(X: np.ndarray) -> dict[str, np.ndarray]:
    return {f"x{j}": X[:, j] for j in range(X.shape[1])}


def _simulation_mlp(q_in: int, hidden: tuple[int, ...], dropout: float) -> MLPConfig:
    # Feature stack used by the simulation studies: ReLU hidden layers with
    # dropout; the last hidden layer's activations are the latent features.
    return MLPConfig(
        layer_sizes=(q_in, *hidden),
        activation="relu",
        dropout_rate=dropout,
        activate_latent=True,
    )


def _train(
    design: StructuredDesign,
    Z: np.ndarray,
    y: np.ndarray,
    mlp_cfg: MLPConfig,
    mode: str,
    init_seed: int,
    train_cfg: TrainConfig,
) -> tuple[SSNModel, int]:
    model = init_ssn(design, mlp_cfg, mode=mode, seed=init_seed)
    result = train_ssn(model, design.X, Z, y, train_cfg)
    return model, result.epochs_run


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(np.asarray(a) - np.asarray(b)))))


# ---- Linear recovery ----


@dataclass(frozen=True)
class LinearRecoveryConfig:
    n_values: tuple[int, ...] = (100, 1000)
    p_values: tuple[int, ...] = (1, 3, 10)
    q: int = 20
    overlap: bool = True
    noise_sd: float = 1.0
    replicates: int = 5
    seed: int = 0
    hidden: tuple[int, ...] = (100, 50)
    dropout: float = 0.2
    batch_size: int = 32
    max_epochs: int = 1000
    patience: int = 50
    learning_rate: float = 1e-3
    threads: int = 1


def run_linear_recovery(cfg: LinearRecoveryConfig) -> list[ExperimentReport]:
    """Recovery of the true linear coefficients across (n, p) cells.

    Per replicate: an unconstrained model (reported as-is and after the
    post-hoc correction) and a separately trained orthogonalizing model.
    The headline metric is rmse_beta against the generating coefficients.
    """

    def make_cell(n: int, p: int, r: int) -> Callable[[], list]:
        def cell() -> list[ExperimentReport]:
            sim_cfg = SimConfig(
                n=n,
                p=p,
                q=cfg.q,
                overlap=cfg.overlap,
                noise_sd=cfg.noise_sd,
                seed=derive_seed(cfg.seed, n, p, r, 0),
                scenario="linear",
            )
            data = gen_linear_data(sim_cfg)
            design = build_design(_column_table(data.X), _linear_terms(p))
            mlp_cfg = _simulation_mlp(cfg.q, cfg.hidden, cfg.dropout)
            fp = fingerprint(
                n=n, p=p, q=cfg.q, overlap=cfg.overlap,
                noise_sd=cfg.noise_sd, seed=cfg.seed,
                hidden=":".join(map(str, cfg.hidden)), dropout=cfg.dropout,
                batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
                patience=cfg.patience, learning_rate=cfg.learning_rate,
            )
            beta_slice = slice(1, 1 + p)  # linear block after the intercept
            rows = []

            train_cfg = TrainConfig(
                batch_size=cfg.batch_size,
                max_epochs=cfg.max_epochs,
                learning_rate=cfg.learning_rate,
                patience=cfg.patience,
                seed=derive_seed(cfg.seed, n, p, r, 1),
            )
            unc, unc_epochs = _train(
                design, data.Z, data.y, mlp_cfg, "unconstrained",
                derive_seed(cfg.seed, n, p, r, 2), train_cfg,
            )
            rows.append(ExperimentReport(
                "linear", "Unconstrained", r, fp,
                {
                    "rmse_beta": rmse(unc.beta[beta_slice], data.beta_star),
                    "epochs": float(unc_epochs),
                },
            ))
            corrected = pho_full(unc, design.X, data.Z)
            rows.append(ExperimentReport(
                "linear", "PHO", r, fp,
                {
                    "rmse_beta": rmse(
                        corrected.beta_tilde[beta_slice], data.beta_star
                    ),
                },
            ))
            ono_cfg = TrainConfig(
                batch_size=cfg.batch_size,
                max_epochs=cfg.max_epochs,
                learning_rate=cfg.learning_rate,
                patience=cfg.patience,
                seed=derive_seed(cfg.seed, n, p, r, 3),
            )
            ono, ono_epochs = _train(
                design, data.Z, data.y, mlp_cfg, "ono",
                derive_seed(cfg.seed, n, p, r, 4), ono_cfg,
            )
            rows.append(ExperimentReport(
                "linear", "ONO", r, fp,
                {
                    "rmse_beta": rmse(ono.beta[beta_slice], data.beta_star),
                    "epochs": float(ono_epochs),
                },
            ))
            return rows

        return cell

    cells = [
        make_cell(n, p, r)
        for n in cfg.n_values
        for p in cfg.p_values
        for r in range(cfg.replicates)
    ]
    return _map_cells(cells, cfg.threads)


# ---- Nonlinear recovery ----


@dataclass(frozen=True)
class NonlinearRecoveryConfig:
    n: int = 1000
    p: int = 10
    noise_sd: float = 1.0
    replicates: int = 1
    seed: int = 0
    num_basis: int = basis.DEFAULT_NUM_BASIS
    lam: float | str = "auto"
    grid_points: int = 200
    hidden: tuple[int, ...] = (100, 50)
    dropout: float = 0.2
    batch_size: int = 32
    max_epochs: int = 1000
    patience: int = 50
    learning_rate: float = 1e-3
    threads: int = 1


def _function_rmses(
    design: StructuredDesign,
    coefs: np.ndarray,
    data: SimData,
    grid_points: int,
) -> dict[str, float]:
    """Grid RMSE of each mean-centered fitted function vs the truth."""
    out: dict[str, float] = {}
    for j, f in enumerate(data.functions):
        name = f"s(x{j})"
        col = data.X[:, j]
        grid = np.linspace(col.min(), col.max(), grid_points)
        B = bspline_basis_from_knots(
            grid,
            design.knots[name],
            design.terms[j + 1].num_basis,
            design.terms[j + 1].degree,
        )
        fitted = B @ coefs[design.column_map[name]]
        fitted = fitted - fitted.mean()
        truth = f(grid)
        truth = truth - truth.mean()
        out[f"rmse_f{j}"] = rmse(fitted, truth)
    return out


def run_nonlinear_recovery(
    cfg: NonlinearRecoveryConfig,
) -> list[ExperimentReport]:
    """Recovery of additive nonlinear functions with spline designs.

    Methods: the unconstrained model's raw spline coefficients, the
    orthogonalizing-training model, the post-hoc corrections (unpenalized
    and penalized), and a penalized least-squares fit of y on the design
    alone as the oracle reference. The unstructured inputs equal the
    structured source columns, so the network competes for the same signal.
    """

    def make_cell(r: int) -> Callable[[], list]:
        def cell() -> list[ExperimentReport]:
            sim_cfg = SimConfig(
                n=cfg.n,
                p=cfg.p,
                q=cfg.p,
                overlap=True,
                noise_sd=cfg.noise_sd,
                seed=derive_seed(cfg.seed, cfg.n, cfg.p, r, 10),
                scenario="nonlinear",
            )
            data = gen_nonlinear_data(sim_cfg)
            design = build_design(
                _column_table(data.X), _spline_terms(cfg.p, cfg.num_basis)
            )
            mlp_cfg = _simulation_mlp(cfg.p, cfg.hidden, cfg.dropout)
            fp = fingerprint(
                n=cfg.n, p=cfg.p, noise_sd=cfg.noise_sd, seed=cfg.seed,
                num_basis=cfg.num_basis, lam=cfg.lam,
                hidden=":".join(map(str, cfg.hidden)), dropout=cfg.dropout,
                batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
                patience=cfg.patience, learning_rate=cfg.learning_rate,
            )
            rows = []

            oracle_coefs, oracle_lam = gam_fit(design, data.y, lam="auto")
            metrics = _function_rmses(design, oracle_coefs, data, cfg.grid_points)
            metrics["lambda_used"] = oracle_lam
            rows.append(ExperimentReport("nonlinear", "GAMOracle", r, fp, metrics))

            train_cfg = TrainConfig(
                batch_size=cfg.batch_size,
                max_epochs=cfg.max_epochs,
                learning_rate=cfg.learning_rate,
                patience=cfg.patience,
                seed=derive_seed(cfg.seed, cfg.n, cfg.p, r, 11),
            )
            unc, _ = _train(
                design, data.Z, data.y, mlp_cfg, "unconstrained",
                derive_seed(cfg.seed, cfg.n, cfg.p, r, 12), train_cfg,
            )
            rows.append(ExperimentReport(
                "nonlinear", "Unconstrained", r, fp,
                _function_rmses(design, unc.beta, data, cfg.grid_points),
            ))

            corrected = pho_full(unc, design.X, data.Z)
            rows.append(ExperimentReport(
                "nonlinear", "PHO", r, fp,
                _function_rmses(
                    design, corrected.beta_tilde, data, cfg.grid_points
                ),
            ))

            penalized = phogam_adjust(unc, design, data.Z, lam=cfg.lam)
            metrics = _function_rmses(
                design, penalized.beta_tilde, data, cfg.grid_points
            )
            metrics["lambda_used"] = float(penalized.lambda_used)
            rows.append(ExperimentReport("nonlinear", "PHOGAM", r, fp, metrics))

            ono_cfg = TrainConfig(
                batch_size=cfg.batch_size,
                max_epochs=cfg.max_epochs,
                learning_rate=cfg.learning_rate,
                patience=cfg.patience,
                seed=derive_seed(cfg.seed, cfg.n, cfg.p, r, 13),
            )
            ono, _ = _train(
                design, data.Z, data.y, mlp_cfg, "ono",
                derive_seed(cfg.seed, cfg.n, cfg.p, r, 14), ono_cfg,
            )
            rows.append(ExperimentReport(
                "nonlinear", "ONO", r, fp,
                _function_rmses(design, ono.beta, data, cfg.grid_points),
            ))
            return rows

        return cell

    cells = [make_cell(r) for r in range(cfg.replicates)]
    return _map_cells(cells, cfg.threads)


# ---- Prediction error vs batch size ----


@dataclass(frozen=True)
class PredictionErrorConfig:
    n: int = 100000
    batch_sizes: tuple[int, ...] = (1, 10, 100, 1000, 10000)
    noise_sd: float = 1.0
    replicates: int = 1
    seed: int = 0
    train_batch_size: int = 512
    max_epochs: int = 500
    patience: int = 50
    learning_rate: float = 1e-3
    validation_fraction: float = 0.2
    threads: int = 1

    def __post_init__(self):
        if self.n > 100000:
            raise SpecError(
                f"n is capped at 100000 for this study, got {self.n}"
            )


def run_prediction_error(cfg: PredictionErrorConfig) -> list[ExperimentReport]:
    """Banded-projection prediction error as a function of batch size.

    Trains an orthogonalizing-mode model on the null-structured generator,
    then scores fresh test data with the projection active at each batch
    size and once with it inactive. The per-entry variance of the projected
    latent term is recorded per batch size; its log-log slope against batch
    size is fitted over the sizes exceeding the structured column count
    (below that the projection is the identity and the variance saturates,
    the regime covered by the zero-contribution facts instead of the decay
    law).
    """

    def make_cell(r: int) -> Callable[[], list]:
        def cell() -> list[ExperimentReport]:
            sim_cfg = SimConfig(
                n=cfg.n, p=10, q=20, overlap=False,
                noise_sd=cfg.noise_sd,
                seed=derive_seed(cfg.seed, cfg.n, r, 20),
                scenario="error_rate",
            )
            data = gen_error_rate_data(sim_cfg)
            test_cfg = SimConfig(
                n=cfg.n, p=10, q=20, overlap=False,
                noise_sd=cfg.noise_sd,
                seed=derive_seed(cfg.seed, cfg.n, r, 21),
                scenario="error_rate",
            )
            test = gen_error_rate_data(test_cfg)
            # No intercept: the rate law models projections onto random
            # covariate rows, and a constant column would hide the latent
            # part's mean from the training loss (it is removed per batch),
            # letting it drift and corrupt the projection-inactive score.
            design = build_design(
                _column_table(data.X), _linear_terms(10, with_intercept=False)
            )
            # Latent features: one 10-unit bias-free layer with activation.
            mlp_cfg = MLPConfig(
                layer_sizes=(20, 10),
                activation="relu",
                dropout_rate=0.0,
                use_bias=(False,),
                activate_latent=True,
            )
            train_cfg = TrainConfig(
                batch_size=cfg.train_batch_size,
                max_epochs=cfg.max_epochs,
                learning_rate=cfg.learning_rate,
                validation_fraction=cfg.validation_fraction,
                patience=cfg.patience,
                seed=derive_seed(cfg.seed, cfg.n, r, 22),
            )
            model, epochs = _train(
                design, data.Z, data.y, mlp_cfg, "ono",
                derive_seed(cfg.seed, cfg.n, r, 23), train_cfg,
            )
            X_test, _ = design.transform(_column_table(test.X))
            zeta = mlp_forward(model.mlp, model.mlp_config, test.Z) @ model.gamma
            eta_inactive = predict(
                model, X_test, test.Z, projection_active=False
            )
            fp = fingerprint(
                n=cfg.n, noise_sd=cfg.noise_sd, seed=cfg.seed,
                batch_sizes=":".join(map(str, cfg.batch_sizes)),
                train_batch_size=cfg.train_batch_size,
                max_epochs=cfg.max_epochs, patience=cfg.patience,
                learning_rate=cfg.learning_rate,
                validation_fraction=cfg.validation_fraction,
            )
            metrics: dict[str, float] = {
                "rmse_inactive": rmse(eta_inactive, test.y),
                "epochs": float(epochs),
            }
            p_cols = X_test.shape[1]
            var_by_b: dict[int, float] = {}
            for b in cfg.batch_sizes:
                eta_active = predict(
                    model, X_test, test.Z, projection_active=True, batch_size=b
                )
                metrics[f"rmse_active_b{b}"] = rmse(eta_active, test.y)
                extras = np.empty(cfg.n)
                for start in range(0, cfg.n, b):
                    sl = slice(start, min(start + b, cfg.n))
                    extras[sl] = project_onto(X_test[sl], zeta[sl])
                var_by_b[b] = float(np.var(extras))
                metrics[f"var_extra_b{b}"] = var_by_b[b]
            fit_bs = [b for b in cfg.batch_sizes if b > p_cols]
            if len(fit_bs) >= 2:
                logs_b = np.log(np.array(fit_bs, dtype=float))
                logs_v = np.log(np.array([var_by_b[b] for b in fit_bs]))
                slope = float(np.polyfit(logs_b, logs_v, 1)[0])
                metrics["slope_loglog"] = slope
            return [ExperimentReport("error_rate", "ONO", r, fp, metrics)]

        return cell

    cells = [make_cell(r) for r in range(cfg.replicates)]
    return _map_cells(cells, cfg.threads)


# ---- Convergence comparison ----


@dataclass(frozen=True)
class ConvergenceConfig:
    n: int = 1000
    p: int = 1
    q: int = 20
    overlap: bool = False
    noise_sd: float = 1.0
    replicates: int = 5
    seed: int = 0
    hidden: tuple[int, ...] = (100, 50)
    dropout: float = 0.2
    batch_size: int = 32
    max_epochs: int = 1000
    patience: int = 50
    learning_rate: float = 1e-3
    threads: int = 1


def run_convergence(cfg: ConvergenceConfig) -> list[ExperimentReport]:
    """Epochs to early stop: orthogonalizing vs unconstrained training.

    Both models share the data, the initialization seed, and the training
    seed, so the epoch counts differ only through the training-time
    projection.
    """

    def make_cell(r: int) -> Callable[[], list]:
        def cell() -> list[ExperimentReport]:
            sim_cfg = SimConfig(
                n=cfg.n, p=cfg.p, q=cfg.q, overlap=cfg.overlap,
                noise_sd=cfg.noise_sd,
                seed=derive_seed(cfg.seed, cfg.n, cfg.p, r, 30),
                scenario="linear",
            )
            data = gen_linear_data(sim_cfg)
            design = build_design(_column_table(data.X), _linear_terms(cfg.p))
            mlp_cfg = _simulation_mlp(cfg.q, cfg.hidden, cfg.dropout)
            init_seed = derive_seed(cfg.seed, cfg.n, cfg.p, r, 31)
            train_cfg = TrainConfig(
                batch_size=cfg.batch_size,
                max_epochs=cfg.max_epochs,
                learning_rate=cfg.learning_rate,
                patience=cfg.patience,
                seed=derive_seed(cfg.seed, cfg.n, cfg.p, r, 32),
            )
            fp = fingerprint(
                n=cfg.n, p=cfg.p, q=cfg.q, overlap=cfg.overlap,
                noise_sd=cfg.noise_sd, seed=cfg.seed,
                hidden=":".join(map(str, cfg.hidden)), dropout=cfg.dropout,
                batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
                patience=cfg.patience, learning_rate=cfg.learning_rate,
            )
            _, epochs_unc = _train(
                design, data.Z, data.y, mlp_cfg, "unconstrained",
                init_seed, train_cfg,
            )
            _, epochs_ono = _train(
                design, data.Z, data.y, mlp_cfg, "ono", init_seed, train_cfg
            )
            return [
                ExperimentReport(
                    "convergence", "Unconstrained", r, fp,
                    {"epochs": float(epochs_unc)},
                ),
                ExperimentReport(
                    "convergence", "ONO", r, fp,
                    {"epochs": float(epochs_ono)},
                ),
                ExperimentReport(
                    "convergence", "Difference", r, fp,
                    {"epoch_diff": float(epochs_ono - epochs_unc)},
                ),
            ]

        return cell

    cells = [make_cell(r) for r in range(cfg.replicates)]
    return _map_cells(cells, cfg.threads)


# ---- Benchmark on tabular data ----


@dataclass(frozen=True)
class BenchmarkConfig:
    splits: int = 10
    test_fraction: float = 0.1
    seed: int = 0
    methods: tuple[str, ...] = (
        "GAM", "DNNOnly", "Unconstrained", "ONO", "PHO", "PHOGAM",
    )
    lam: float | str = "auto"
    hidden: tuple[int, ...] = (100, 50)
    dropout: float = 0.1
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 50
    learning_rate: float = 1e-3
    threads: int = 1

    def __post_init__(self):
        if self.splits < 1:
            raise SpecError(f"splits must be >= 1, got {self.splits}")
        if not 0.0 < self.test_fraction < 1.0:
            raise SpecError(
                f"test_fraction must be in (0, 1), got {self.test_fraction}"
            )
        known = {"GAM", "DNNOnly", "Unconstrained", "ONO", "PHO", "PHOGAM"}
        unknown = sorted(set(self.methods) - known)
        if unknown:
            raise SpecError(f"unknown benchmark method(s): {unknown}")


def _subset(data: Mapping[str, Sequence], idx: np.ndarray) -> dict:
    return {k: np.asarray(v)[idx] for k, v in data.items()}


def run_benchmark(
    data: Mapping[str, Sequence],
    target: str,
    terms: Sequence[basis.TermSpec],
    z_columns: Sequence[str],
    cfg: BenchmarkConfig,
) -> list[ExperimentReport]:
    """Repeated train/test evaluation on one tabular data set.

    Per split: shuffle rows with a split-specific seed, hold out the last
    test_fraction, fit every requested method on the rest, record test MSE.
    Summary rows (replicate = -1) carry the across-split mean and sample
    standard deviation per method. The orthogonalizing model is scored with
    the projection active over the whole test set as one batch; post-hoc
    corrected models are scored through the out-of-sample decomposition
    (whose parts sum to the parent model's prediction).
    """
    if target not in data:
        raise DataError(f"target column {target!r} not present in data")
    y_all = np.asarray(data[target], dtype=float)
    n = y_all.shape[0]
    n_test = max(1, int(round(n * cfg.test_fraction)))
    if n - n_test < 2:
        raise DataError(f"too few training rows ({n - n_test}) per split")
    feature_data = {k: v for k, v in data.items() if k != target}
    for col in z_columns:
        if col not in feature_data:
            raise DataError(f"unstructured column {col!r} not present in data")

    def make_cell(s: int) -> Callable[[], list]:
        def cell() -> list[ExperimentReport]:
            rng = np.random.default_rng(derive_seed(cfg.seed, s, 40))
            perm = rng.permutation(n)
            train_idx, test_idx = perm[:-n_test], perm[-n_test:]
            tr = _subset(feature_data, train_idx)
            te = _subset(feature_data, test_idx)
            y_tr, y_te = y_all[train_idx], y_all[test_idx]
            design = build_design(tr, terms)
            X_te, _ = design.transform(te)
            Z_tr = np.column_stack([np.asarray(tr[c], dtype=float) for c in z_columns])
            Z_te = np.column_stack([np.asarray(te[c], dtype=float) for c in z_columns])
            fp = fingerprint(
                splits=cfg.splits, test_fraction=cfg.test_fraction,
                seed=cfg.seed, lam=cfg.lam,
                hidden=":".join(map(str, cfg.hidden)), dropout=cfg.dropout,
                batch_size=cfg.batch_size, max_epochs=cfg.max_epochs,
                patience=cfg.patience, learning_rate=cfg.learning_rate,
            )
            mlp_cfg = _simulation_mlp(len(z_columns), cfg.hidden, cfg.dropout)
            rows = []

            def report(method: str, mse: float):
                rows.append(ExperimentReport(
                    "benchmark", method, s, fp, {"mse_test": mse}
                ))

            trained: dict[str, SSNModel] = {}

            def get_model(mode: str) -> SSNModel:
                if mode not in trained:
                    train_cfg = TrainConfig(
                        batch_size=cfg.batch_size,
                        max_epochs=cfg.max_epochs,
                        learning_rate=cfg.learning_rate,
                        patience=cfg.patience,
                        seed=derive_seed(cfg.seed, s, 41),
                    )
                    model, _ = _train(
                        design, Z_tr, y_tr, mlp_cfg, mode,
                        derive_seed(cfg.seed, s, 42), train_cfg,
                    )
                    trained[mode] = model
                return trained[mode]

            for method in cfg.methods:
                if method == "GAM":
                    coefs, _ = gam_fit(design, y_tr, lam=cfg.lam)
                    report(method, float(np.mean((X_te @ coefs - y_te) ** 2)))
                elif method == "DNNOnly":
                    only_design = build_design(tr, [basis.intercept()])
                    train_cfg = TrainConfig(
                        batch_size=cfg.batch_size,
                        max_epochs=cfg.max_epochs,
                        learning_rate=cfg.learning_rate,
                        patience=cfg.patience,
                        seed=derive_seed(cfg.seed, s, 43),
                    )
                    model, _ = _train(
                        only_design, Z_tr, y_tr, mlp_cfg, "unconstrained",
                        derive_seed(cfg.seed, s, 44), train_cfg,
                    )
                    X_only = np.ones((n_test, 1))
                    eta = predict(model, X_only, Z_te)
                    report(method, float(np.mean((eta - y_te) ** 2)))
                elif method == "Unconstrained":
                    model = get_model("unconstrained")
                    eta = predict(model, X_te, Z_te)
                    report(method, float(np.mean((eta - y_te) ** 2)))
                elif method == "ONO":
                    model = get_model("ono")
                    eta = predict(model, X_te, Z_te, projection_active=True)
                    report(method, float(np.mean((eta - y_te) ** 2)))
                elif method == "PHO":
                    model = get_model("unconstrained")
                    corrected = pho_full(model, design.X, Z_tr)
                    e_str, e_unstr = decompose_out_of_sample(
                        model, corrected, X_te, Z_te
                    )
                    report(
                        method,
                        float(np.mean((e_str + e_unstr - y_te) ** 2)),
                    )
                elif method == "PHOGAM":
                    model = get_model("unconstrained")
                    penalized = phogam_adjust(model, design, Z_tr, lam=cfg.lam)
                    e_str, e_unstr = decompose_out_of_sample(
                        model, penalized, X_te, Z_te
                    )
                    report(
                        method,
                        float(np.mean((e_str + e_unstr - y_te) ** 2)),
                    )
            return rows

        return cell

    cells = [make_cell(s) for s in range(cfg.splits)]
    reports = _map_cells(cells, cfg.threads)
    # Across-split summaries, one row per method, replicate = -1.
    by_method: dict[str, list[float]] = {}
    fp_by_method: dict[str, str] = {}
    for rep in reports:
        by_method.setdefault(rep.method, []).append(rep.metrics["mse_test"])
        fp_by_method[rep.method] = rep.config
    summaries = []
    for method in cfg.methods:
        values = np.array(by_method.get(method, []))
        if values.size == 0:
            continue
        std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        summaries.append(ExperimentReport(
            "benchmark", method, -1, fp_by_method[method],
            {"mse_mean": float(np.mean(values)), "mse_std": std},
        ))
    return reports + summaries
