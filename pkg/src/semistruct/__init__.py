"""Semi-structured regression networks with orthogonal structured effects.

A semi-structured network adds latent features of arbitrary inputs to an
interpretable structured predictor (linear terms, penalized B-splines,
factors). This package provides:

- training with an optional per-batch orthogonalization constraint that
  keeps the network from absorbing structured signal (``mode="ono"``),
- an exact post-hoc orthogonalization that rewrites any fitted model so the
  unstructured part is orthogonal to the structured design without changing
  predictions, in full-data, mini-batch, and penalized (GAM-style) variants,
- out-of-sample decomposition of predictions into structured and
  unstructured contributions,
- explained-variance shares and likelihood-based term importance,
- simulation drivers reproducing the main empirical claims, and
- a CLI (``semistruct``) plus plain-text model serialization.
"""

from .basis import (
    StructuredDesign,
    TermSpec,
    bspline,
    bspline_basis,
    bspline_knots,
    build_design,
    difference_penalty,
    factor,
    intercept,
    linear,
)
from .errors import (
    DataError,
    DegenerateError,
    DimensionError,
    PreconditionError,
    SchemaError,
    SemistructError,
    SingularSystemError,
    SpecError,
)
from .network import (
    AdamState,
    MLPConfig,
    MLPParams,
    SSNModel,
    TrainConfig,
    TrainResult,
    init_mlp,
    init_ssn,
    loss_and_gradients,
    mlp_forward,
    predict,
    ssn_forward,
    train_ssn,
)
from .pho import (
    ImportanceReport,
    PHOResult,
    decompose_out_of_sample,
    ev_structured,
    gam_fit,
    gcv_score,
    importance_report,
    mcfadden_r2,
    pho_full,
    pho_minibatch,
    phogam_adjust,
    select_lambda_gcv,
)
from .serialize import (
    load_model,
    load_pho,
    read_csv_columns,
    save_model,
    save_pho,
    write_history_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "DataError",
    "DegenerateError",
    "DimensionError",
    "ImportanceReport",
    "MLPConfig",
    "MLPParams",
    "PHOResult",
    "PreconditionError",
    "SSNModel",
    "SchemaError",
    "SemistructError",
    "SingularSystemError",
    "SpecError",
    "StructuredDesign",
    "TermSpec",
    "TrainConfig",
    "TrainResult",
    "bspline",
    "bspline_basis",
    "bspline_knots",
    "build_design",
    "decompose_out_of_sample",
    "difference_penalty",
    "ev_structured",
    "factor",
    "gam_fit",
    "gcv_score",
    "importance_report",
    "init_mlp",
    "init_ssn",
    "intercept",
    "linear",
    "load_model",
    "load_pho",
    "loss_and_gradients",
    "mcfadden_r2",
    "mlp_forward",
    "pho_full",
    "pho_minibatch",
    "phogam_adjust",
    "predict",
    "read_csv_columns",
    "save_model",
    "save_pho",
    "select_lambda_gcv",
    "ssn_forward",
    "train_ssn",
    "write_history_csv",
]
