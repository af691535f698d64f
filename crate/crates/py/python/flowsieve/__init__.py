from ._flowsieve import (
    SCHEMA_VERSION,
    Dataset,
    FlowsieveError,
    Model,
    Scaler,
    SelectionTrace,
    fit_scaler,
    information_gain,
    kendall_tau_b,
    kfold_cv,
    metrics,
    metrics_from_counts,
    pearson,
    run_pipeline,
    select,
    spearman,
    stratified_split,
    synth,
    train,
)

__all__ = [
    "SCHEMA_VERSION",
    "Dataset",
    "FlowsieveError",
    "Model",
    "Scaler",
    "SelectionTrace",
    "fit_scaler",
    "information_gain",
    "kendall_tau_b",
    "kfold_cv",
    "metrics",
    "metrics_from_counts",
    "pearson",
    "run_pipeline",
    "select",
    "spearman",
    "stratified_split",
    "synth",
    "train",
]
