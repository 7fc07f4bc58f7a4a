"""Masked ego-exo representation learning on pre-extracted token embeddings."""

from ._byov import (
    Checkpoint,
    DatasetError,
    FormatError,
    IoError,
    NumericError,
    TaskError,
    ValidationError,
    default_config_json,
    default_param_counts,
    generate_synthetic,
    kendall_tau,
    load_manifest,
    macro_f1,
    mean_pool,
    merge_selected,
    r2_scores,
    read_embeddings,
    retrieval_map,
    run_cli,
    sample_frames,
    token_change_scores,
    write_embeddings,
)

__all__ = [
    "Checkpoint",
    "DatasetError",
    "FormatError",
    "IoError",
    "NumericError",
    "TaskError",
    "ValidationError",
    "default_config_json",
    "default_param_counts",
    "generate_synthetic",
    "kendall_tau",
    "load_manifest",
    "macro_f1",
    "mean_pool",
    "merge_selected",
    "r2_scores",
    "read_embeddings",
    "retrieval_map",
    "run_cli",
    "sample_frames",
    "token_change_scores",
    "write_embeddings",
]
