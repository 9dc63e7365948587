"""Python access to the camel retrieval library."""

from ._camel import (
    ConfigError,
    fast_update,
    gaussian_blur,
    gaussian_kernel,
    load_checkpoint,
    mean_ap,
    mixup_images,
    recall_at_k,
    retrieval_metrics,
    run,
    sample_lambda,
    selfcheck,
    slow_update,
)

__all__ = [
    "ConfigError",
    "fast_update",
    "gaussian_blur",
    "gaussian_kernel",
    "load_checkpoint",
    "mean_ap",
    "mixup_images",
    "recall_at_k",
    "retrieval_metrics",
    "run",
    "sample_lambda",
    "selfcheck",
    "slow_update",
]
