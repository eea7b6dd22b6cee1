"""Python access to the mmdrive radar toolkit."""

from ._core import (
    FrameDecoder,
    Model,
    activities,
    compute_metrics,
    db_to_q9,
    encode_frame,
    parse_script,
    q9_to_db,
    roc_auc,
    simulate,
)

__all__ = [
    "FrameDecoder",
    "Model",
    "activities",
    "compute_metrics",
    "db_to_q9",
    "encode_frame",
    "parse_script",
    "q9_to_db",
    "roc_auc",
    "simulate",
]
