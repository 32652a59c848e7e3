from src.services.vtwin.model import (
    EmbeddingState,
    attention_score,
    embed,
    init_weights,
    message_pass,
    predict_delay,
)
from src.services.vtwin.serialization import from_bytes, to_bytes

__all__ = [
    "EmbeddingState",
    "attention_score",
    "embed",
    "from_bytes",
    "init_weights",
    "message_pass",
    "predict_delay",
    "to_bytes",
]
