from .estimator import LM_PRESETS, ByteLanguageModel, write_loss_trace_csv
from .model import (LMConfig, init_lm_params, lm_forward, lm_gradients, lm_loss,
                    lm_loss_and_gradients, lm_num_params, lm_param_shapes)
from .sampling import SamplerConfig, generate_payload, generate_payload_batch, sample_next_tokens
from .tokenizer import TOKEN_VOCAB_SIZE, TokenSequence, detokenize, tokenize, tokens_to_bytes

__all__ = [
    "LM_PRESETS", "ByteLanguageModel", "write_loss_trace_csv",
    "LMConfig", "init_lm_params", "lm_forward", "lm_gradients", "lm_loss",
    "lm_loss_and_gradients", "lm_num_params", "lm_param_shapes",
    "SamplerConfig", "generate_payload", "generate_payload_batch", "sample_next_tokens",
    "TOKEN_VOCAB_SIZE", "TokenSequence", "detokenize", "tokenize", "tokens_to_bytes",
]
