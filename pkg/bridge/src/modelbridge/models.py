"""Model backends behind the bridge.

A backend exposes the shared id space (begin-of-text 0, unknown 1, real
tokens from 2) and produces the final-position pre-softmax logits for a
context of shared ids. Two backends exist: a deterministic uniform stub for
protocol and interop testing, and a transformers runtime for real models.
"""
from __future__ import annotations

from .vocab import BOT_TOKEN, NUM_SPECIALS, UNK_TOKEN, fingerprint, read_vocab_file, shared_tokens


class ModelError(Exception):
    pass


class StubModel:
    """Uniform zero logits over a fixed vocabulary.

    ``stub:N`` synthesizes an N-token vocabulary; ``stub:PATH`` loads the
    token list from a vocabulary file.
    """

    def __init__(self, spec: str):
        if spec.isdigit():
            size = int(spec)
            if size < NUM_SPECIALS + 1:
                raise ModelError(f"stub vocab size {size} too small")
            file_tokens = [f"tok{i}" for i in range(NUM_SPECIALS, size)]
        else:
            file_tokens = read_vocab_file(spec)
        self.tokens = shared_tokens(file_tokens)
        self.name = f"stub-{len(self.tokens)}"

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def fingerprint_hex(self) -> str:
        return fingerprint(self.tokens).hex()

    def file_tokens(self) -> list[str]:
        return self.tokens[NUM_SPECIALS:]

    def logits(self, context: list[int]) -> list[float]:
        return [0.0] * self.vocab_size


class TransformersModel:
    """A causal LM loaded through transformers, remapped to the shared space.

    The model's BOS token becomes shared id 0 and its UNK token shared id 1;
    every other model token keeps its relative order from shared id 2 on.
    Inference runs in eval mode with gradients disabled; fp16 weights are
    allowed but logits are upcast to fp32 before leaving the process.
    """

    def __init__(self, model_id: str, fp16: bool = False):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise ModelError(
                "transformers backend needs torch and transformers installed"
            ) from exc
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        dtype = torch.float16 if fp16 else torch.float32
        self.model = AutoModelForCausalLM.from_pretrained(model_id, dtype=dtype)
        self.model.eval()
        self.name = model_id

        vm = len(self.tokenizer)
        bot_model_id = self.tokenizer.bos_token_id
        if bot_model_id is None:
            bot_model_id = self.tokenizer.eos_token_id
        unk_model_id = self.tokenizer.unk_token_id
        if unk_model_id is None or unk_model_id == bot_model_id:
            unk_model_id = next(
                i for i in range(vm) if i != bot_model_id
            )
        if bot_model_id is None:
            raise ModelError(f"{model_id}: no usable begin-of-text token")

        rest = [i for i in range(vm) if i not in (bot_model_id, unk_model_id)]
        self._shared_to_model = [bot_model_id, unk_model_id, *rest]
        pieces = self.tokenizer.convert_ids_to_tokens(rest)
        bad = [p for p in pieces if p == "" or any(ch.isspace() for ch in p)]
        if bad:
            raise ModelError(
                f"{model_id}: {len(bad)} token pieces are empty or contain "
                f"whitespace and cannot enter the vocab file format "
                f"(first: {bad[0]!r})"
            )
        self.tokens = [BOT_TOKEN, UNK_TOKEN, *pieces]

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def fingerprint_hex(self) -> str:
        return fingerprint(self.tokens).hex()

    def file_tokens(self) -> list[str]:
        return self.tokens[NUM_SPECIALS:]

    def logits(self, context: list[int]) -> list[float]:
        torch = self._torch
        model_ids = [self._shared_to_model[i] for i in context]
        if not model_ids:
            model_ids = [self._shared_to_model[0]]
        with torch.inference_mode():
            ids = torch.tensor([model_ids], dtype=torch.long)
            out = self.model(input_ids=ids).logits[0, -1]
        if not hasattr(self, "_gather"):
            self._gather = torch.tensor(self._shared_to_model, dtype=torch.long)
        return out.float()[self._gather].tolist()


def load_model(model_id: str, fp16: bool = False):
    if model_id.startswith("stub:"):
        return StubModel(model_id[len("stub:"):])
    return TransformersModel(model_id, fp16=fp16)
