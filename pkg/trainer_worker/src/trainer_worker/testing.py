"""Builds tiny local checkpoints so tests never touch the network.

The miniature model is a randomly initialized two-layer BERT base (no
classification head) with a small WordPiece vocabulary that covers the
toy report texts used in the protocol tests.
"""

from pathlib import Path

import torch

_SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
_LETTERS = "abcdefghijklmnopqrstuvwxyz"
_DIGITS = "0123456789"
_WORDS = [
    "dysplasia", "carcinoma", "benign", "mucosa", "barretts", "esophagus",
    "biopsy", "finding", "sample", "number", "report", "negative", "positive",
]


def miniature_vocab() -> list[str]:
    pieces = list(_LETTERS) + list(_DIGITS)
    return _SPECIALS + pieces + ["##" + p for p in pieces] + _WORDS


def build_miniature_model(path, seed: int = 0, hidden_size: int = 32) -> str:
    """Writes a loadable base checkpoint under path and returns its location."""
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    path = Path(path)
    vocab = miniature_vocab()
    vocab_map = {token: i for i, token in enumerate(vocab)}
    core = Tokenizer(WordPiece(vocab=vocab_map, unk_token="[UNK]", max_input_chars_per_word=64))
    core.normalizer = BertNormalizer(lowercase=True)
    core.pre_tokenizer = BertPreTokenizer()
    core.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab_map["[CLS]"]), ("[SEP]", vocab_map["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=core,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=128,
    )
    BertModel(config).save_pretrained(path)
    tokenizer.save_pretrained(path)
    return str(path)
