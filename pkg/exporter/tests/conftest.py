from __future__ import annotations

import pytest

# A tiny randomly-initialized BERT saved locally: enough to exercise the
# exporter end to end without downloading anything.
_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "acme", "corp", "pays", "the", "to", "on", "under", "section",
    "article", "clause", "holdings", "agreement", "deposit",
    "$", ".", ",", "(", ")",
    "##s", "##ing", "##ed", "##0", "##1", "##2",
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("tiny-bert")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(_VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)

    config = BertConfig(
        vocab_size=len(_VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=96,
    )
    torch.manual_seed(0)
    model = BertModel(config)

    model_dir = root / "model"
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return str(model_dir)
