import numpy as np
import pytest

from winmask.model import ModelConfig, TransformerLM
from winmask.rng import make_rng
from winmask.tokenizer import END, START


def small_model(regime, layers=1, vocab_size=20, dim=8, heads=2, ffn=16, seed=0, dropout=0.0,
                max_len=16):
    cfg = ModelConfig(vocab_size=vocab_size, num_layers=layers, model_dim=dim, num_heads=heads,
                      ffn_dim=ffn, max_len=max_len, dropout_rate=dropout, regime=regime)
    return TransformerLM(cfg, seed=seed)


def random_sentence(rng, vocab_size, n):
    return np.concatenate([[START], rng.integers(5, vocab_size, size=n - 2), [END]]).astype(np.int64)


@pytest.fixture
def rng():
    return make_rng(1234, "tests")


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num:>2}: {title}  [{detail}]")
