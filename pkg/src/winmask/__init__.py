"""Window-masking bidirectional language model and its causal / MLM baselines."""

__version__ = "0.1.0"
