from .bench import BenchRow, runtime_bench
from .io import Candidate, LabeledMessage, NBestEntry, ScoredPair, read_messages, read_nbest, read_pairs
from .metrics import (
    UndefinedCorrelationError,
    UndefinedSimilarityError,
    confusion_matrix,
    corpus_bleu,
    cosine_similarity,
    pearson_r,
)
from .rerank import RerankConfig, combined_score, rerank, select
from .sms import logreg_train, sms_eval, stratified_split
from .sts import sts_eval

__all__ = [
    "BenchRow", "Candidate", "LabeledMessage", "NBestEntry", "RerankConfig", "ScoredPair",
    "UndefinedCorrelationError", "UndefinedSimilarityError", "combined_score", "confusion_matrix",
    "corpus_bleu", "cosine_similarity", "logreg_train", "pearson_r", "read_messages", "read_nbest",
    "read_pairs", "rerank", "runtime_bench", "select", "sms_eval", "stratified_split", "sts_eval",
]
