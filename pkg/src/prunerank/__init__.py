"""prunerank: context pruning and reranking for retrieval-augmented QA.

Builds silver-labeled training data from retrieved passages, trains a small
encoder with a joint per-token pruning + reranking objective, and prunes
retrieved contexts sentence-by-sentence at inference behind one threshold.
"""

__version__ = "0.1.0"

from .corpus import Document, Passage, chunk_fixed, chunk_random, chunk_words
from .inference import PruneResult, Pruner, binarize, sentence_round
from .model import ModelConfig, TrainConfig, forward, init_params, load_checkpoint, save_checkpoint, train
from .oracle import LabeledExample, MockOracle, build_prompt, dataset_stats, label_example, parse_citations
from .retrieval import LexicalIndex, ScoredPassage, build_index, retrieve
from .segmentation import TokenizedExample, Vocab, build_vocab, encode_example, split_sentences, tokenize

__all__ = [
    "Document",
    "LabeledExample",
    "LexicalIndex",
    "MockOracle",
    "ModelConfig",
    "Passage",
    "PruneResult",
    "Pruner",
    "ScoredPassage",
    "TokenizedExample",
    "TrainConfig",
    "Vocab",
    "binarize",
    "build_index",
    "build_prompt",
    "build_vocab",
    "chunk_fixed",
    "chunk_random",
    "chunk_words",
    "dataset_stats",
    "encode_example",
    "forward",
    "init_params",
    "label_example",
    "load_checkpoint",
    "parse_citations",
    "retrieve",
    "save_checkpoint",
    "sentence_round",
    "split_sentences",
    "tokenize",
    "train",
]
