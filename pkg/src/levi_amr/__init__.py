"""Text-to-AMR parsing with attention-based arc prediction and Levi-graph decoding."""

__version__ = "0.1.0"

from .corpus import Sentence, load_corpus, load_sentences
from .estimator import AmrParser, LeviTransformer, Linearizer
from .graph import AmrGraph, dumps_penman, parse_penman, read_penman
from .smatch import smatch

__all__ = [
    "AmrGraph",
    "AmrParser",
    "LeviTransformer",
    "Linearizer",
    "Sentence",
    "dumps_penman",
    "load_corpus",
    "load_sentences",
    "parse_penman",
    "read_penman",
    "smatch",
]
