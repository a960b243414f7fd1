"""Entity tagging for patient-experience and PIO spans in health posts.

The package covers the full experiment loop: span-annotated JSONL corpora,
BIO encoding over whitespace tokens, gazetteer marker augmentation, a
deterministic perceptron backend plus a wire protocol for external ones,
token/sentence evaluation, and paired bootstrap comparison between runs.
"""

from .augment import Gazetteer, augment, gazetteer_annotate, load_gazetteer, project_back
from .backends import (
    HyperParams,
    ModelHandle,
    TrainingSentence,
    load_model,
    predict,
    save_model,
    train,
    viterbi_decode,
)
from .bootstrap import BootstrapResult, BootstrapUnit, paired_bootstrap
from .corpus import (
    AnnotatedSpan,
    Corpus,
    Post,
    corpus_stats,
    load_corpus,
    save_corpus,
    stratified_split,
    validate_corpus,
)
from .errors import (
    BackendError,
    BackendUnreachableError,
    CompareMismatchError,
    DataError,
    ExpioError,
    UsageError,
)
from .evaluation import (
    ConfusionMatrix,
    MetricsReport,
    sentence_labels,
    sentence_prf,
    token_confusion,
    token_prf,
)
from .pipeline import RunConfig, compare, run
from .schema import SCHEMAS, LabelSchema, get_schema
from .tokenization import (
    SentenceSpan,
    Token,
    decode_bio,
    encode_bio,
    repair_bio,
    segment_sentences,
    whitespace_tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSpan",
    "BackendError",
    "BackendUnreachableError",
    "BootstrapResult",
    "BootstrapUnit",
    "CompareMismatchError",
    "ConfusionMatrix",
    "Corpus",
    "DataError",
    "ExpioError",
    "Gazetteer",
    "HyperParams",
    "LabelSchema",
    "MetricsReport",
    "ModelHandle",
    "Post",
    "RunConfig",
    "SCHEMAS",
    "SentenceSpan",
    "Token",
    "TrainingSentence",
    "UsageError",
    "augment",
    "compare",
    "corpus_stats",
    "decode_bio",
    "encode_bio",
    "gazetteer_annotate",
    "get_schema",
    "load_corpus",
    "load_gazetteer",
    "load_model",
    "paired_bootstrap",
    "predict",
    "project_back",
    "repair_bio",
    "run",
    "save_corpus",
    "save_model",
    "segment_sentences",
    "sentence_labels",
    "sentence_prf",
    "stratified_split",
    "token_confusion",
    "token_prf",
    "train",
    "validate_corpus",
    "viterbi_decode",
    "whitespace_tokenize",
]
