"""Knowledge-augmented in-document search.

Finds every mention in a document that matches a natural-language query by
fusing in-document phrase vectors with external knowledge vectors and ranking
candidates with exact maximum-inner-product search. Ships the full metric
suite for evaluating ranked mention lists, a CLI, and an HTTP service.
"""

from .dataset import DocumentRecord, load_dataset, load_predictions, write_predictions
from .embedding import (
    EmbeddingProvider,
    ReferenceHashEmbedder,
    RemoteEmbeddingProvider,
    TokenizedText,
    encode_knowledge,
    encode_phrase,
    encode_query,
    tokenize_with_spans,
)
from .engine import SearchEngine, build_linker, build_provider, build_store
from .errors import (
    DatasetFormatError,
    EncodingError,
    IndexBuildError,
    IndexFormatError,
    IntegrityError,
    KtrlfError,
    ProtocolError,
    TransportError,
)
from .index import (
    FusionMode,
    PhraseIndex,
    SearchHit,
    ThresholdPolicy,
    apply_threshold,
    build_index,
    load_index,
    save_index,
    search,
)
from .knowledge import (
    FixtureKnowledgeStore,
    MappingKnowledgeStore,
    RemoteKnowledgeStore,
    truncate_sentences,
)
from .linking import Gazetteer, GazetteerLinker, RemoteLinker
from .metrics import (
    MetricReport,
    average_precision_iou,
    evaluate,
    list_em_binary,
    list_em_f1,
    list_overlap_f1,
    measure_latency,
    robustness,
    set_scores,
)
from .model import (
    Document,
    GoldMention,
    KnowledgeRecord,
    Mention,
    Prediction,
    PredictionList,
    QuerySample,
    Span,
    find_occurrences,
    normalize_mention,
)

__version__ = "0.1.0"

__all__ = [
    "Document",
    "DocumentRecord",
    "EmbeddingProvider",
    "FixtureKnowledgeStore",
    "FusionMode",
    "Gazetteer",
    "GazetteerLinker",
    "GoldMention",
    "KnowledgeRecord",
    "KtrlfError",
    "MappingKnowledgeStore",
    "Mention",
    "MetricReport",
    "PhraseIndex",
    "Prediction",
    "PredictionList",
    "QuerySample",
    "ReferenceHashEmbedder",
    "RemoteEmbeddingProvider",
    "RemoteKnowledgeStore",
    "RemoteLinker",
    "SearchEngine",
    "SearchHit",
    "Span",
    "ThresholdPolicy",
    "TokenizedText",
    "apply_threshold",
    "average_precision_iou",
    "build_index",
    "build_linker",
    "build_provider",
    "build_store",
    "encode_knowledge",
    "encode_phrase",
    "encode_query",
    "evaluate",
    "find_occurrences",
    "list_em_binary",
    "list_em_f1",
    "list_overlap_f1",
    "load_dataset",
    "load_index",
    "load_predictions",
    "measure_latency",
    "normalize_mention",
    "robustness",
    "save_index",
    "search",
    "set_scores",
    "tokenize_with_spans",
    "truncate_sentences",
    "write_predictions",
    "DatasetFormatError",
    "EncodingError",
    "IndexBuildError",
    "IndexFormatError",
    "IntegrityError",
    "ProtocolError",
    "TransportError",
]
