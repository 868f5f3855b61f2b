"""Optional enrichment layer: similarity edges, ontology import and closure."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..rdf import EncodedGraph, encode
from .closure import DEFAULT_RULES, ClosureLimitError, ClosureRule, forward_chain
from .imports import Resolver, import_ontologies
from .similarity import (
    DEFAULT_THRESHOLDS,
    SIM_NAMESPACE,
    SimilarityConfig,
    bucket_literals,
    emit_similarity_triples,
    is_similarity_predicate,
    jaccard_qgrams,
    numeric_similarity_join,
    qgrams,
    similarity_predicate,
    similarity_triples,
    string_similarity_join,
)

logger = logging.getLogger(__name__)


@dataclass
class EnrichmentConfig:
    similarity: bool = False
    import_ontologies: bool = False
    closure: bool = False
    similarity_config: SimilarityConfig = field(default_factory=SimilarityConfig)
    resolver: Resolver | None = None
    import_depth: int = 2
    closure_cap: int | None = None


def enrich(graph: EncodedGraph, config: EnrichmentConfig) -> EncodedGraph:
    """Import, then similarity edges, then closure over the whole graph."""
    if config.import_ontologies and config.resolver is not None:
        graph = import_ontologies(graph, config.resolver, config.import_depth)
    if config.similarity:
        extra = similarity_triples(graph, config.similarity_config)
        if extra:
            graph = encode(list(graph.iter_decoded()) + extra, graph.dictionary)
    if config.closure:
        graph = forward_chain(graph, DEFAULT_RULES, config.closure_cap)
    return graph


__all__ = [
    "DEFAULT_RULES", "DEFAULT_THRESHOLDS", "SIM_NAMESPACE", "ClosureLimitError", "ClosureRule",
    "EnrichmentConfig", "Resolver", "SimilarityConfig", "bucket_literals", "emit_similarity_triples",
    "enrich", "forward_chain", "import_ontologies", "is_similarity_predicate", "jaccard_qgrams",
    "numeric_similarity_join", "qgrams", "similarity_predicate", "similarity_triples",
    "string_similarity_join",
]
