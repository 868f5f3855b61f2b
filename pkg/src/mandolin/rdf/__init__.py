from .graph import EncodedGraph, GraphError, TermDictionary, TripleId, empty_graph, encode, merge
from .ntriples import (
    IRI,
    BNode,
    Literal,
    NTriplesError,
    NTriplesParser,
    RawTriple,
    Term,
    TermKind,
    load_ntriples,
    parse_ntriples,
    parse_term,
    term_to_nt,
    triple_to_nt,
    write_ntriples,
)

__all__ = [
    "EncodedGraph", "GraphError", "TermDictionary", "TripleId", "empty_graph", "encode", "merge",
    "IRI", "BNode", "Literal", "NTriplesError", "NTriplesParser", "RawTriple", "Term", "TermKind",
    "load_ntriples", "parse_ntriples", "parse_term", "term_to_nt", "triple_to_nt", "write_ntriples",
]
