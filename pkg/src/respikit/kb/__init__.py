"""Description-logic knowledge base: terminology, assertions, N-Triples and queries."""

from .assertions import MappingError, assert_dataset, assert_records, instance_name, user_name
from .model import ABox, KnowledgeBase, KnowledgeBaseError, TBox, UnknownNameError, Vocabulary
from .ntriples import DEFAULT_BASE, NTriplesError, emit_ntriples, parse_ntriples, serialize
from .ontology import Ontology, build_tbox, load_ontology
from .query import And, Atomic, Exists, QuerySyntaxError, Top, parse_query, query_instances


def subsumers(concept: str, tbox: TBox = None) -> frozenset:
    """Reflexive-transitive super-concepts of ``concept`` (packaged TBox by default)."""
    return (tbox or load_ontology().tbox).subsumers(concept)


__all__ = [
    "ABox",
    "And",
    "Atomic",
    "DEFAULT_BASE",
    "Exists",
    "KnowledgeBase",
    "KnowledgeBaseError",
    "MappingError",
    "NTriplesError",
    "Ontology",
    "QuerySyntaxError",
    "TBox",
    "Top",
    "UnknownNameError",
    "Vocabulary",
    "assert_dataset",
    "assert_records",
    "build_tbox",
    "emit_ntriples",
    "instance_name",
    "load_ontology",
    "parse_ntriples",
    "parse_query",
    "query_instances",
    "serialize",
    "subsumers",
    "user_name",
]
