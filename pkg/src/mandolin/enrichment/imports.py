"""Ontology import through a local file mirror of external namespaces."""
from __future__ import annotations

import logging
from pathlib import Path

from ..rdf import EncodedGraph, encode, load_ntriples, merge

logger = logging.getLogger(__name__)


class Resolver:
    """Maps namespace prefixes to local N-Triples files.

    The manifest format is one ``namespace<TAB>path`` entry per line; relative
    paths resolve against the manifest's directory.
    """

    def __init__(self, mapping: dict[str, str | Path] | None = None):
        self.mapping = {ns: Path(p) for ns, p in (mapping or {}).items()}

    @classmethod
    def from_manifest(cls, path: str | Path) -> "Resolver":
        path = Path(path)
        mapping = {}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'namespace<TAB>path'")
            ns, target = parts[0].strip(), Path(parts[1].strip())
            mapping[ns] = target if target.is_absolute() else path.parent / target
        return cls(mapping)

    def __len__(self):
        return len(self.mapping)

    def namespaces_of(self, iris) -> set[str]:
        found = set()
        for iri in iris:
            for ns in self.mapping:
                if iri.startswith(ns):
                    found.add(ns)
        return found


def _iris(graph: EncodedGraph) -> set[str]:
    ids = set(graph.nodes()) | set(graph.predicates())
    return {graph.term(i).lexical for i in ids if graph.term(i).is_iri}


def import_ontologies(graph: EncodedGraph, resolver: Resolver, depth: int = 2) -> EncodedGraph:
    """Merge mirrored graphs for every referenced namespace, ``depth`` hops deep."""
    done: set[str] = set()
    for hop in range(depth):
        pending = sorted(resolver.namespaces_of(_iris(graph)) - done)
        if not pending:
            break
        for ns in pending:
            done.add(ns)
            path = resolver.mapping[ns]
            if not path.exists():
                logger.warning("no mirror file for namespace %s at %s; skipped", ns, path)
                continue
            graph = merge(graph, encode(load_ntriples(path)))
            logger.info("imported %s (hop %d) from %s", ns, hop + 1, path)
    return graph
