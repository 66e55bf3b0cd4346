"""N-Triples serialization of a TBox / ABox pair.

Only IRI terms are produced or accepted. Local names live under a single
base IRI; the RDF, RDFS and OWL terms below carry the axioms.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Optional, Union

from .model import ABox, KnowledgeBaseError, TBox

DEFAULT_BASE = "http://example.org/respikit/"

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_SUBCLASS = "http://www.w3.org/2000/01/rdf-schema#subClassOf"
RDFS_SUBPROPERTY = "http://www.w3.org/2000/01/rdf-schema#subPropertyOf"
RDFS_DOMAIN = "http://www.w3.org/2000/01/rdf-schema#domain"
RDFS_RANGE = "http://www.w3.org/2000/01/rdf-schema#range"
OWL_CLASS = "http://www.w3.org/2002/07/owl#Class"
OWL_OBJECT_PROPERTY = "http://www.w3.org/2002/07/owl#ObjectProperty"
OWL_NAMED_INDIVIDUAL = "http://www.w3.org/2002/07/owl#NamedIndividual"

_IRI = r"<([^<>\"{}|^`\\\x00-\x20]+)>"
_LINE = re.compile(rf"^{_IRI}[ \t]+{_IRI}[ \t]+{_IRI}[ \t]*\.[ \t]*$")

Triple = tuple  # (subject IRI, predicate IRI, object IRI)


class NTriplesError(KnowledgeBaseError):
    def __init__(self, line: int, message: str, source: str = "<string>"):
        self.line = line
        self.source = source
        super().__init__(f"{source}:{line}: {message}")


def format_triple(t: Triple) -> str:
    return f"<{t[0]}> <{t[1]}> <{t[2]}> ."


def tbox_triples(tbox: TBox, base: str = DEFAULT_BASE) -> set:
    iri = base.__add__
    out = set()
    for c, ps in tbox.concept_parents.items():
        out.add((iri(c), RDF_TYPE, OWL_CLASS))
        out.update((iri(c), RDFS_SUBCLASS, iri(p)) for p in ps)
    for r, ps in tbox.role_parents.items():
        out.add((iri(r), RDF_TYPE, OWL_OBJECT_PROPERTY))
        out.update((iri(r), RDFS_SUBPROPERTY, iri(p)) for p in ps)
    out.update((iri(r), RDFS_DOMAIN, iri(c)) for r, c in tbox.domains.items())
    out.update((iri(r), RDFS_RANGE, iri(c)) for r, c in tbox.ranges.items())
    return out


def abox_triples(abox: ABox, base: str = DEFAULT_BASE) -> set:
    iri = base.__add__
    out = {(iri(a), RDF_TYPE, OWL_NAMED_INDIVIDUAL) for a in abox.individuals}
    out.update((iri(a), RDF_TYPE, iri(c)) for c, a in abox.concept_assertions)
    out.update((iri(a), iri(r), iri(b)) for r, a, b in abox.role_assertions)
    return out


def serialize(tbox: Optional[TBox] = None, abox: Optional[ABox] = None, base: str = DEFAULT_BASE) -> str:
    """Sorted N-Triples text, one ``<s> <p> <o> .`` line per triple."""
    triples = set()
    if tbox is not None:
        triples |= tbox_triples(tbox, base)
    if abox is not None:
        triples |= abox_triples(abox, base)
    return "".join(format_triple(t) + "\n" for t in sorted(triples))


def emit_ntriples(tbox: Optional[TBox], abox: Optional[ABox], path, base: str = DEFAULT_BASE) -> int:
    """Write :func:`serialize` output (UTF-8, LF) to ``path``; returns the triple count."""
    text = serialize(tbox, abox, base)
    Path(path).write_bytes(text.encode("utf-8"))
    return text.count("\n")


def read_triples(lines: Iterable[str], source: str = "<string>") -> list[tuple[int, Triple]]:
    """Parse lines into ``(line_number, triple)``; blank lines and ``#`` comments are skipped."""
    out = []
    for no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE.match(stripped)
        if m is None:
            if not stripped.endswith("."):
                raise NTriplesError(no, "missing terminating ' .'", source)
            raise NTriplesError(no, f"malformed triple: {stripped[:80]!r}", source)
        out.append((no, m.groups()))
    return out


def parse_ntriples(*sources: Union[str, Path], base: str = DEFAULT_BASE, text: Optional[str] = None) -> tuple[TBox, ABox]:
    """Rebuild ``(TBox, ABox)`` from one or more N-Triples files (or ``text``).

    Every resource IRI must start with ``base``. The triples are
    partitioned by predicate: OWL declarations and RDFS axioms go to the
    TBox, typing by a declared class and object-property links to the ABox.
    """
    numbered = []
    if text is not None:
        numbered += [("<string>", n, t) for n, t in read_triples(text.splitlines(), "<string>")]
    for src in sources:
        content = Path(src).read_bytes().decode("utf-8")
        numbered += [(str(src), n, t) for n, t in read_triples(content.splitlines(), str(src))]

    def local(src, no, iri):
        if not iri.startswith(base) or len(iri) == len(base):
            raise NTriplesError(no, f"IRI {iri!r} is outside the base namespace {base!r}", src)
        return iri[len(base) :]

    concepts, roles, individuals = {}, {}, set()
    domains, ranges = {}, {}
    typed, links = [], []
    for src, no, (s, p, o) in numbered:
        if p == RDF_TYPE and o == OWL_CLASS:
            concepts.setdefault(local(src, no, s), set())
        elif p == RDF_TYPE and o == OWL_OBJECT_PROPERTY:
            roles.setdefault(local(src, no, s), set())
        elif p == RDF_TYPE and o == OWL_NAMED_INDIVIDUAL:
            individuals.add(local(src, no, s))
        elif p == RDFS_SUBCLASS:
            concepts.setdefault(local(src, no, s), set()).add(local(src, no, o))
        elif p == RDFS_SUBPROPERTY:
            roles.setdefault(local(src, no, s), set()).add(local(src, no, o))
        elif p in (RDFS_DOMAIN, RDFS_RANGE):
            table = domains if p == RDFS_DOMAIN else ranges
            r = local(src, no, s)
            if r in table and table[r] != local(src, no, o):
                raise NTriplesError(no, f"second {'domain' if p == RDFS_DOMAIN else 'range'} for {r!r}", src)
            table[r] = local(src, no, o)
        elif p == RDF_TYPE:
            typed.append((src, no, local(src, no, o), local(src, no, s)))
        else:
            links.append((src, no, local(src, no, p), local(src, no, s), local(src, no, o)))

    for src, no, c, a in typed:
        if c not in concepts:
            raise NTriplesError(no, f"type {c!r} is not a declared class", src)
    for src, no, r, a, b in links:
        if r not in roles:
            raise NTriplesError(no, f"predicate {r!r} is not a declared object property", src)
    tbox = TBox({c: frozenset(ps) for c, ps in concepts.items()}, {r: frozenset(ps) for r, ps in roles.items()}, domains, ranges)
    abox = ABox(
        frozenset((c, a) for _, _, c, a in typed),
        frozenset((r, a, b) for _, _, r, a, b in links),
        frozenset(individuals),
    )
    return tbox, abox
