"""The shipped terminology and record-to-concept mapping tables.

Both live in ``respikit/data/ontology.json`` so the hierarchy can be reviewed
and edited without touching code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from .model import TBox, Vocabulary


@dataclass(frozen=True)
class Ontology:
    tbox: TBox
    mappings: dict
    base_iri: str

    @property
    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.tbox.concepts, self.tbox.roles, frozenset())


def _tbox_from_tables(doc: dict) -> TBox:
    roles = doc["roles"]
    return TBox(
        {c: frozenset(ps) for c, ps in doc["concepts"].items()},
        {r: frozenset(spec.get("parents", ())) for r, spec in roles.items()},
        {r: spec["domain"] for r, spec in roles.items() if spec.get("domain")},
        {r: spec["range"] for r, spec in roles.items() if spec.get("range")},
    )


def _mapped_concepts(doc: dict) -> set:
    """Every concept name referenced from a mapping table."""
    found = set()

    def walk(node):
        if isinstance(node, dict):
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)
        elif isinstance(node, str):
            found.add(node)

    for key in ("user", "submission", "experts"):
        walk(doc[key])
    for spec in doc["audio"].values():
        found.add(spec["concept"])
    # strip the non-concept strings used as table values
    for exp in doc["experts"].values():
        found.discard(exp["audio"])
        for name in exp.get("ignored", ()):
            found.discard(name)
    return found


def _load_default() -> str:
    return resources.files("respikit").joinpath("data/ontology.json").read_text(encoding="utf-8")


def load_ontology(path: Optional[str] = None) -> Ontology:
    """Parse an ontology data file (the packaged one by default) and check it.

    Every concept named by a mapping table must be declared, and every role
    and audio concept referenced by the audio table must exist.
    """
    if path is None:
        return _default_ontology()
    with open(path, encoding="utf-8") as fh:
        return _ontology_from_text(fh.read())


@lru_cache(maxsize=None)
def _default_ontology() -> Ontology:
    return _ontology_from_text(_load_default())


def _ontology_from_text(text: str) -> Ontology:
    doc = json.loads(text)
    tbox = _tbox_from_tables(doc)
    missing = sorted(c for c in _mapped_concepts(doc) if c not in tbox.concept_parents)
    if missing:
        raise ValueError(f"mapping tables reference undeclared concepts: {missing}")
    for kind, spec in doc["audio"].items():
        if spec["role"] not in tbox.role_parents:
            raise ValueError(f"audio kind {kind!r} uses undeclared role {spec['role']!r}")
    mappings = {k: doc[k] for k in ("user", "submission", "audio", "experts")}
    mappings["ignored_expert_campaigns"] = tuple(doc.get("ignored_expert_campaigns", ()))
    return Ontology(tbox, mappings, doc.get("base_iri", ""))


def build_tbox() -> tuple[TBox, Vocabulary]:
    """The packaged terminology and its (individual-free) vocabulary."""
    onto = load_ontology()
    return onto.tbox, onto.vocabulary
