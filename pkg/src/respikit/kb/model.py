"""Terminology (TBox), assertions (ABox) and their combined vocabulary."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional

NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class KnowledgeBaseError(ValueError):
    pass


class UnknownNameError(KnowledgeBaseError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


def _check_name(name: str, what: str) -> None:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise KnowledgeBaseError(f"invalid {what} name {name!r}")


@dataclass(frozen=True)
class Vocabulary:
    concepts: frozenset
    roles: frozenset
    individuals: frozenset

    def __post_init__(self):
        clashes = (self.concepts & self.roles) | (self.concepts & self.individuals) | (self.roles & self.individuals)
        if clashes:
            raise KnowledgeBaseError(f"names used in more than one vocabulary set: {sorted(clashes)}")


def _closure(parents: Mapping[str, frozenset]) -> dict[str, frozenset]:
    """Reflexive-transitive ancestor sets; raises on cycles."""
    out: dict[str, frozenset] = {}
    state: dict[str, int] = {}

    def visit(node, path):
        if state.get(node) == 2:
            return out[node]
        if state.get(node) == 1:
            cycle = path[path.index(node) :] + [node]
            raise KnowledgeBaseError(f"cyclic hierarchy: {' -> '.join(cycle)}")
        state[node] = 1
        acc = {node}
        for p in sorted(parents.get(node, ())):
            acc |= visit(p, path + [node])
        state[node] = 2
        out[node] = frozenset(acc)
        return out[node]

    for n in sorted(parents):
        visit(n, [])
    return out


@dataclass(frozen=True)
class TBox:
    """Concept and role hierarchies plus role domain/range declarations.

    ``concept_parents`` maps every concept name to its direct super-concepts
    (an empty set for top-level concepts); ``role_parents`` likewise for roles.
    """

    concept_parents: Mapping[str, frozenset]
    role_parents: Mapping[str, frozenset] = field(default_factory=dict)
    domains: Mapping[str, str] = field(default_factory=dict)
    ranges: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        cp = {c: frozenset(ps) for c, ps in self.concept_parents.items()}
        rp = {r: frozenset(ps) for r, ps in self.role_parents.items()}
        for c, ps in cp.items():
            _check_name(c, "concept")
            for p in ps:
                if p not in cp:
                    raise UnknownNameError(f"concept {c!r} has undeclared parent {p!r}")
        for r, ps in rp.items():
            _check_name(r, "role")
            for p in ps:
                if p not in rp:
                    raise UnknownNameError(f"role {r!r} has undeclared parent {p!r}")
        for table, what in ((self.domains, "domain"), (self.ranges, "range")):
            for r, c in table.items():
                if r not in rp:
                    raise UnknownNameError(f"{what} declared for unknown role {r!r}")
                if c not in cp:
                    raise UnknownNameError(f"{what} of {r!r} is unknown concept {c!r}")
        if set(cp) & set(rp):
            raise KnowledgeBaseError(f"names used as both concept and role: {sorted(set(cp) & set(rp))}")
        object.__setattr__(self, "concept_parents", cp)
        object.__setattr__(self, "role_parents", rp)
        object.__setattr__(self, "domains", dict(self.domains))
        object.__setattr__(self, "ranges", dict(self.ranges))
        # fail fast on cycles
        _ = self._concept_closure, self._role_closure

    @classmethod
    def empty(cls) -> "TBox":
        return cls({})

    @property
    def concepts(self) -> frozenset:
        return frozenset(self.concept_parents)

    @property
    def roles(self) -> frozenset:
        return frozenset(self.role_parents)

    @cached_property
    def _concept_closure(self):
        return _closure(self.concept_parents)

    @cached_property
    def _role_closure(self):
        return _closure(self.role_parents)

    @cached_property
    def _concept_children(self):
        kids: dict[str, set] = {c: set() for c in self.concept_parents}
        for c, ps in self.concept_parents.items():
            for p in ps:
                kids[p].add(c)
        return {c: frozenset(v) for c, v in kids.items()}

    def subsumers(self, concept: str) -> frozenset:
        """All ``D`` with ``concept ⊑ D``, including ``concept`` itself."""
        try:
            return self._concept_closure[concept]
        except KeyError:
            raise UnknownNameError(f"unknown concept {concept!r}") from None

    def subsumees(self, concept: str) -> frozenset:
        """All ``C`` with ``C ⊑ concept``, including ``concept`` itself."""
        if concept not in self.concept_parents:
            raise UnknownNameError(f"unknown concept {concept!r}")
        return frozenset(c for c, ups in self._concept_closure.items() if concept in ups)

    def role_subsumers(self, role: str) -> frozenset:
        try:
            return self._role_closure[role]
        except KeyError:
            raise UnknownNameError(f"unknown role {role!r}") from None

    def is_subsumed(self, sub: str, sup: str) -> bool:
        return sup in self.subsumers(sub)

    def children(self, concept: str) -> frozenset:
        if concept not in self.concept_parents:
            raise UnknownNameError(f"unknown concept {concept!r}")
        return self._concept_children[concept]

    def depth(self) -> int:
        """Length (in edges) of the longest downward chain from a top concept."""
        if not self.concept_parents:
            return 0
        memo: dict[str, int] = {}

        def level(c):
            if c not in memo:
                ps = self.concept_parents[c]
                memo[c] = 0 if not ps else 1 + max(level(p) for p in ps)
            return memo[c]

        return max(level(c) for c in self.concept_parents)

    def axioms(self) -> frozenset:
        """Hashable view used for set equality: declarations plus every axiom."""
        items = {("concept", c) for c in self.concept_parents}
        items |= {("role", r) for r in self.role_parents}
        items |= {("sub", c, p) for c, ps in self.concept_parents.items() for p in ps}
        items |= {("subrole", r, p) for r, ps in self.role_parents.items() for p in ps}
        items |= {("domain", r, c) for r, c in self.domains.items()}
        items |= {("range", r, c) for r, c in self.ranges.items()}
        return frozenset(items)

    def __eq__(self, other):
        return isinstance(other, TBox) and self.axioms() == other.axioms()

    def __hash__(self):
        return hash(self.axioms())


@dataclass(frozen=True)
class ABox:
    """Concept assertions ``(concept, individual)`` and role assertions ``(role, a, b)``."""

    concept_assertions: frozenset = frozenset()
    role_assertions: frozenset = frozenset()
    declared: frozenset = frozenset()

    def __post_init__(self):
        ca = frozenset(tuple(x) for x in self.concept_assertions)
        ra = frozenset(tuple(x) for x in self.role_assertions)
        object.__setattr__(self, "concept_assertions", ca)
        object.__setattr__(self, "role_assertions", ra)
        object.__setattr__(self, "declared", frozenset(self.declared))
        for c, a in ca:
            _check_name(a, "individual")
        for r, a, b in ra:
            _check_name(a, "individual")
            _check_name(b, "individual")

    @property
    def individuals(self) -> frozenset:
        names = set(self.declared)
        names.update(a for _, a in self.concept_assertions)
        for _, a, b in self.role_assertions:
            names.update((a, b))
        return frozenset(names)

    def __len__(self):
        return len(self.concept_assertions) + len(self.role_assertions)

    def types_of(self, individual: str) -> frozenset:
        return frozenset(c for c, a in self.concept_assertions if a == individual)

    def successors(self, individual: str) -> list[tuple[str, str]]:
        """Sorted ``(role, object)`` pairs with ``individual`` as subject."""
        return sorted((r, b) for r, a, b in self.role_assertions if a == individual)

    def __eq__(self, other):
        return (
            isinstance(other, ABox)
            and self.concept_assertions == other.concept_assertions
            and self.role_assertions == other.role_assertions
            and self.individuals == other.individuals
        )

    def __hash__(self):
        return hash((self.concept_assertions, self.role_assertions, self.individuals))

    def merged(self, other: "ABox") -> "ABox":
        return ABox(
            self.concept_assertions | other.concept_assertions,
            self.role_assertions | other.role_assertions,
            self.declared | other.declared,
        )


class KnowledgeBase:
    """A TBox and an ABox whose names resolve against each other.

    Concept and role assertions must use names declared in the TBox and
    individual names must not collide with concept or role names.
    """

    def __init__(self, tbox: TBox, abox: Optional[ABox] = None):
        abox = abox or ABox()
        for c, a in abox.concept_assertions:
            if c not in tbox.concept_parents:
                raise UnknownNameError(f"assertion {c}({a}) uses unknown concept {c!r}")
        for r, a, b in abox.role_assertions:
            if r not in tbox.role_parents:
                raise UnknownNameError(f"assertion {r}({a}, {b}) uses unknown role {r!r}")
        self.tbox = tbox
        self.abox = abox
        self.vocabulary = Vocabulary(tbox.concepts, tbox.roles, abox.individuals)
        self._types = None
        self._succ = None

    def _index(self):
        if self._types is None:
            types: dict[str, set] = {}
            for c, a in self.abox.concept_assertions:
                types.setdefault(a, set()).update(self.tbox.subsumers(c))
            succ: dict[str, set] = {}
            for r, a, b in self.abox.role_assertions:
                for s in self.tbox.role_subsumers(r):
                    succ.setdefault((a, s), set()).add(b)
            self._types, self._succ = types, succ
        return self._types, self._succ

    def inferred_types(self, individual: str) -> frozenset:
        """Asserted types closed upward under subsumption."""
        return frozenset(self._index()[0].get(individual, ()))

    def role_successors(self, individual: str, role: str) -> frozenset:
        """Objects linked by ``role`` or any of its sub-roles."""
        self.tbox.role_subsumers(role)
        return frozenset(self._index()[1].get((individual, role), ()))

    def instances(self, concept: str) -> frozenset:
        self.tbox.subsumers(concept)
        types, _ = self._index()
        return frozenset(a for a, ts in types.items() if concept in ts)

    def __eq__(self, other):
        return isinstance(other, KnowledgeBase) and self.tbox == other.tbox and self.abox == other.abox

    def __repr__(self):
        return f"KnowledgeBase({len(self.tbox.concepts)} concepts, {len(self.tbox.roles)} roles, {len(self.abox)} assertions)"


def tbox_from_edges(concepts: Iterable[tuple[str, Iterable[str]]], roles=(), domains=None, ranges=None) -> TBox:
    """Convenience constructor from ``(name, parents)`` pairs."""
    return TBox(
        {c: frozenset(ps) for c, ps in concepts},
        {r: frozenset(ps) for r, ps in roles},
        domains or {},
        ranges or {},
    )
