"""Conjunctive instance queries: atomic concepts, ``⊓`` and ``∃r.C``.

Text syntax accepted by :func:`parse_query`::

    FemaleUser ⊓ ∃hasUserInstance.(∃hasSymptom.Headache)
    FemaleUser and exists hasUserInstance.(exists hasSymptom.Headache)

``&`` works as well as ``⊓`` / ``and``; ``Top`` (or ``⊤``) matches every individual.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .model import KnowledgeBase, KnowledgeBaseError

Query = Union["Atomic", "And", "Exists", "Top"]


@dataclass(frozen=True)
class Top:
    def __str__(self):
        return "⊤"


@dataclass(frozen=True)
class Atomic:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class And:
    parts: tuple

    def __str__(self):
        return " ⊓ ".join(_wrap(p) for p in self.parts)


@dataclass(frozen=True)
class Exists:
    role: str
    filler: "Query"

    def __str__(self):
        return f"∃{self.role}.{_wrap(self.filler)}"


def _wrap(q) -> str:
    return f"({q})" if isinstance(q, And) else str(q)


def query_instances(kb: KnowledgeBase, query) -> frozenset:
    """Individuals satisfying ``query`` (a :data:`Query` or its text form).

    Concept membership is evaluated up to subsumption of asserted types and
    ``∃r.C`` over successors through ``r`` or any sub-role of ``r``.
    """
    if isinstance(query, str):
        query = parse_query(query)
    everyone = kb.abox.individuals
    return frozenset(_eval(kb, query, everyone))


def _eval(kb, q, everyone) -> set:
    if isinstance(q, Top):
        return set(everyone)
    if isinstance(q, Atomic):
        return set(kb.instances(q.name))
    if isinstance(q, And):
        result = None
        for part in q.parts:
            got = _eval(kb, part, everyone)
            result = got if result is None else result & got
        return result if result is not None else set(everyone)
    if isinstance(q, Exists):
        kb.tbox.role_subsumers(q.role)
        fillers = _eval(kb, q.filler, everyone)
        return {a for a in everyone if kb.role_successors(a, q.role) & fillers}
    raise TypeError(f"not a query: {q!r}")


_TOKEN = re.compile(r"\s*(⊓|&|\(|\)|∃|⊤|\.|[A-Za-z_][A-Za-z0-9_\-]*)")


class QuerySyntaxError(KnowledgeBaseError):
    pass


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def parse_query(text: str) -> Query:
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise QuerySyntaxError(f"expected {expected or 'a term'} at token {pos}, found {tok!r}")
        pos += 1
        return tok

    def conj():
        parts = [term()]
        while peek() in ("⊓", "&", "and"):
            take()
            parts.append(term())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def term():
        tok = peek()
        if tok == "(":
            take("(")
            inner = conj()
            take(")")
            return inner
        if tok in ("∃", "exists", "some"):
            take()
            role = take()
            take(".")
            return Exists(role, term())
        if tok in ("⊤", "Top"):
            take()
            return Top()
        if tok is None or not re.match(r"[A-Za-z_]", tok):
            raise QuerySyntaxError(f"expected a concept name at token {pos}, found {tok!r}")
        return Atomic(take())

    q = conj()
    if pos != len(tokens):
        raise QuerySyntaxError(f"trailing input at token {pos}: {tokens[pos]!r}")
    return q
