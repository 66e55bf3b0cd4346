"""Counterfactual explanations as minimal conceptual edits over the knowledge base.

An individual is described by the concepts asserted on it and on everything
reachable from it through role links, each tagged with the role path that
reached it. The distance between two descriptions is the cheapest set of
concept removals, additions and in-hierarchy replacements turning one into
the other; the nearest counterfactual is the opposite-class individual at the
smallest distance.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .kb.model import KnowledgeBase, TBox, UnknownNameError

POSITIVE = "positive"
NEGATIVE = "negative"
PREDICTED_CLASSES = (POSITIVE, NEGATIVE)

ADD, REMOVE, REPLACE = "add", "remove", "replace"
INSERT_COST = 1.0
DELETE_COST = 1.0

# roles and concepts that carry the ground-truth label rather than evidence
LABEL_ROLES = ("hasCovidTest",)
LABEL_CONCEPT_ROOTS = ("InstanceByCovidStatus",)


@dataclass(frozen=True, order=True)
class TaggedConcept:
    """A concept together with the role path leading to the individual it types."""

    context: str
    concept: str

    def __str__(self):
        return f"{self.context}:{self.concept}" if self.context else self.concept


@dataclass(frozen=True)
class IndividualDescription:
    individual: str
    concepts: frozenset
    predicted: str

    def __post_init__(self):
        if self.predicted not in PREDICTED_CLASSES:
            raise ValueError(f"predicted class must be one of {PREDICTED_CLASSES}, got {self.predicted!r}")
        tagged = frozenset(c if isinstance(c, TaggedConcept) else TaggedConcept(*_split(c)) for c in self.concepts)
        object.__setattr__(self, "concepts", tagged)

    @classmethod
    def of(cls, individual: str, concepts: Iterable, predicted: str) -> "IndividualDescription":
        return cls(individual, frozenset(concepts), predicted)

    def with_prediction(self, predicted: str) -> "IndividualDescription":
        return IndividualDescription(self.individual, self.concepts, predicted)


def _split(item) -> tuple[str, str]:
    if isinstance(item, tuple):
        return item
    context, _, concept = str(item).rpartition(":")
    return context, concept


@dataclass(frozen=True, order=True)
class Edit:
    kind: str
    source: Optional[str]
    target: Optional[str]
    cost: float
    context: str = ""

    def __post_init__(self):
        if self.kind not in (ADD, REMOVE, REPLACE):
            raise ValueError(f"unknown edit kind {self.kind!r}")
        if self.cost <= 0:
            raise ValueError("edit cost must be positive")

    @property
    def key(self) -> tuple:
        return (self.kind, self.source or "", self.target or "")

    def __str__(self):
        where = f" [{self.context}]" if self.context else ""
        if self.kind == REPLACE:
            return f"replace {self.source} -> {self.target}{where}"
        if self.kind == REMOVE:
            return f"remove {self.source}{where}"
        return f"add {self.target}{where}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "source": self.source, "target": self.target, "cost": self.cost, "context": self.context}


@dataclass(frozen=True)
class CounterfactualResult:
    source: str
    target: str
    edits: tuple
    cost: float

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "cost": self.cost,
            "edits": [e.to_dict() for e in self.edits],
        }


@dataclass(frozen=True)
class GlobalExplanation:
    """Edit frequencies over a set of explanations, most frequent first."""

    rows: tuple  # (kind, source, target, count, mean_cost)
    total_edits: int
    n_results: int

    def to_dict(self) -> dict:
        return {
            "n_results": self.n_results,
            "total_edits": self.total_edits,
            "edits": [
                {"kind": k, "source": s or None, "target": t or None, "count": n, "mean_cost": c}
                for k, s, t, n, c in self.rows
            ],
        }

    def to_table(self, sep: str = "\t") -> str:
        lines = [sep.join(("rank", "kind", "source", "target", "count", "mean_cost"))]
        for i, (k, s, t, n, c) in enumerate(self.rows, start=1):
            lines.append(sep.join((str(i), k, s or "-", t or "-", str(n), f"{c:.6f}")))
        return "\n".join(lines) + "\n"


# --- cost model -------------------------------------------------------------------


class ReplacementCosts:
    """Normalized hierarchy distances between concepts of one TBox.

    A replace between two concepts is allowed when they share an ancestor;
    its cost is the shortest path between them in the undirected
    subsumption graph divided by twice the hierarchy depth.
    """

    def __init__(self, tbox: TBox):
        self.tbox = tbox
        self.scale = 2.0 * max(tbox.depth(), 1)
        adj: dict[str, set] = {c: set() for c in tbox.concept_parents}
        for c, ps in tbox.concept_parents.items():
            for p in ps:
                adj[c].add(p)
                adj[p].add(c)
        self._adj = adj
        self._dist = lru_cache(maxsize=None)(self._bfs)

    def _bfs(self, start: str) -> dict:
        dist = {start: 0}
        todo = deque([start])
        while todo:
            n = todo.popleft()
            for m in sorted(self._adj[n]):
                if m not in dist:
                    dist[m] = dist[n] + 1
                    todo.append(m)
        return dist

    def path_length(self, a: str, b: str) -> Optional[int]:
        for c in (a, b):
            if c not in self._adj:
                raise UnknownNameError(f"unknown concept {c!r}")
        return self._dist(a).get(b)

    def replace_cost(self, a: TaggedConcept, b: TaggedConcept) -> Optional[float]:
        """Cost of swapping ``a`` for ``b``, or None when not allowed."""
        if a.context != b.context:
            return None
        if not (self.tbox.subsumers(a.concept) & self.tbox.subsumers(b.concept)):
            return None
        d = self.path_length(a.concept, b.concept)
        if d is None or d == 0:
            return None
        return d / self.scale


def _costs(tbox_or_costs) -> ReplacementCosts:
    if isinstance(tbox_or_costs, ReplacementCosts):
        return tbox_or_costs
    return _cached_costs(tbox_or_costs)


@lru_cache(maxsize=8)
def _cached_costs(tbox: TBox) -> ReplacementCosts:
    return ReplacementCosts(tbox)


def edit_distance(a: IndividualDescription, b: IndividualDescription, tbox) -> tuple[float, tuple]:
    """Minimum total cost and the edits turning ``a``'s concepts into ``b``'s.

    Concepts present in both are kept. The rest are paired by a
    minimum-cost assignment in which each concept of ``a`` is either
    replaced by one concept of ``b`` or removed, and each leftover concept
    of ``b`` is added.
    """
    costs = _costs(tbox)
    for c in a.concepts | b.concepts:
        costs.tbox.subsumers(c.concept)
    src = sorted(a.concepts - b.concepts)
    dst = sorted(b.concepts - a.concepts)
    n, m = len(src), len(dst)
    if n + m == 0:
        return 0.0, ()
    big = 1e9
    size = n + m
    M = np.full((size, size), big)
    for i, s in enumerate(src):
        for j, t in enumerate(dst):
            r = costs.replace_cost(s, t)
            if r is not None:
                M[i, j] = r
        M[i, m + i] = DELETE_COST
    for j in range(m):
        M[n + j, j] = INSERT_COST
    M[n:, m:] = 0.0
    rows, cols = linear_sum_assignment(M)
    edits = []
    for i, j in zip(rows, cols):
        if i < n and j < m:
            edits.append(Edit(REPLACE, src[i].concept, dst[j].concept, float(M[i, j]), src[i].context))
        elif i < n:
            edits.append(Edit(REMOVE, src[i].concept, None, DELETE_COST, src[i].context))
        elif j < m:
            edits.append(Edit(ADD, None, dst[j].concept, INSERT_COST, dst[j].context))
    edits.sort(key=lambda e: (e.kind, e.context, e.source or "", e.target or ""))
    return float(sum(e.cost for e in edits)), tuple(edits)


def nearest_counterfactual(x: IndividualDescription, pool: Sequence[IndividualDescription], tbox) -> CounterfactualResult:
    """Closest pool member by :func:`edit_distance`; ties go to the smaller individual id."""
    if not pool:
        raise ValueError("counterfactual pool is empty")
    wrong = [p.individual for p in pool if p.predicted == x.predicted]
    if wrong:
        raise ValueError(f"pool members share the predicted class of {x.individual}: {wrong[:3]}")
    costs = _costs(tbox)
    best = None
    for cand in sorted(pool, key=lambda p: p.individual):
        cost, edits = edit_distance(x, cand, costs)
        if best is None or cost < best[0] - 1e-12:
            best = (cost, cand.individual, edits)
    return CounterfactualResult(x.individual, best[1], best[2], best[0])


def global_explanation(results: Sequence[CounterfactualResult]) -> GlobalExplanation:
    """Count edits by ``(kind, source, target)`` across all results."""
    if not results:
        raise ValueError("no counterfactual results to aggregate")
    counts: Counter = Counter()
    total_cost: dict = {}
    for r in results:
        for e in r.edits:
            counts[e.key] += 1
            total_cost[e.key] = total_cost.get(e.key, 0.0) + e.cost
    rows = sorted(
        ((k, s, t, n, total_cost[(k, s, t)] / n) for (k, s, t), n in counts.items()),
        key=lambda row: (-row[3], row[0], row[1], row[2]),
    )
    return GlobalExplanation(tuple(rows), sum(counts.values()), len(results))


# --- descriptions from the knowledge base ------------------------------------------


def describe(
    kb: KnowledgeBase,
    individual: str,
    predicted: str,
    exclude_roles: Iterable[str] = LABEL_ROLES,
    exclude_concepts: Optional[Iterable[str]] = None,
    max_depth: int = 4,
) -> IndividualDescription:
    """Flatten an individual's neighbourhood into a tagged concept set.

    Direct (asserted) types of ``individual`` get an empty context; types of
    a successor reached through roles ``r1, r2`` get context ``"r1/r2"``.
    Links through ``exclude_roles`` and concepts under ``exclude_concepts``
    (by default the declared COVID-19 status answers) are skipped so the
    label being explained is not part of its own explanation.
    """
    if individual not in kb.abox.individuals:
        raise UnknownNameError(f"unknown individual {individual!r}")
    excluded_roles = set()
    for r in exclude_roles:
        if r in kb.tbox.role_parents:
            excluded_roles |= {s for s in kb.tbox.roles if r in kb.tbox.role_subsumers(s)}
    if exclude_concepts is None:
        exclude_concepts = [c for c in LABEL_CONCEPT_ROOTS if c in kb.tbox.concept_parents]
    banned = set()
    for c in exclude_concepts:
        banned |= kb.tbox.subsumees(c)

    types: dict[str, set] = {}
    for c, a in kb.abox.concept_assertions:
        types.setdefault(a, set()).add(c)
    succ: dict[str, list] = {}
    for r, a, b in sorted(kb.abox.role_assertions):
        succ.setdefault(a, []).append((r, b))

    out = set()
    seen = {individual}
    frontier = [(individual, "")]
    for depth in range(max_depth + 1):
        nxt = []
        for node, ctx in frontier:
            out.update(TaggedConcept(ctx, c) for c in types.get(node, ()) if c not in banned)
            if depth == max_depth:
                continue
            for r, b in succ.get(node, ()):
                if r in excluded_roles or b in seen:
                    continue
                seen.add(b)
                nxt.append((b, f"{ctx}/{r}" if ctx else r))
        frontier = nxt
    return IndividualDescription(individual, frozenset(out), predicted)


# --- predictors ----------------------------------------------------------------------

Predictor = Callable[[IndividualDescription], str]


@dataclass(frozen=True)
class TabularPredictor:
    """Rule-of-thumb scorer: positive once enough risk concepts are present.

    ``weights`` maps concept names to scores; a description's score sums the
    weights of every concept it holds up to subsumption (each weighted
    concept counted once). Positive when the score reaches ``threshold``.
    """

    tbox: TBox
    weights: Mapping[str, float] = field(default_factory=dict)
    threshold: float = 1.0

    def score(self, d: IndividualDescription) -> float:
        held = set()
        for c in d.concepts:
            held |= self.tbox.subsumers(c.concept)
        return float(sum(w for name, w in self.weights.items() if name in held))

    def __call__(self, d: IndividualDescription) -> str:
        return POSITIVE if self.score(d) >= self.threshold else NEGATIVE


class AudioModelPredictor:
    """Predictor backed by the CNN ensemble applied to an individual's recording.

    ``spectrogram_for`` returns the mel spectrogram of the recording linked
    to a description's individual; ``decide`` maps the ensemble's class
    probabilities to a predicted class.
    """

    def __init__(self, models, spectrogram_for: Callable[[str], object], decide: Callable[[np.ndarray], str], step: int = 1):
        from .classifier.inference import classify_recording

        self._classify = classify_recording
        self.models = list(models)
        self.spectrogram_for = spectrogram_for
        self.decide = decide
        self.step = step

    def __call__(self, d: IndividualDescription) -> str:
        probs = self._classify(self.models, self.spectrogram_for(d.individual), self.step)
        label = self.decide(probs)
        if label not in PREDICTED_CLASSES:
            raise ValueError(f"decision function returned {label!r}")
        return label


def explain_all(
    descriptions: Sequence[IndividualDescription],
    tbox,
    source_class: str = POSITIVE,
) -> tuple[list[CounterfactualResult], Optional[GlobalExplanation]]:
    """Nearest counterfactual for every ``source_class`` description, plus the global table."""
    sources = sorted((d for d in descriptions if d.predicted == source_class), key=lambda d: d.individual)
    pool = [d for d in descriptions if d.predicted != source_class]
    if not sources:
        return [], None
    costs = _costs(tbox)
    results = [nearest_counterfactual(d, pool, costs) for d in sources]
    return results, global_explanation(results)
