"""Turn ingested dataset records into ABox assertions.

Individuals are minted from participant and submission ids so the same
records always yield the same names. Each individual is typed with the most
specific concepts its record values map to; the generic base concept is
asserted only when no value maps to anything more specific.
"""

from __future__ import annotations

import os
import re
from typing import Iterable, Mapping, Optional, Sequence

from ..dataset import schema as S
from ..dataset.records import (
    ExpertAnnotation,
    Submission,
    SubmissionRecord,
    UserRecord,
    load_user_directory,
)
from .model import ABox, KnowledgeBase, KnowledgeBaseError
from .ontology import Ontology, load_ontology


class MappingError(KnowledgeBaseError):
    """A record value has no entry in the mapping tables."""

    def __init__(self, field: str, value):
        self.field = field
        self.value = value
        super().__init__(f"no concept mapping for {field}={value!r}")


_UNSAFE = re.compile(r"[^A-Za-z0-9_.\-]")


def _safe(token) -> str:
    return _UNSAFE.sub("_", str(token))


def user_name(participant_id: str) -> str:
    return f"user_{_safe(participant_id)}"


def instance_name(submission_id: str) -> str:
    return f"instance_{_safe(submission_id)}"


class _Builder:
    def __init__(self, onto: Ontology):
        self.onto = onto
        self.types: set = set()
        self.links: set = set()
        self.named: set = set()

    def individual(self, name: str, concepts: Iterable[str], base: str) -> str:
        concepts = set(concepts)
        self.named.add(name)
        for c in concepts or {base}:
            self.types.add((c, name))
        return name

    def link(self, role: str, a: str, b: str) -> None:
        self.links.add((role, a, b))

    def abox(self) -> ABox:
        return ABox(frozenset(self.types), frozenset(self.links), frozenset(self.named))


def _enum_concept(table: Mapping, field: str, value) -> Optional[str]:
    key = S.normalize_text(str(value))
    if key not in table:
        raise MappingError(field, value)
    return table[key]


def _user_concepts(onto: Ontology, user: UserRecord) -> set:
    maps = onto.mappings["user"]
    out = set()
    for field, decoded in (("sex", user.sex), ("age_category", user.age_category)):
        raw = user.get(field)
        if S.is_absent(raw):
            continue
        if decoded is None:
            raise MappingError(field, raw)
        out.add(_enum_concept(maps[field], field, decoded))
    return out


def _instance_concepts(onto: Ontology, record: SubmissionRecord) -> set:
    maps = onto.mappings["submission"]
    out = set()
    for field, table in maps["enums"].items():
        raw = record.get(field)
        if S.is_absent(raw):
            continue
        c = _enum_concept(table, field, raw)
        if c:
            out.add(c)
    for field, concept in maps["flags"].items():
        if record.get(field) is True or record.get(field) == 1:
            out.add(concept)
    return out


def _expert_concepts(onto: Ontology, ann: ExpertAnnotation) -> set:
    spec = onto.mappings["experts"][ann.kind]
    out = set()
    for field, table in spec.get("enums", {}).items():
        raw = ann.values.get(field)
        if S.is_absent(raw):
            continue
        c = _enum_concept(table, f"{ann.kind}.{field}", raw)
        if c:
            out.add(c)
    for field in sorted(ann.flagged()):
        if field not in spec["flags"]:
            raise MappingError(f"{ann.kind}.{field}", True)
        out.add(spec["flags"][field])
    return out


def assert_records(
    user: UserRecord,
    submissions: Sequence = (),
    experts: Optional[Mapping[str, Mapping[str, list]]] = None,
    ontology: Optional[Ontology] = None,
    audio: Optional[Mapping[str, Iterable[str]]] = None,
) -> ABox:
    """Assertions for one participant and their questionnaires.

    Parameters
    ----------
    user : UserRecord
    submissions : sequence of Submission or SubmissionRecord
        Loaded submission directories carry their own expert annotations
        and audio files; bare records take them from ``experts`` / ``audio``.
    experts : mapping, optional
        ``submission id -> {campaign: [ExpertAnnotation, ...]}``.
    audio : mapping, optional
        ``submission id -> audio kinds present`` (``cough``, ``breath_deep``,
        ``breath_regular``, ``voice``).

    Raises
    ------
    MappingError
        If a record value has no concept in the mapping tables; the message
        names the field.
    """
    onto = ontology or load_ontology()
    tb = onto.tbox
    pid = user.participant_id
    if not pid:
        raise KnowledgeBaseError("user record has no participantid")
    b = _Builder(onto)
    u = b.individual(user_name(pid), _user_concepts(onto, user), "User")

    cond_map = onto.mappings["user"]["conditions"]
    for cond in sorted(user.conditions):
        c = b.individual(f"condition_{_safe(pid)}_{cond}", {cond_map[cond]}, "PreexistingCondition")
        b.link("hasPreexistingCondition", u, c)

    experts = experts or {}
    audio = audio or {}
    sub_maps = onto.mappings["submission"]
    for item in submissions:
        if isinstance(item, Submission):
            record, sid = item.questionnaire, item.submission_id
            sub_experts, sub_audio = item.experts, set(item.audio)
        else:
            record, sid = item, item.submission_id
            sub_experts, sub_audio = experts.get(sid, {}), set(audio.get(sid, ()))
        if record is None:
            continue
        sid = record.submission_id or sid
        q = b.individual(instance_name(sid), _instance_concepts(onto, record), "UserInstance")
        b.link("hasUserInstance", u, q)

        for sym in sorted(record.symptoms):
            s = b.individual(f"symptom_{_safe(sid)}_{sym}", {sub_maps["symptoms"][sym]}, "Symptom")
            b.link("hasSymptom", q, s)

        outcome = record.covid_status if record.covid_status in ("positive", "negative") else None
        tests = sorted(record.test_types)
        for t in tests:
            spec = sub_maps["tests"][t]
            name = b.individual(f"test_{_safe(sid)}_{t}", {spec[outcome]} if outcome else {spec["base"]}, "CovidTest")
            b.link("hasCovidTest", q, name)
        if outcome and not tests:
            name = b.individual(f"test_{_safe(sid)}", {sub_maps["untyped_test"][outcome]}, "CovidTest")
            b.link("hasCovidTest", q, name)

        audio_maps = onto.mappings["audio"]
        kinds = set(sub_audio)
        for campaign, anns in sub_experts.items():
            if campaign in onto.mappings["ignored_expert_campaigns"] or not anns:
                continue
            if campaign not in onto.mappings["experts"]:
                raise MappingError("expert campaign", campaign)
            kinds.add(onto.mappings["experts"][campaign]["audio"])
        audio_names = {}
        for kind in sorted(kinds):
            if kind not in audio_maps:
                raise MappingError("audio kind", kind)
            a = b.individual(f"audio_{_safe(sid)}_{kind}", {audio_maps[kind]["concept"]}, "Audio")
            b.link(audio_maps[kind]["role"], q, a)
            audio_names[kind] = a

        for campaign in sorted(sub_experts):
            if campaign in onto.mappings["ignored_expert_campaigns"]:
                continue
            target = audio_names[onto.mappings["experts"][campaign]["audio"]]
            for i, ann in enumerate(sub_experts[campaign]):
                x = b.individual(f"char_{_safe(sid)}_{campaign}_{i}", _expert_concepts(onto, ann), "Characterization")
                b.link("hasCharacterization", target, x)
                annotator = ann.extra.get("annotator_id")
                if not S.is_absent(annotator):
                    h = b.individual(f"expert_{_safe(annotator)}", (), "HealthcareProfessional")
                    b.link("characterizedBy", x, h)

    abox = b.abox()
    KnowledgeBase(tb, abox)  # name resolution check
    return abox


def assert_dataset(root, ontology: Optional[Ontology] = None) -> KnowledgeBase:
    """Load every user directory under ``root`` and assert it into one KB."""
    onto = ontology or load_ontology()
    root = os.fspath(root)
    abox = ABox()
    for entry in sorted(os.listdir(root)):
        full = os.path.join(root, entry)
        if not os.path.isdir(full):
            continue
        d = load_user_directory(full)
        abox = abox.merged(assert_records(d.user, d.submissions, ontology=onto))
    return KnowledgeBase(onto.tbox, abox)
