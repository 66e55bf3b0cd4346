"""Dataset-wide scanning and descriptive statistics."""

from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import schema as S
from .records import DatasetError, load_user_directory

logger = logging.getLogger(__name__)

UNKNOWN = "unknown"


@dataclass(frozen=True)
class DatasetIndex:
    """Counts, file presence and tallies for one dataset root.

    Demographic tallies (sex, age, conditions) are per user; everything
    built from the questionnaire is per submission.
    """

    root: str
    users: int
    submissions: int
    presence: dict = field(default_factory=dict)
    unreadable: tuple = ()
    unknown_entries: tuple = ()
    sex: Counter = field(default_factory=Counter)
    age: Counter = field(default_factory=Counter)
    conditions: Counter = field(default_factory=Counter)
    users_with_condition: int = 0
    covid_status: Counter = field(default_factory=Counter)
    test_types: Counter = field(default_factory=Counter)
    vaccination: Counter = field(default_factory=Counter)
    symptoms: Counter = field(default_factory=Counter)
    submissions_with_symptom: int = 0
    symptoms_by_vaccination: dict = field(default_factory=dict)
    covid_by_vaccination: dict = field(default_factory=dict)
    vaccination_by_anxiety: dict = field(default_factory=dict)
    oxygen_by_age: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "users": self.users,
            "submissions": self.submissions,
            "presence": self.presence,
            "unreadable": [list(u) for u in self.unreadable],
            "unknown_entries": list(self.unknown_entries),
            "tallies": {
                "sex": dict(self.sex),
                "age": dict(self.age),
                "conditions": dict(self.conditions),
                "users_with_condition": self.users_with_condition,
                "covid_status": dict(self.covid_status),
                "test_types": dict(self.test_types),
                "vaccination": dict(self.vaccination),
                "symptoms": dict(self.symptoms),
                "submissions_with_symptom": self.submissions_with_symptom,
            },
        }


def scan_dataset(root) -> DatasetIndex:
    """Index every user directory under ``root``.

    Entries that fail to parse are listed in ``unreadable`` (path, reason)
    and excluded from the tallies; files and folders that do not match the
    layout are listed in ``unknown_entries``.

    Raises
    ------
    DatasetError
        If ``root`` is not a readable directory.
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise DatasetError(f"{root}: dataset root does not exist")

    n_users = n_subs = 0
    presence = {}
    unreadable, unknown = [], []
    sex, age, conditions = Counter(), Counter(), Counter()
    covid, tests, vacc, symptoms = Counter(), Counter(), Counter(), Counter()
    sym_by_vacc, covid_by_vacc, vacc_by_anx = {}, {}, {}
    oxygen = {}
    with_condition = with_symptom = 0

    for entry in sorted(os.listdir(root)):
        full = os.path.join(root, entry)
        if not os.path.isdir(full) or not os.path.isfile(os.path.join(full, S.DEMOGRAPHICS_FILE)):
            unknown.append(entry)
            continue
        try:
            udir = load_user_directory(full)
        except DatasetError as exc:
            unreadable.append((entry, str(exc)))
            continue
        n_users += 1
        user = udir.user
        age_label = user.age_category or UNKNOWN
        sex[user.sex or UNKNOWN] += 1
        age[age_label] += 1
        conds = user.conditions
        conditions.update(conds)
        with_condition += bool(conds)
        for fname in udir.unknown_files:
            unknown.append(f"{entry}/{fname}")

        for sub in udir.submissions:
            n_subs += 1
            presence[f"{entry}/{sub.submission_id}"] = sub.files_present()
            for fname in sub.unknown_files:
                unknown.append(f"{entry}/{sub.submission_id}/{fname}")
            q = sub.questionnaire
            if q is None:
                q_status = q_vacc = q_anx = UNKNOWN
                syms, types, ox = set(), set(), None
            else:
                q_status = q.covid_status or UNKNOWN
                q_vacc = q.vaccination_status or UNKNOWN
                q_anx = str(q.get("anxiety")) if q.get("anxiety") is not None else UNKNOWN
                syms, types, ox = q.symptoms, q.test_types, q.get("oxygenSaturation")
            covid[q_status] += 1
            vacc[q_vacc] += 1
            tests.update(types)
            symptoms.update(syms)
            with_symptom += bool(syms)
            sym_by_vacc.setdefault(q_vacc, Counter())["_total"] += 1
            sym_by_vacc[q_vacc].update(syms)
            covid_by_vacc.setdefault(q_vacc, Counter())[q_status] += 1
            vacc_by_anx.setdefault(q_anx, Counter())[q_vacc] += 1
            if isinstance(ox, (int, float)) and not isinstance(ox, bool):
                oxygen.setdefault(age_label, []).append(float(ox))

    logger.info("scanned %s: %d users, %d submissions", root, n_users, n_subs)
    return DatasetIndex(
        root=root,
        users=n_users,
        submissions=n_subs,
        presence=presence,
        unreadable=tuple(unreadable),
        unknown_entries=tuple(unknown),
        sex=sex,
        age=age,
        conditions=conditions,
        users_with_condition=with_condition,
        covid_status=covid,
        test_types=tests,
        vaccination=vacc,
        symptoms=symptoms,
        submissions_with_symptom=with_symptom,
        symptoms_by_vaccination=sym_by_vacc,
        covid_by_vaccination=covid_by_vacc,
        vaccination_by_anxiety=vacc_by_anx,
        oxygen_by_age={k: tuple(v) for k, v in oxygen.items()},
    )


@dataclass(frozen=True)
class SummaryStats:
    """Proportions derived from a :class:`DatasetIndex`.

    ``groupings`` holds distributions that sum to one; ``shares`` holds
    stand-alone proportions (a user may report several conditions).
    """

    users: int
    submissions: int
    groupings: dict
    shares: dict
    oxygen_quartiles_by_age: dict

    def to_dict(self) -> dict:
        return {
            "users": self.users,
            "submissions": self.submissions,
            "groupings": self.groupings,
            "shares": self.shares,
            "oxygen_quartiles_by_age": self.oxygen_quartiles_by_age,
        }

    def rows(self):
        """Flat ``(table, group, key, value)`` rows for delimiter-separated output."""
        for name, dist in sorted(self.groupings.items()):
            if dist and isinstance(next(iter(dist.values())), dict):
                for group, inner in sorted(dist.items()):
                    for key, value in sorted(inner.items()):
                        yield name, group, key, value
            else:
                for key, value in sorted(dist.items()):
                    yield name, "", key, value
        for name, dist in sorted(self.shares.items()):
            if isinstance(dist, dict):
                for group, inner in sorted(dist.items()):
                    if isinstance(inner, dict):
                        for key, value in sorted(inner.items()):
                            yield name, group, key, value
                    else:
                        yield name, "", group, inner
            else:
                yield name, "", "", dist


def _distribution(counter) -> dict:
    total = sum(counter.values())
    return {str(k): v / total for k, v in sorted(counter.items(), key=lambda kv: str(kv[0]))}


def summary_stats(index: DatasetIndex) -> SummaryStats:
    """Proportions by sex, age, test status and type, conditions and symptoms.

    Raises
    ------
    ValueError
        If the index holds no users or no submissions.
    """
    if index.users == 0 or index.submissions == 0:
        raise ValueError("summary statistics need at least one user and one submission")

    subs = index.submissions
    groupings = {
        "sex": _distribution(index.sex),
        "age": _distribution(index.age),
        "covid_status": _distribution(index.covid_status),
        "vaccination_status": _distribution(index.vaccination),
        "covid_status_by_vaccination": {
            v: _distribution(c) for v, c in sorted(index.covid_by_vaccination.items())
        },
        "vaccination_by_anxiety": {
            a: _distribution(c) for a, c in sorted(index.vaccination_by_anxiety.items())
        },
    }
    tested = index.covid_status.get("positive", 0) + index.covid_status.get("negative", 0)
    symptoms_by_vacc = {}
    for vacc, counter in sorted(index.symptoms_by_vaccination.items()):
        total = counter["_total"]
        symptoms_by_vacc[vacc] = {s: counter.get(s, 0) / total for s in S.SYMPTOMS}
    shares = {
        "with_test_result": tested / subs,
        "test_type": {t: index.test_types.get(t, 0) / subs for t in ("pcr_test", "rapid_test", "self_test")},
        "conditions": {c: index.conditions.get(c, 0) / index.users for c in S.CONDITIONS},
        "users_with_condition": index.users_with_condition / index.users,
        "symptoms": {s: index.symptoms.get(s, 0) / subs for s in S.SYMPTOMS},
        "submissions_with_symptom": index.submissions_with_symptom / subs,
        "symptoms_by_vaccination": symptoms_by_vacc,
    }
    quartiles = {}
    for age_label, values in sorted(index.oxygen_by_age.items()):
        q1, q2, q3 = np.percentile(np.asarray(values), [25, 50, 75])
        quartiles[age_label] = {"q1": float(q1), "median": float(q2), "q3": float(q3), "n": len(values)}
    return SummaryStats(index.users, subs, groupings, shares, quartiles)
