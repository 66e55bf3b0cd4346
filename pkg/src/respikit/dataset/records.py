"""Record types, directory loading and schema validation."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from . import schema as S

logger = logging.getLogger(__name__)

ERROR = "error"
WARNING = "warning"


class DatasetError(Exception):
    """Fatal problem reading the dataset (missing root, unparsable json)."""


class RecordParseError(DatasetError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
        self.reason = reason


@dataclass(frozen=True)
class Violation:
    field: str
    code: str
    message: str
    severity: str = ERROR
    expected: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "field": self.field,
            "code": self.code,
            "message": self.message,
            "severity": self.severity,
        }
        if self.expected is not None:
            out["expected"] = self.expected
        return out


@dataclass
class ValidationReport:
    participant_id: Optional[str] = None
    submission_id: Optional[str] = None
    file: Optional[str] = None
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == ERROR]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == WARNING]

    def add(self, violation: Violation) -> None:
        self.violations.append(violation)

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "submission_id": self.submission_id,
            "file": self.file,
            "violations": [v.to_dict() for v in self.violations],
        }


class _SchemaRecord:
    """Common behaviour of the json-backed records.

    Recognized keys live in ``values``; anything else is kept verbatim in
    ``extra`` so nothing is lost on a round trip.
    """

    SCHEMA: dict[str, S.FieldSpec] = {}

    def __init__(self, values: Optional[dict] = None, extra: Optional[dict] = None):
        self.values = dict(values or {})
        self.extra = dict(extra or {})

    @classmethod
    def from_json(cls, data: dict):
        values = {k: v for k, v in data.items() if k in cls.SCHEMA}
        extra = {k: v for k, v in data.items() if k not in cls.SCHEMA}
        return cls(values, extra)

    def to_json(self) -> dict:
        out = dict(self.values)
        out.update(self.extra)
        return out

    def get(self, name, default=None):
        value = self.values.get(name, default)
        return default if S.is_absent(value) else value

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.values == other.values
            and self.extra == other.extra
        )

    def __repr__(self):
        return f"{type(self).__name__}({self.values!r})"


class UserRecord(_SchemaRecord):
    """Contents of ``demographics_underlying_conditions.json``."""

    SCHEMA = S.USER_SCHEMA

    @property
    def participant_id(self) -> Optional[str]:
        return self.get("participantid")

    @property
    def sex(self) -> Optional[str]:
        return _decode(self.get("sex"), S.SEX_CODES)

    @property
    def age_category(self) -> Optional[str]:
        return _decode(self.get("age_category"), S.AGE_CODES)

    @property
    def bmi(self) -> Optional[float]:
        return self.get("bmi")

    @property
    def conditions(self) -> set[str]:
        """Names of the underlying conditions flagged true."""
        return {c for c in S.CONDITIONS if _truthy(self.get(c))}


class SubmissionRecord(_SchemaRecord):
    """Contents of ``main_questionnaire.json``."""

    SCHEMA = S.SUBMISSION_SCHEMA

    @property
    def participant_id(self) -> Optional[str]:
        return self.get("participantid")

    @property
    def submission_id(self) -> Optional[str]:
        return self.get("submissionid")

    @property
    def covid_status(self) -> Optional[str]:
        return self.get("covid_status")

    @property
    def vaccination_status(self) -> Optional[str]:
        return self.get("vaccination_status")

    @property
    def symptoms(self) -> set[str]:
        return {s for s in S.SYMPTOMS if _truthy(self.get(s))}

    @property
    def test_types(self) -> set[str]:
        return {t for t in ("pcr_test", "rapid_test", "self_test") if _truthy(self.get(t))}


class BreathingFeaturesRecord(_SchemaRecord):
    """Contents of ``breathing_features.json``."""

    SCHEMA = S.BREATHING_FEATURES_SCHEMA

    @property
    def rr(self):
        return self.get("RR")

    @property
    def i_e_ratio(self):
        return self.get("I_E_ratio")

    @property
    def fit(self):
        return self.get("FIT")

    @property
    def annotated_inhalation(self) -> list[tuple[float, float]]:
        return [tuple(p) for p in self.get("annotated_inhalation", [])]

    @property
    def annotated_exhalation(self) -> list[tuple[float, float]]:
        return [tuple(p) for p in self.get("annotated_exhalation", [])]


class ExpertAnnotation(_SchemaRecord):
    """One expert's answers for one campaign (breath, cough, speech, advice)."""

    def __init__(self, kind: str, values=None, extra=None):
        if kind not in S.EXPERT_SCHEMAS:
            raise ValueError(f"unknown expert campaign {kind!r}")
        self.kind = kind
        self.SCHEMA = S.EXPERT_SCHEMAS[kind]
        super().__init__(values, extra)

    @classmethod
    def from_json(cls, kind: str, data: dict) -> "ExpertAnnotation":
        schema = S.EXPERT_SCHEMAS[kind]
        values = {k: v for k, v in data.items() if k in schema}
        extra = {k: v for k, v in data.items() if k not in schema}
        return cls(kind, values, extra)

    def flagged(self) -> set[str]:
        """Boolean fields set to true."""
        return {
            k for k, spec in self.SCHEMA.items() if spec.kind == "bool" and _truthy(self.values.get(k))
        }

    def __eq__(self, other):
        return isinstance(other, ExpertAnnotation) and self.kind == other.kind and super().__eq__(other)


@dataclass
class Submission:
    """Everything found in one submission sub-directory.

    Optional files that are missing leave the matching attribute ``None``
    (expert annotations: absent key). A missing expert file means the
    submission was not labeled in that campaign.
    """

    submission_id: str
    path: str
    questionnaire: Optional[SubmissionRecord] = None
    breathing_features: Optional[BreathingFeaturesRecord] = None
    experts: dict[str, list[ExpertAnnotation]] = field(default_factory=dict)
    audio: dict[str, str] = field(default_factory=dict)
    unknown_files: list[str] = field(default_factory=list)

    def files_present(self) -> dict[str, bool]:
        present = set(os.listdir(self.path)) if os.path.isdir(self.path) else set()
        return {name: name in present for name in S.SUBMISSION_FILES}


@dataclass
class UserDirectory:
    participant_id: str
    path: str
    user: UserRecord
    submissions: list[Submission]
    report: ValidationReport
    unknown_files: list[str] = field(default_factory=list)


def _decode(value, table):
    if value is None:
        return None
    if isinstance(value, str) and value.isdigit():
        value = int(value)
    return table.get(value)


def _truthy(value) -> bool:
    return value is True or (isinstance(value, int) and not isinstance(value, bool) and value == 1)


def _read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise RecordParseError(path, f"malformed json ({exc.msg} at line {exc.lineno})") from exc
    except UnicodeDecodeError as exc:
        raise RecordParseError(path, "not UTF-8 text") from exc


def _read_object(path) -> dict:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise RecordParseError(path, "top-level json value must be an object")
    return data


def _read_experts(kind, path) -> list[ExpertAnnotation]:
    data = _read_json(path)
    items = data if isinstance(data, list) else [data]
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise RecordParseError(path, "expert annotation must be an object")
        out.append(ExpertAnnotation.from_json(kind, item))
    return out


def load_submission(path) -> Submission:
    path = os.fspath(path)
    sub = Submission(submission_id=os.path.basename(os.path.normpath(path)), path=path)
    names = sorted(os.listdir(path))
    known = set(S.SUBMISSION_FILES)
    for name in names:
        full = os.path.join(path, name)
        if name == S.QUESTIONNAIRE_FILE:
            sub.questionnaire = SubmissionRecord.from_json(_read_object(full))
        elif name == S.BREATHING_FEATURES_FILE:
            sub.breathing_features = BreathingFeaturesRecord.from_json(_read_object(full))
        elif name not in known:
            sub.unknown_files.append(name)
    for kind, fname in S.EXPERT_FILES.items():
        full = os.path.join(path, fname)
        if os.path.isfile(full):
            sub.experts[kind] = _read_experts(kind, full)
    for kind, fname in S.AUDIO_FILES.items():
        full = os.path.join(path, fname)
        if os.path.isfile(full):
            sub.audio[kind] = full
    return sub


def load_user_directory(path) -> UserDirectory:
    """Parse one user directory of the published layout.

    Parameters
    ----------
    path : path-like
        Directory named after the participant UUID and holding
        ``demographics_underlying_conditions.json`` plus one sub-directory
        per submission.

    Returns
    -------
    UserDirectory
        Parsed records. The attached report carries structural warnings
        only (non-UUID names, unknown files); call :func:`validate_directory`
        for field-level checks.

    Raises
    ------
    DatasetError
        If the directory or its demographics file is missing, or any json
        file is malformed.
    """
    path = os.fspath(path)
    if not os.path.isdir(path):
        raise DatasetError(f"{path}: not a directory")
    demo = os.path.join(path, S.DEMOGRAPHICS_FILE)
    if not os.path.isfile(demo):
        raise DatasetError(f"{path}: missing {S.DEMOGRAPHICS_FILE}")

    name = os.path.basename(os.path.normpath(path))
    report = ValidationReport(participant_id=name, file=S.DEMOGRAPHICS_FILE)
    if not S.is_uuid4(name):
        report.add(
            Violation("directory", "uuid", f"directory name {name!r} is not a UUID v4", WARNING)
        )
    user = UserRecord.from_json(_read_object(demo))

    submissions = []
    unknown = []
    for entry in sorted(os.listdir(path)):
        full = os.path.join(path, entry)
        if entry == S.DEMOGRAPHICS_FILE:
            continue
        if os.path.isdir(full):
            sub = load_submission(full)
            if not S.is_uuid4(entry):
                report.add(
                    Violation(
                        f"{entry}/", "uuid", f"submission directory {entry!r} is not a UUID v4", WARNING
                    )
                )
            for fname in sub.unknown_files:
                report.add(Violation(f"{entry}/{fname}", "unknown_file", "unrecognized file", WARNING))
            submissions.append(sub)
        else:
            unknown.append(entry)
            report.add(Violation(entry, "unknown_file", "unrecognized file", WARNING))
    return UserDirectory(name, path, user, submissions, report, unknown)


def _validate(record: _SchemaRecord, report: ValidationReport) -> ValidationReport:
    for name, spec in record.SCHEMA.items():
        problem = S.check_field(name, spec, record.values.get(name))
        if problem is not None:
            code, message = problem
            report.add(Violation(name, code, message, ERROR, _expected(spec)))
    for key in sorted(record.extra):
        report.add(Violation(key, "unknown_key", f"unrecognized key {key!r}", WARNING))
    return report


def _expected(spec: S.FieldSpec) -> Optional[str]:
    if spec.kind == "enum":
        return "{" + ", ".join(str(c) for c in spec.choices) + "}"
    if spec.kind in ("int", "float") and (spec.low is not None or spec.high is not None):
        return S._fmt_range(spec)
    if spec.kind == "date":
        return "yyyy-mm-dd"
    return spec.kind


def validate_user(record: UserRecord) -> ValidationReport:
    report = ValidationReport(participant_id=record.participant_id, file=S.DEMOGRAPHICS_FILE)
    return _validate(record, report)


def validate_submission(record: SubmissionRecord) -> ValidationReport:
    """Check every questionnaire field against its code set or range.

    Each out-of-domain field yields exactly one violation (range and enum
    breaches are errors, unknown keys warnings). The function is pure.

    Examples
    --------
    >>> rec = SubmissionRecord.from_json({
    ...     "participantid": "0b6ed2b2-8d2a-4ae1-9a69-5f6a2b9f1a20",
    ...     "submissionid": "5b2f7a4e-1c3d-4e5f-8a9b-0c1d2e3f4a5b",
    ...     "oxygenSaturation": 105})
    >>> [(v.field, v.code, v.expected) for v in validate_submission(rec).violations]
    [('oxygenSaturation', 'range', '[60, 99]')]
    """
    report = ValidationReport(
        participant_id=record.participant_id,
        submission_id=record.submission_id,
        file=S.QUESTIONNAIRE_FILE,
    )
    return _validate(record, report)


def validate_breathing_features(record: BreathingFeaturesRecord) -> ValidationReport:
    return _validate(record, ValidationReport(file=S.BREATHING_FEATURES_FILE))


def validate_expert(record: ExpertAnnotation) -> ValidationReport:
    report = ValidationReport(file=S.EXPERT_FILES[record.kind])
    extra = {k: v for k, v in record.extra.items() if k not in S.EXPERT_METADATA_KEYS}
    shadow = ExpertAnnotation(record.kind, record.values, extra)
    return _validate(shadow, report)


def validate_directory(udir: UserDirectory) -> list[ValidationReport]:
    """Structural report plus one field-level report per json file."""
    reports = [udir.report, validate_user(udir.user)]
    for sub in udir.submissions:
        locator = dict(participant_id=udir.participant_id, submission_id=sub.submission_id)
        if sub.questionnaire is None:
            rep = ValidationReport(file=S.QUESTIONNAIRE_FILE, **locator)
            rep.add(Violation(S.QUESTIONNAIRE_FILE, "missing", "questionnaire file absent", ERROR))
            reports.append(rep)
        else:
            rep = validate_submission(sub.questionnaire)
            rep.participant_id = rep.participant_id or udir.participant_id
            rep.submission_id = rep.submission_id or sub.submission_id
            reports.append(rep)
        if sub.breathing_features is not None:
            rep = validate_breathing_features(sub.breathing_features)
            rep.participant_id, rep.submission_id = locator.values()
            reports.append(rep)
        for kind, annotations in sub.experts.items():
            for ann in annotations:
                rep = validate_expert(ann)
                rep.participant_id, rep.submission_id = locator.values()
                reports.append(rep)
    return reports
