"""Field schemas for the per-user and per-submission json records.

Each schema is an ordered mapping ``field name -> FieldSpec``. Validation is
driven entirely by these tables so the record classes stay thin.
"""

from __future__ import annotations

import datetime as _dt
import re
import uuid
from dataclasses import dataclass
from typing import Any, Optional

# file names of the published directory layout
DEMOGRAPHICS_FILE = "demographics_underlying_conditions.json"
QUESTIONNAIRE_FILE = "main_questionnaire.json"
BREATHING_FEATURES_FILE = "breathing_features.json"
EXPERT_FILES = {
    "breath": "experts.breath.json",
    "cough": "experts.cough.json",
    "speech": "experts.speech.json",
    "medical_advice": "experts.medical_advice.json",
}
AUDIO_FILES = {
    "cough": "audio.cough.mp3",
    "breath_deep": "audio.breath_deep.mp3",
    "breath_regular": "audio.breath_regular.mp3",
}
SUBMISSION_FILES = (
    QUESTIONNAIRE_FILE,
    BREATHING_FEATURES_FILE,
    *EXPERT_FILES.values(),
    *AUDIO_FILES.values(),
)

SEX_CODES = {0: "male", 1: "female", 2: "other"}
AGE_CODES = {
    0: "18-29",
    1: "30-39",
    2: "40-49",
    3: "50-59",
    4: "60-69",
    5: "70-79",
    6: "80+",
}

CONDITIONS = (
    "asthma",
    "respiratory_deficiency",
    "cystic_fibrosis",
    "pneum_other",
    "coronary_disease",
    "hypertension",
    "valve_disease",
    "heart_attack",
    "stroke",
    "cardiovascular_other",
    "diabetes",
    "kidney_disease",
    "transplant",
    "cancer",
    "immunosuppression_immunodeficiency",
)

SYMPTOMS = (
    "sore_throat",
    "dry_cough",
    "wet_cough",
    "sputum",
    "runny_nose",
    "breath_discomfort",
    "has_fever",
    "tremble",
    "fatigue",
    "headache",
    "dizziness",
    "myalgias_arthralgias",
    "taste_smell_loss",
    "diarrhea_upset_stomach",
    "sneezing",
    "dry_throat",
)

DIFFICULTIES = (
    "leave_bed",
    "leave_home",
    "prepare_meal",
    "concentrate",
    "self_care",
    "other_difficulty",
)

COVID_STATUS = ("positive", "negative", "no")
VACCINATION_STATUS = ("no", "partially", "fully", "booster1", "booster2")
HOSPITALIZATION = ("0", "1", "2", "3")
EXPOSURE = ("No", "Maybe", "Yes")
BINARY_CODES = ("0", "1")
SMOKING = ("nev", "ex", "yes")
CIGARETTES = ("1u", "10u", "20u", "20o")
ANXIETY = ("0", "1", "2", "3", "4")
WORKING = ("home", "hospital", "store", "social", "no")

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


@dataclass(frozen=True)
class FieldSpec:
    """Domain of one json field.

    ``kind`` is one of ``uuid``, ``bool``, ``int``, ``float``, ``enum``,
    ``date``, ``str`` or ``intervals``. ``low``/``high`` bound numeric kinds
    (inclusive, ``None`` = unbounded); ``choices`` lists enum codes.
    """

    kind: str
    low: Optional[float] = None
    high: Optional[float] = None
    choices: tuple = ()
    required: bool = False


def _bools(names):
    return {name: FieldSpec("bool") for name in names}


USER_SCHEMA: dict[str, FieldSpec] = {
    "participantid": FieldSpec("uuid", required=True),
    "sex": FieldSpec("enum", choices=tuple(SEX_CODES)),
    "age_category": FieldSpec("enum", choices=tuple(AGE_CODES)),
    "bmi": FieldSpec("float", low=0.0),
    **_bools(CONDITIONS),
    "registration_timestamp": FieldSpec("str"),
}

SUBMISSION_SCHEMA: dict[str, FieldSpec] = {
    "participantid": FieldSpec("uuid", required=True),
    "submissionid": FieldSpec("uuid", required=True),
    "covid_status": FieldSpec("enum", choices=COVID_STATUS),
    **_bools(("pcr_test", "rapid_test", "self_test", "test_last_3_days")),
    "last_negative_test_date": FieldSpec("date"),
    "first_positive_test_date": FieldSpec("date"),
    "vaccination_status": FieldSpec("enum", choices=VACCINATION_STATUS),
    "latest_vaccination_date": FieldSpec("date"),
    "hospitalization": FieldSpec("enum", choices=HOSPITALIZATION),
    "exposure_to_someone_with_covid": FieldSpec("enum", choices=EXPOSURE),
    "travelled_abroad": FieldSpec("enum", choices=BINARY_CODES),
    "submission_timestamp": FieldSpec("str"),
    **_bools(SYMPTOMS),
    "oxymeter": FieldSpec("bool"),
    "oxygenSaturation": FieldSpec("int", low=60, high=99),
    "bpm": FieldSpec("int", low=30, high=250),
    "blood_pressure_meter": FieldSpec("bool"),
    "systolic_pressure": FieldSpec("int", low=30, high=260),
    "diastolic_pressure": FieldSpec("int", low=30, high=260),
    "breath_holding": FieldSpec("int", low=0),
    **_bools(DIFFICULTIES),
    "smoking": FieldSpec("enum", choices=SMOKING),
    "years_of_quitting_smoking": FieldSpec("int", low=0),
    "years_of_smoking": FieldSpec("int", low=0),
    "no_cigarettes": FieldSpec("enum", choices=CIGARETTES),
    "vaping": FieldSpec("enum", choices=BINARY_CODES),
    "anxiety": FieldSpec("enum", choices=ANXIETY),
    "working": FieldSpec("enum", choices=WORKING),
}

BREATHING_FEATURES_SCHEMA: dict[str, FieldSpec] = {
    "RR": FieldSpec("float", low=0.0),
    "I_E_ratio": FieldSpec("float", low=0.0),
    "FIT": FieldSpec("float", low=0.0),
    "annotated_inhalation": FieldSpec("intervals"),
    "annotated_exhalation": FieldSpec("intervals"),
}

BREATH_ABNORMALITIES = (
    "dyspnea_shortness_of_breath",
    "stridor",
    "inspiratory_stridor",
    "expiratory_stridor",
    "wheezing",
    "respiratory_crackles",
    "prolonged_expiration",
    "other_and_unspecified_abnormalities_of_breathing",
    "audible_choking",
    "audible_nasal_congestion",
    "no_audible_abnormalities",
)
COUGH_TYPES = (
    "productive",
    "dry",
    "barking_cough",
    "hacking_cough",
    "croupy_cough",
    "other_specified_cough",
    "can't_tell",
)
COUGH_ABNORMALITIES = (
    "audible_dyspnea",
    "audible_wheezing",
    "audible_stridor",
    "audible_choking",
    "audible_nasal_congestion",
    "nothing_specific",
)
VOICE_ABNORMALITIES = (
    "audible_dyspnea",
    "audible_wheezing",
    "audible_stridor",
    "audible_choking",
    "audible_nasal_congestion",
    "no_audible_abnormalities",
)
MEDICAL_ADVICE = (
    "Seek for medical advice",
    "Repeat the Smarty4Covid test in 24 hours",
    "In case you notice changes in your health status, repeat the Smarty4Covid test",
)

EXPERT_SCHEMAS: dict[str, dict[str, FieldSpec]] = {
    "breath": {
        "breath_depth": FieldSpec(
            "enum",
            choices=("Can breathe deeply enough", "Cannot breathe deeply enough"),
        ),
        **_bools(BREATH_ABNORMALITIES),
    },
    "cough": {
        "sex": FieldSpec("enum", choices=("Male", "Female", "Can't tell")),
        "patient_has": FieldSpec(
            "enum",
            choices=(
                "An upper respiratory tract infection",
                "A lower respiratory tract infection",
                "Obstructive lung disease (Asthma, COPD, ...)",
                "Nothing (healthy cough)",
            ),
        ),
        "cough_is": FieldSpec(
            "enum",
            choices=(
                "Pseudo cough/Healthy cough",
                "Mild (from a sick person)",
                "Severe (from a sick person)",
                "Can't tell",
            ),
        ),
        **_bools(COUGH_TYPES),
        **_bools(COUGH_ABNORMALITIES),
    },
    "speech": {
        "completion": FieldSpec("enum", choices=("Yes", "No")),
        "hoarseness": FieldSpec("enum", choices=("Yes", "No")),
        "volume": FieldSpec("enum", choices=("Low (whisper)", "Normal")),
        **_bools(VOICE_ABNORMALITIES),
    },
    "medical_advice": {
        "advice": FieldSpec("enum", choices=MEDICAL_ADVICE),
        "confidence": FieldSpec("int", low=1, high=10),
    },
}

# keys tolerated in expert files besides the annotation fields
EXPERT_METADATA_KEYS = ("participantid", "submissionid", "annotator_id")


def normalize_text(value: str) -> str:
    # typographic apostrophes appear in some exports
    return value.replace("’", "'").replace("‘", "'")


def is_uuid4(value: Any) -> bool:
    if not isinstance(value, str):
        return False
    try:
        parsed = uuid.UUID(value)
    except ValueError:
        return False
    return parsed.version == 4 and str(parsed) == value.lower()


def parse_date(value: Any) -> Optional[_dt.date]:
    """Strict ``yyyy-mm-dd`` parse; returns None when the shape is wrong."""
    if not isinstance(value, str) or not _DATE_RE.match(value):
        return None
    try:
        return _dt.datetime.strptime(value, "%Y-%m-%d").date()
    except ValueError:
        return None


def is_absent(value: Any) -> bool:
    return value is None or value == ""


def check_field(name: str, spec: FieldSpec, value: Any) -> Optional[tuple[str, str]]:
    """Return ``(code, message)`` if ``value`` is outside the field domain.

    Absent values (None / empty string) are legal for optional fields.
    """
    if is_absent(value):
        if spec.required:
            return "missing", f"{name} is required"
        return None

    kind = spec.kind
    if kind == "uuid":
        if not isinstance(value, str):
            return "type", f"{name} must be a UUID string"
        try:
            uuid.UUID(value)
        except ValueError:
            return "uuid", f"{name}={value!r} is not a UUID"
        return None

    if kind == "bool":
        if isinstance(value, bool) or (isinstance(value, int) and value in (0, 1)):
            return None
        return "type", f"{name}={value!r} is not a boolean"

    if kind in ("int", "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return "type", f"{name}={value!r} is not numeric"
        if kind == "int" and isinstance(value, float) and not value.is_integer():
            return "type", f"{name}={value!r} is not an integer"
        if value != value:
            return "type", f"{name} is NaN"
        if (spec.low is not None and value < spec.low) or (
            spec.high is not None and value > spec.high
        ):
            return "range", f"{name}={value!r} outside {_fmt_range(spec)}"
        return None

    if kind == "enum":
        if _enum_member(value, spec.choices):
            return None
        return "enum", f"{name}={value!r} not in {list(spec.choices)}"

    if kind == "date":
        if parse_date(value) is None:
            return "date", f"{name}={value!r} is not yyyy-mm-dd"
        return None

    if kind == "str":
        if not isinstance(value, str):
            return "type", f"{name}={value!r} is not a string"
        return None

    if kind == "intervals":
        return _check_intervals(name, value)

    raise ValueError(f"unknown field kind {kind!r}")


def _enum_member(value: Any, choices: tuple) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, str):
        value = normalize_text(value)
    if value in choices:
        return True
    # digit-string codes are also accepted as integers, and vice versa
    if isinstance(value, int) and str(value) in choices:
        return True
    if isinstance(value, str) and value.isdigit() and int(value) in choices:
        return True
    return False


def _check_intervals(name, value):
    if not isinstance(value, (list, tuple)):
        return "type", f"{name} must be a list of (start, end) pairs"
    for i, pair in enumerate(value):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            return "type", f"{name}[{i}] is not a (start, end) pair"
        start, end = pair
        if not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in pair
        ):
            return "type", f"{name}[{i}] has non-numeric times"
        if start < 0 or not start < end:
            return "range", f"{name}[{i}]=({start}, {end}) needs 0 <= start < end"
    return None


def _fmt_range(spec: FieldSpec) -> str:
    low = "-inf" if spec.low is None else spec.low
    high = "inf" if spec.high is None else spec.high
    return f"[{low}, {high}]"
