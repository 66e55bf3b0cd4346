import json
import os

import pytest
from helpers import (
    SUB_A,
    SUB_B1,
    USER_A,
    USER_B,
    demographics,
    full_questionnaire,
    write_conforming_tree,
    write_json,
    write_user,
)
from hypothesis import given, settings
from hypothesis import strategies as st

from respikit.dataset import (
    BreathingFeaturesRecord,
    DatasetError,
    ExpertAnnotation,
    RecordParseError,
    SubmissionRecord,
    UserRecord,
    load_user_directory,
    scan_dataset,
    summary_stats,
    validate_breathing_features,
    validate_directory,
    validate_expert,
    validate_submission,
    validate_user,
)
from respikit.dataset import schema as S


def test_load_user_with_one_submission(tmp_path):
    write_user(tmp_path, USER_A, demographics(USER_A, asthma=True), {SUB_A: {"questionnaire": full_questionnaire(USER_A, SUB_A)}})
    d = load_user_directory(tmp_path / USER_A)
    assert d.user.sex == "female"
    assert d.user.age_category == "18-29"
    assert d.user.conditions == {"asthma"}
    assert d.user.bmi == 22.5
    assert len(d.submissions) == 1
    assert d.submissions[0].questionnaire.submission_id == SUB_A
    assert d.report.ok


def test_user_without_submissions(tmp_path):
    write_user(tmp_path, USER_A)
    d = load_user_directory(tmp_path / USER_A)
    assert d.submissions == []


def test_cough_audio_only(tmp_path):
    write_user(tmp_path, USER_A, submissions={SUB_A: {"files": ["audio.cough.mp3"]}})
    sub = load_user_directory(tmp_path / USER_A).submissions[0]
    assert set(sub.audio) == {"cough"}
    assert sub.questionnaire is None and sub.breathing_features is None and sub.experts == {}
    present = sub.files_present()
    assert present["audio.cough.mp3"] and not present["audio.breath_deep.mp3"]


def test_malformed_json_names_the_file(tmp_path):
    udir = write_user(tmp_path, USER_A)
    with open(os.path.join(udir, S.DEMOGRAPHICS_FILE), "w") as fh:
        fh.write("{not json")
    with pytest.raises(RecordParseError) as err:
        load_user_directory(udir)
    assert S.DEMOGRAPHICS_FILE in str(err.value)


def test_non_uuid_directory_is_a_warning(tmp_path):
    write_user(tmp_path, "not-a-uuid", demographics(USER_A))
    d = load_user_directory(tmp_path / "not-a-uuid")
    assert d.report.errors == []
    assert [v.code for v in d.report.warnings] == ["uuid"]


def test_missing_directory_or_demographics(tmp_path):
    with pytest.raises(DatasetError):
        load_user_directory(tmp_path / "nope")
    (tmp_path / "empty").mkdir()
    with pytest.raises(DatasetError):
        load_user_directory(tmp_path / "empty")


# --- validation -------------------------------------------------------------------


def test_out_of_range_oxygen():
    rec = SubmissionRecord.from_json(full_questionnaire(USER_A, SUB_A, oxygenSaturation=105))
    rep = validate_submission(rec)
    assert len(rep.violations) == 1
    v = rep.violations[0]
    assert (v.field, v.code, v.expected, v.severity) == ("oxygenSaturation", "range", "[60, 99]", "error")


def test_bad_enum_vaccination():
    rep = validate_submission(SubmissionRecord.from_json(full_questionnaire(USER_A, SUB_A, vaccination_status="booster3")))
    assert [(v.field, v.code) for v in rep.violations] == [("vaccination_status", "enum")]


def test_conforming_record_is_clean():
    rec = SubmissionRecord.from_json(full_questionnaire(USER_A, SUB_A))
    assert validate_submission(rec).violations == []
    assert validate_user(UserRecord.from_json(demographics(USER_A))).violations == []


@pytest.mark.parametrize(
    "field,value,code",
    [
        ("bpm", 20, "range"),
        ("systolic_pressure", 300, "range"),
        ("breath_holding", -1, "range"),
        ("hospitalization", "4", "enum"),
        ("working", "office", "enum"),
        ("smoking", "sometimes", "enum"),
        ("last_negative_test_date", "01/06/2021", "date"),
        ("latest_vaccination_date", "2021-13-01", "date"),
        ("covid_status", "maybe", "enum"),
    ],
)
def test_each_breach_is_exactly_one_violation(field, value, code):
    rep = validate_submission(SubmissionRecord.from_json(full_questionnaire(USER_A, SUB_A, **{field: value})))
    assert [(v.field, v.code) for v in rep.violations] == [(field, code)]


def test_unknown_key_is_warning_and_preserved():
    data = full_questionnaire(USER_A, SUB_A, new_field=3)
    rec = SubmissionRecord.from_json(data)
    rep = validate_submission(rec)
    assert rep.errors == [] and [v.code for v in rep.warnings] == ["unknown_key"]
    assert rec.to_json() == data


def test_absent_vitals_are_not_zero():
    data = full_questionnaire(USER_A, SUB_A, oxymeter=False)
    del data["oxygenSaturation"]
    rec = SubmissionRecord.from_json(data)
    assert rec.get("oxygenSaturation") is None
    assert validate_submission(rec).ok


def test_user_schema_breaches():
    bad = UserRecord.from_json(demographics("xyz", bmi=-1.0, age_category=9))
    codes = sorted((v.field, v.code) for v in validate_user(bad).violations)
    assert codes == [("age_category", "enum"), ("bmi", "range"), ("participantid", "uuid")]


def test_breathing_features_intervals():
    good = BreathingFeaturesRecord.from_json({"RR": 18.0, "I_E_ratio": 0.5, "FIT": 0.33, "annotated_inhalation": [[0.1, 0.9]], "annotated_exhalation": [[1.0, 2.5]]})
    assert validate_breathing_features(good).ok
    assert good.annotated_inhalation == [(0.1, 0.9)]
    bad = BreathingFeaturesRecord.from_json({"annotated_inhalation": [[0.9, 0.1]]})
    assert [v.field for v in validate_breathing_features(bad).violations] == ["annotated_inhalation"]


def test_expert_confidence_and_enums():
    ok = ExpertAnnotation.from_json("medical_advice", {"advice": S.MEDICAL_ADVICE[0], "confidence": 7, "annotator_id": "e1"})
    assert validate_expert(ok).violations == []
    bad = ExpertAnnotation.from_json("medical_advice", {"advice": S.MEDICAL_ADVICE[0], "confidence": 11})
    assert [v.code for v in validate_expert(bad).violations] == ["range"]
    enum = ExpertAnnotation.from_json("breath", {"breath_depth": "Sort of"})
    assert [v.code for v in validate_expert(enum).violations] == ["enum"]


def test_validate_is_pure():
    rec = SubmissionRecord.from_json(full_questionnaire(USER_A, SUB_A, bpm=400, working="x"))
    a, b = validate_submission(rec), validate_submission(rec)
    assert a.to_dict() == b.to_dict()
    assert rec == SubmissionRecord.from_json(full_questionnaire(USER_A, SUB_A, bpm=400, working="x"))


def test_validate_directory_on_conforming_tree(tmp_path):
    write_conforming_tree(tmp_path)
    for entry in sorted(os.listdir(tmp_path)):
        for rep in validate_directory(load_user_directory(tmp_path / entry)):
            assert rep.violations == []


field_values = st.fixed_dictionaries(
    {
        "covid_status": st.sampled_from(S.COVID_STATUS),
        "vaccination_status": st.sampled_from(S.VACCINATION_STATUS),
        "oxygenSaturation": st.integers(60, 99),
        "bpm": st.integers(30, 250),
        "hospitalization": st.sampled_from(S.HOSPITALIZATION),
        "dry_cough": st.booleans(),
    },
    optional={"extra_key": st.text(max_size=5)},
)


@settings(max_examples=60, deadline=None)
@given(field_values)
def test_round_trip_preserves_fields(values):
    data = full_questionnaire(USER_A, SUB_A, **values)
    rec = SubmissionRecord.from_json(json.loads(json.dumps(data)))
    assert rec.to_json() == data
    assert SubmissionRecord.from_json(rec.to_json()) == rec


# --- index and stats ----------------------------------------------------------------


def test_scan_three_users_five_submissions(tmp_path):
    write_conforming_tree(tmp_path)
    idx = scan_dataset(tmp_path)
    assert (idx.users, idx.submissions) == (3, 5)
    assert sum(idx.sex.values()) == 3
    assert sum(idx.covid_status.values()) == 5
    assert sum(idx.vaccination.values()) == 5
    assert idx.presence[f"{USER_A}/{SUB_A}"]["audio.cough.mp3"]


def test_scan_empty_and_missing_root(tmp_path):
    idx = scan_dataset(tmp_path)
    assert (idx.users, idx.submissions) == (0, 0)
    with pytest.raises(DatasetError):
        scan_dataset(tmp_path / "missing")
    with pytest.raises(ValueError):
        summary_stats(idx)


def test_unknown_entries_reported(tmp_path):
    write_conforming_tree(tmp_path)
    (tmp_path / "README.txt").write_text("x")
    open(tmp_path / USER_B / SUB_B1 / "notes.json", "w").close()
    idx = scan_dataset(tmp_path)
    assert "README.txt" in idx.unknown_entries
    assert f"{USER_B}/{SUB_B1}/notes.json" in idx.unknown_entries


def test_unreadable_user_tallied_separately(tmp_path):
    write_conforming_tree(tmp_path)
    bad = tmp_path / "5a5a5a5a-5a5a-4a5a-8a5a-5a5a5a5a5a5a"
    bad.mkdir()
    (bad / S.DEMOGRAPHICS_FILE).write_text("[1, 2")
    idx = scan_dataset(tmp_path)
    assert idx.users == 3 and len(idx.unreadable) == 1


def test_positive_share_of_four(tmp_path):
    subs = {f"00000000-0000-4000-8000-00000000000{i}": {"questionnaire": full_questionnaire(USER_A, f"s{i}", covid_status="positive" if i == 0 else "negative")} for i in range(4)}
    write_user(tmp_path, USER_A, submissions=subs)
    stats = summary_stats(scan_dataset(tmp_path))
    assert stats.groupings["covid_status"]["positive"] == 0.25
    assert stats.shares["with_test_result"] == 1.0


def _all_distributions(groupings):
    for value in groupings.values():
        if value and isinstance(next(iter(value.values())), dict):
            yield from value.values()
        else:
            yield value


def test_grouped_proportions_sum_to_one(tmp_path):
    write_conforming_tree(tmp_path)
    stats = summary_stats(scan_dataset(tmp_path))
    for dist in _all_distributions(stats.groupings):
        assert abs(sum(dist.values()) - 1.0) <= 1e-9
        assert all(0 <= p <= 1 for p in dist.values())
    assert stats.groupings["sex"] == {"female": 1 / 3, "male": 2 / 3}
    assert stats.shares["conditions"]["hypertension"] == pytest.approx(1 / 3)
    assert stats.shares["symptoms"]["headache"] == pytest.approx(1 / 5)


def test_stats_rows_flatten_everything(tmp_path):
    write_conforming_tree(tmp_path)
    rows = list(summary_stats(scan_dataset(tmp_path)).rows())
    assert all(len(r) == 4 for r in rows)
    assert ("sex", "", "male", 2 / 3) in rows


def test_expert_files_loaded(tmp_path):
    write_user(
        tmp_path,
        USER_A,
        submissions={SUB_A: {"questionnaire": full_questionnaire(USER_A, SUB_A), "experts": {"cough": [{"audible_choking": True, "annotator_id": "dr1"}, {"dry": True}]}}},
    )
    sub = load_user_directory(tmp_path / USER_A).submissions[0]
    anns = sub.experts["cough"]
    assert len(anns) == 2
    assert anns[0].flagged() == {"audible_choking"} and anns[0].extra["annotator_id"] == "dr1"
    write_json(tmp_path / USER_A / SUB_A / "experts.breath.json", {"breath_depth": "Can breathe deeply enough"})
    again = load_user_directory(tmp_path / USER_A).submissions[0]
    assert len(again.experts["breath"]) == 1
