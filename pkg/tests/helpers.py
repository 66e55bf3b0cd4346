"""Fixture builders shared across the test modules."""

from __future__ import annotations

import json
import os

from respikit.dataset import schema as S

USER_A = "3f0c1c52-8a4f-4d0e-9a61-2b7d8e5f0a11"
SUB_A = "9b2e4d77-1c3a-4f5b-8e6d-0a9c8b7d6e51"
USER_B = "5d6e7f80-91a2-4b3c-8d4e-5f6a7b8c9d0e"
SUB_B1 = "0a1b2c3d-4e5f-4a6b-9c7d-8e9f0a1b2c3d"
SUB_B2 = "1b2c3d4e-5f6a-4b7c-8d9e-0f1a2b3c4d5e"
USER_C = "6e7f8091-a2b3-4c4d-9e5f-6a7b8c9d0e1f"
SUB_C1 = "2c3d4e5f-6a7b-4c8d-9e0f-1a2b3c4d5e6f"
SUB_C2 = "3d4e5f6a-7b8c-4d9e-8f0a-2b3c4d5e6f70"


def demographics(pid, **overrides):
    data = {"participantid": pid, "sex": 1, "age_category": 0, "bmi": 22.5, "registration_timestamp": "2021-05-01 10:00:00"}
    data.update({c: False for c in S.CONDITIONS})
    data.update(overrides)
    return data


def full_questionnaire(pid, sid, **overrides):
    """A questionnaire with every field present at a legal code."""
    data = {
        "participantid": pid,
        "submissionid": sid,
        "covid_status": "negative",
        "pcr_test": True,
        "rapid_test": False,
        "self_test": False,
        "test_last_3_days": True,
        "last_negative_test_date": "2021-06-01",
        "first_positive_test_date": "2021-01-10",
        "vaccination_status": "fully",
        "latest_vaccination_date": "2021-04-20",
        "hospitalization": "0",
        "exposure_to_someone_with_covid": "No",
        "travelled_abroad": "0",
        "submission_timestamp": "2021-06-02 09:30:00",
        "oxymeter": True,
        "oxygenSaturation": 97,
        "bpm": 72,
        "blood_pressure_meter": True,
        "systolic_pressure": 120,
        "diastolic_pressure": 80,
        "breath_holding": 30,
        "smoking": "ex",
        "years_of_quitting_smoking": 3,
        "years_of_smoking": 5,
        "no_cigarettes": "10u",
        "vaping": "0",
        "anxiety": "1",
        "working": "home",
    }
    data.update({s: False for s in S.SYMPTOMS})
    data.update({d: False for d in S.DIFFICULTIES})
    data.update(overrides)
    return data


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def write_user(root, pid, demo=None, submissions=None):
    """Write one user directory.

    ``submissions`` maps a submission id to a dict with optional keys
    ``questionnaire``, ``breathing_features``, ``experts`` (campaign ->
    annotation list) and ``files`` (extra file names to touch).
    """
    udir = os.path.join(root, pid)
    os.makedirs(udir, exist_ok=True)
    write_json(os.path.join(udir, S.DEMOGRAPHICS_FILE), demo if demo is not None else demographics(pid))
    for sid, spec in (submissions or {}).items():
        sdir = os.path.join(udir, sid)
        os.makedirs(sdir, exist_ok=True)
        if spec.get("questionnaire") is not None:
            write_json(os.path.join(sdir, S.QUESTIONNAIRE_FILE), spec["questionnaire"])
        if spec.get("breathing_features") is not None:
            write_json(os.path.join(sdir, S.BREATHING_FEATURES_FILE), spec["breathing_features"])
        for campaign, anns in spec.get("experts", {}).items():
            write_json(os.path.join(sdir, S.EXPERT_FILES[campaign]), anns)
        for name in spec.get("files", ()):
            open(os.path.join(sdir, name), "wb").close()
    return udir


def profile_records():
    """Female 18-29 asthmatic smoker, positive PCR, headache, a cough with choking."""
    demo = demographics(USER_A, asthma=True)
    q = {
        "participantid": USER_A,
        "submissionid": SUB_A,
        "covid_status": "positive",
        "pcr_test": True,
        "headache": True,
        "smoking": "yes",
    }
    experts = {"cough": [{"audible_choking": True}]}
    return demo, q, experts


def write_profile(root):
    demo, q, experts = profile_records()
    return write_user(root, USER_A, demo, {SUB_A: {"questionnaire": q, "experts": experts}})


def write_conforming_tree(root):
    """Three users, five submissions, every record schema-clean."""
    write_user(root, USER_A, demographics(USER_A), {SUB_A: {"questionnaire": full_questionnaire(USER_A, SUB_A), "files": ["audio.cough.mp3"]}})
    write_user(
        root,
        USER_B,
        demographics(USER_B, sex=0, age_category=3, hypertension=True),
        {
            SUB_B1: {"questionnaire": full_questionnaire(USER_B, SUB_B1, covid_status="positive", headache=True)},
            SUB_B2: {"questionnaire": full_questionnaire(USER_B, SUB_B2, vaccination_status="booster1")},
        },
    )
    write_user(
        root,
        USER_C,
        demographics(USER_C, sex=0, age_category=5),
        {
            SUB_C1: {"questionnaire": full_questionnaire(USER_C, SUB_C1, covid_status="no", dry_cough=True, fatigue=True)},
            SUB_C2: {"questionnaire": full_questionnaire(USER_C, SUB_C2, smoking="yes")},
        },
    )
    return root


# --- classifier fixtures ------------------------------------------------------------


def kink_margin(model, x):
    """Smallest distance of any ReLU input from 0 and of any pooled max from its runner-up.

    Central differences with step ``eps`` are only exact-to-rounding when
    no perturbation moves an activation across a kink, so a fixture is
    usable when this margin comfortably exceeds the step.
    """
    import numpy as np

    from respikit.classifier.model import _as_batch, conv3x3_forward, maxpool_forward

    cfg = model.config
    h = _as_batch(model, x)
    worst = np.inf
    for wname, bname in model.conv_names():
        z, _ = conv3x3_forward(h, model.params[wname], model.params[bname])
        worst = min(worst, float(np.abs(z).min()))
        h = np.maximum(z, 0)
        if wname.endswith(f"conv{cfg.l - 1}.weight"):
            N, H, W, C = h.shape
            win = h.reshape(N, H // 2, 2, W // 2, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(-1, 4)
            top2 = np.sort(win, axis=1)[:, -2:]
            live = top2[:, 1] > 0
            if live.any():
                worst = min(worst, float((top2[live, 1] - top2[live, 0]).min()))
            h, _ = maxpool_forward(h)
    return worst


def tiny_gradient_fixture(margin=2e-4):
    """A 291-parameter CNN plus two inputs, all activations well clear of kinks.

    Biases are drawn away from zero so dead units do not sit exactly on a
    kink; seeds are scanned in order until the margin is at least twice
    the finite-difference step.
    """
    import numpy as np

    from respikit.classifier.model import ModelConfig, build_model

    cfg = ModelConfig(d=16, b=3, l=1, k=2)
    for seed in range(100):
        model = build_model(cfg, seed=seed, strict=False, dtype=np.float64)
        rng = np.random.default_rng(seed)
        for name, p in model.params.items():
            if name.endswith("bias"):
                p[:] = rng.uniform(0.05, 0.2, p.shape)
        x = rng.random((2, 128, 16))
        if kink_margin(model, x) > margin:
            return model, x, np.array([0, 2])
    raise RuntimeError("no kink-free fixture found")


def linear_gradient_fixture():
    """Dense-only softmax model (no conv blocks) on inputs bounded away from zero."""
    import numpy as np

    from respikit.classifier.model import ModelConfig, build_model

    model = build_model(ModelConfig(d=8, b=0), seed=0, strict=False, dtype=np.float64)
    x = np.random.default_rng(0).uniform(0.5, 1.0, (2, 128, 8))
    return model, x, np.array([0, 2])
