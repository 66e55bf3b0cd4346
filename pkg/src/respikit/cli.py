"""Command-line entry point: ``respikit <subcommand> ...``.

Settings resolve in three layers, later ones winning: built-in defaults,
the ``[<subcommand>]`` table of a TOML file given with ``--config`` (plus
its ``[common]`` table), then explicit flags. Machine-readable results go
to stdout (or ``--out``); logs, including the resolved settings, go to
stderr. Exit status is 0 on success, 1 on data errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

log = logging.getLogger("respikit")

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class UsageError(Exception):
    """Bad invocation: missing inputs, unknown config keys, contradictory options."""


class DataError(Exception):
    """Inputs were read but are invalid or unusable."""


@dataclass
class RunConfig:
    subcommand: str
    settings: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.settings[key]

    def get(self, key, default=None):
        return self.settings.get(key, default)

    def to_json(self) -> str:
        return json.dumps({"subcommand": self.subcommand, **self.settings}, sort_keys=True, default=str)


# --- defaults per subcommand (None = required / no default) --------------------------

COMMON = {"seed": 0, "out": None, "format": "json"}

DEFAULTS = {
    "validate": {"root": None},
    "stats": {"root": None},
    "breath-features": {
        "audio": None,
        "trim_db": -40.0,
        "split_db": -35.0,
        "min_gap_s": 0.25,
        "min_len_s": 0.2,
        "preference": None,
        "model": [],
    },
    "train": {
        "manifest": None,
        "toy": None,
        "model_out": None,
        "d": 128,
        "b": 3,
        "l": 1,
        "k": 64,
        "dropout": 0.5,
        "allow_nonstandard": False,
        "lr": 1e-3,
        "batch": 32,
        "epochs": 30,
    },
    "classify": {"audio": None, "model": None, "step": 1},
    "eval": {"confusion": None, "manifest": None, "model": None, "step": 1},
    "sweep": {
        "l": [1, 2, 3],
        "k": [64, 128],
        "b": [3, 4, 5],
        "d": [128, 1024],
        "evaluate": False,
        "toy": 20,
        "epochs": 5,
        "dropout": 0.5,
        "allow_nonstandard": False,
        "step": 8,
    },
    "emit-kb": {"root": None, "out_dir": None, "base": "http://example.org/respikit/"},
    "explain": {
        "kb": None,
        "predictions": None,
        "source_class": "positive",
        "base": "http://example.org/respikit/",
    },
}

CONFUSION_FIXTURES = {
    "short": "REFERENCE_SHORT_SCALE",
    "long": "REFERENCE_LONG_SCALE",
    "multiscale": "REFERENCE_MULTISCALE",
    "cough_detector": "REFERENCE_COUGH_DETECTOR",
}
# names accepted for compatibility with the published result tables
CONFUSION_FIXTURES.update(
    table9_short="REFERENCE_SHORT_SCALE",
    table9_long="REFERENCE_LONG_SCALE",
    table9_multiscale="REFERENCE_MULTISCALE",
    table10="REFERENCE_COUGH_DETECTOR",
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="respikit", description="Respiratory audio, classifier and knowledge-base toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file; [common] and [<subcommand>] tables supply defaults")
    common.add_argument("--seed", type=int, help="root seed for every random draw (default 0)")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "tsv"), help="result format (default json)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    s = sub.add_parser("validate", parents=[common], help="check a dataset tree against the record schemas")
    s.add_argument("root", nargs="?")

    s = sub.add_parser("stats", parents=[common], help="summary statistics of a dataset tree")
    s.add_argument("root", nargs="?")

    s = sub.add_parser("breath-features", parents=[common], help="inhale/exhale segmentation and RR, I/E, FIT")
    s.add_argument("audio", nargs="?")
    s.add_argument("--trim-db", type=float)
    s.add_argument("--split-db", type=float)
    s.add_argument("--min-gap-s", type=float)
    s.add_argument("--min-len-s", type=float)
    s.add_argument("--preference", type=float, help="clustering preference (default: median similarity)")
    s.add_argument("--model", action="append", help="CNN model file used to localize breathing (repeatable)")

    s = sub.add_parser("train", parents=[common], help="train one CNN scale")
    s.add_argument("--manifest", help="CSV with columns path,label (labels: cough, breath, voice)")
    s.add_argument("--toy", type=int, help="train on N synthetic recordings per class instead of a manifest")
    s.add_argument("--model-out", help="where to write the trained model")
    for name, kind in (("d", int), ("b", int), ("l", int), ("k", int), ("dropout", float), ("lr", float), ("batch", int), ("epochs", int)):
        s.add_argument(f"--{name}", type=kind)
    s.add_argument("--allow-nonstandard", action="store_const", const=True, help="accept sizes outside the published ranges")

    s = sub.add_parser("classify", parents=[common], help="cough/breath/voice probabilities per recording")
    s.add_argument("audio", nargs="*")
    s.add_argument("--model", action="append", help="model file (repeat to ensemble scales)")
    s.add_argument("--step", type=int, help="frames between window starts (default 1)")

    s = sub.add_parser("eval", parents=[common], help="confusion matrix and metrics")
    s.add_argument("--confusion", choices=sorted(CONFUSION_FIXTURES), help="score a published confusion matrix")
    s.add_argument("--manifest", help="CSV path,label to classify and score")
    s.add_argument("--model", action="append")
    s.add_argument("--step", type=int)

    s = sub.add_parser("sweep", parents=[common], help="architecture grid over (l, k, b, d)")
    for name in ("l", "k", "b", "d"):
        s.add_argument(f"--{name}", type=int, nargs="+")
    s.add_argument("--evaluate", action="store_const", const=True, help="train and score each config on the toy set")
    s.add_argument("--toy", type=int, help="toy recordings per class when evaluating")
    s.add_argument("--epochs", type=int)
    s.add_argument("--dropout", type=float)
    s.add_argument("--step", type=int)
    s.add_argument("--allow-nonstandard", action="store_const", const=True)

    s = sub.add_parser("emit-kb", parents=[common], help="write ontology and assertion N-Triples for a dataset")
    s.add_argument("root", nargs="?")
    s.add_argument("--out-dir")
    s.add_argument("--base", help="base IRI for minted names")

    s = sub.add_parser("explain", parents=[common], help="counterfactual edits for classifier predictions")
    s.add_argument("--kb", nargs="+", help="N-Triples file(s): ontology and assertions")
    s.add_argument("--predictions", help="JSON object: individual -> positive|negative")
    s.add_argument("--source-class", choices=("positive", "negative"))
    s.add_argument("--base")
    return p


def resolve(args: argparse.Namespace) -> RunConfig:
    cmd = args.subcommand
    file_cfg: dict = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid TOML: {exc}") from exc
        file_cfg.update(doc.get("common", {}))
        file_cfg.update(doc.get(cmd, {}))
    defaults = {**COMMON, **DEFAULTS[cmd]}
    unknown = sorted(k for k in (key.replace("-", "_") for key in file_cfg) if k not in defaults)
    if unknown:
        raise UsageError(f"unknown config key(s) for {cmd}: {', '.join(unknown)}")
    settings = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        from_file = file_cfg.get(key, file_cfg.get(key.replace("_", "-")))
        if flag not in (None, []):
            settings[key] = flag
        elif from_file is not None:
            settings[key] = from_file
        else:
            settings[key] = default
    return RunConfig(cmd, settings)


def _require(cfg: RunConfig, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, [], "")]
    if missing:
        raise UsageError(f"{cfg.subcommand}: missing required setting(s): {', '.join(missing)}")


def _seeds(root_seed: int, names: Sequence[str]) -> dict:
    """Independent child seeds drawn from the single root seed."""
    children = np.random.SeedSequence(root_seed).spawn(len(names))
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


# --- output helpers --------------------------------------------------------------------


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _tsv(rows: Sequence[Sequence[Any]]) -> str:
    return "".join("\t".join("" if v is None else str(v) for v in row) + "\n" for row in rows)


def _emit(cfg: RunConfig, payload: dict, rows: Optional[Sequence[Sequence[Any]]] = None, stdout=None) -> None:
    text = _tsv(rows) if cfg["format"] == "tsv" and rows is not None else _dump_json(payload)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        (stdout or sys.stdout).write(text)


# --- subcommands ---------------------------------------------------------------------


def _user_dirs(root):
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    return sorted(p for p in root.iterdir() if p.is_dir())


def cmd_validate(cfg: RunConfig):
    from .dataset import DatasetError, load_user_directory, validate_directory

    _require(cfg, "root")
    reports, n_errors, unreadable = [], 0, []
    for d in _user_dirs(cfg["root"]):
        try:
            for rep in validate_directory(load_user_directory(d)):
                if rep.violations:
                    reports.append(rep.to_dict())
                    n_errors += len(rep.errors)
        except DatasetError as exc:
            unreadable.append({"path": d.name, "error": str(exc)})
    payload = {"errors": n_errors, "reports": reports, "unreadable": unreadable}
    rows = [("participant", "submission", "file", "field", "code", "severity", "message")]
    for r in reports:
        for v in r["violations"]:
            rows.append((r["participant_id"], r["submission_id"], r["file"], v["field"], v["code"], v["severity"], v["message"]))
    return payload, rows, 1 if (n_errors or unreadable) else 0


def cmd_stats(cfg: RunConfig):
    from .dataset import scan_dataset, summary_stats

    _require(cfg, "root")
    try:
        stats = summary_stats(scan_dataset(cfg["root"]))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return stats.to_dict(), [("table", "group", "key", "value"), *stats.rows()], 0


def _load_models(paths):
    from .classifier.io import load_model

    return [load_model(p) for p in paths]


def cmd_breath_features(cfg: RunConfig):
    from . import dsp
    from .breathing import SegmentationConfig, breath_features, cnn_breath_localizer

    _require(cfg, "audio")
    seg = SegmentationConfig().updated(
        trim_db=cfg["trim_db"],
        split_db=cfg["split_db"],
        min_gap_s=cfg["min_gap_s"],
        min_len_s=cfg["min_len_s"],
        preference=cfg["preference"],
        seed=_seeds(cfg["seed"], ["cluster"])["cluster"],
    )
    localizer = cnn_breath_localizer(_load_models(cfg["model"])) if cfg["model"] else None
    buf = dsp.load_audio(cfg["audio"])
    feats = breath_features(buf, seg, localizer)
    feats["source"] = os.path.basename(cfg["audio"])
    rows = [("RR", "I_E_ratio", "FIT", "cycle_count"), (feats["RR"], feats["I_E_ratio"], feats["FIT"], feats["cycle_count"])]
    return feats, rows, 0


def _read_manifest(path):
    from .classifier.model import CLASSES

    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    items = []
    for i, row in enumerate(rows, start=2):
        if "path" not in row or "label" not in row:
            raise DataError(f"{path}: manifest needs 'path' and 'label' columns")
        label = row["label"].strip()
        if label not in CLASSES:
            raise DataError(f"{path}:{i}: unknown label {label!r} (expected one of {', '.join(CLASSES)})")
        items.append((path.parent / row["path"], CLASSES.index(label)))
    if not items:
        raise DataError(f"{path}: manifest is empty")
    return items


def _spectrograms(items):
    from . import dsp
    from .classifier.features import preprocess

    out = []
    for p, label in items:
        try:
            out.append((preprocess(dsp.load_audio(p)), label, str(p)))
        except dsp.EmptyAudioError:
            log.warning("%s: silent after trimming, skipped", p)
    return out


def _toy_spectrograms(n_per_class, seed):
    from . import synth
    from .classifier.features import preprocess

    rng = np.random.default_rng(seed)
    return [(preprocess(b), y, f"toy{i}") for i, (b, y) in enumerate(synth.toy_dataset(rng, n_per_class))]


def cmd_train(cfg: RunConfig):
    from .classifier.io import save_model
    from .classifier.model import ModelConfig, ModelConfigError, build_model
    from .classifier.training import TrainConfig, train

    _require(cfg, "model_out")
    if (cfg["manifest"] is None) == (cfg["toy"] is None):
        raise UsageError("train: give exactly one of --manifest or --toy")
    seeds = _seeds(cfg["seed"], ["data", "init", "train"])
    log.info("derived seeds: %s", json.dumps(seeds, sort_keys=True))
    data = _toy_spectrograms(cfg["toy"], seeds["data"]) if cfg["toy"] else _spectrograms(_read_manifest(cfg["manifest"]))
    mc = ModelConfig(d=cfg["d"], b=cfg["b"], l=cfg["l"], k=cfg["k"], dropout_p=cfg["dropout"])
    try:
        model = build_model(mc, seed=seeds["init"], strict=not cfg["allow_nonstandard"])
    except ModelConfigError as exc:
        raise UsageError(str(exc)) from exc
    tc = TrainConfig(lr=cfg["lr"], batch=cfg["batch"], epochs=cfg["epochs"], seed=seeds["train"])
    try:
        result = train(model, [(s, y) for s, y, _ in data], tc, on_epoch=lambda e, l: log.info("epoch %d loss %.6f", e + 1, l))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    save_model(model, cfg["model_out"])
    payload = {
        "model": str(cfg["model_out"]),
        "config": mc.to_dict(),
        "parameters": model.parameter_count(),
        "train_config": tc.to_dict(),
        "recordings": len(data),
        "excluded": [data[i][2] for i in result.excluded],
        "loss_history": result.loss_history,
    }
    rows = [("epoch", "loss"), *((i + 1, l) for i, l in enumerate(result.loss_history))]
    return payload, rows, 0


def cmd_classify(cfg: RunConfig):
    from . import dsp
    from .classifier.features import preprocess
    from .classifier.inference import classify_recording
    from .classifier.model import CLASSES

    _require(cfg, "audio", "model")
    models = _load_models(cfg["model"])
    results = []
    for p in cfg["audio"]:
        probs = classify_recording(models, preprocess(dsp.load_audio(p)), cfg["step"])
        results.append({"audio": os.path.basename(p), "probabilities": dict(zip(CLASSES, probs.tolist())), "label": CLASSES[int(np.argmax(probs))]})
    rows = [("audio", *CLASSES, "label"), *((r["audio"], *r["probabilities"].values(), r["label"]) for r in results)]
    return {"results": results}, rows, 0


def cmd_eval(cfg: RunConfig):
    import importlib

    from .classifier.inference import classify_recording

    M = importlib.import_module(".classifier.metrics", __package__)

    if (cfg["confusion"] is None) == (cfg["manifest"] is None):
        raise UsageError("eval: give exactly one of --confusion or --manifest")
    if cfg["confusion"]:
        if cfg["confusion"] not in CONFUSION_FIXTURES:
            raise UsageError(f"unknown confusion fixture {cfg['confusion']!r}")
        counts = np.array(getattr(M, CONFUSION_FIXTURES[cfg["confusion"]]))
        cm = M.ConfusionMatrix(counts, *M._default_labels(counts))
        result = M.metrics(cm)
    else:
        _require(cfg, "model")
        models = _load_models(cfg["model"])
        data = _spectrograms(_read_manifest(cfg["manifest"]))
        probs = np.array([classify_recording(models, s, cfg["step"]) for s, _, _ in data])
        labels = [y for _, y, _ in data]
        cm = M.evaluate(probs, labels)
        result = M.metrics(cm, probs, labels)
    payload = {"confusion": cm.to_dict(), "metrics": result.to_dict()}
    rows = [r.split("\t") for r in cm.to_table().splitlines()]
    rows += [("accuracy", result.accuracy), ("macro_f1", result.macro_f1), ("c_statistic", result.c_statistic)]
    return payload, rows, 0


def cmd_sweep(cfg: RunConfig):
    import itertools

    from .classifier.inference import classify_recording
    from .classifier.metrics import evaluate, metrics
    from .classifier.model import ModelConfig, ModelConfigError, build_model, closed_form_parameter_count
    from .classifier.training import TrainConfig, train

    seeds = _seeds(cfg["seed"], ["data", "init", "train"])
    strict = not cfg["allow_nonstandard"]
    data = None
    out = []
    for l, k, b, d in itertools.product(cfg["l"], cfg["k"], cfg["b"], cfg["d"]):
        mc = ModelConfig(d=d, b=b, l=l, k=k, dropout_p=cfg["dropout"])
        try:
            mc.check(strict)
        except ModelConfigError as exc:
            out.append({"l": l, "k": k, "b": b, "d": d, "valid": False, "reason": str(exc)})
            continue
        row = {"l": l, "k": k, "b": b, "d": d, "valid": True, "parameters": closed_form_parameter_count(mc)}
        if cfg["evaluate"]:
            if data is None:
                data = _toy_spectrograms(cfg["toy"], seeds["data"])
                split = len(data) * 2 // 3
            model = build_model(mc, seed=seeds["init"], strict=strict)
            usable = [(s, y) for s, y, _ in data[:split] if s.n_frames >= d]
            test = [(s, y) for s, y, _ in data[split:] if s.n_frames >= d]
            try:
                train(model, usable, TrainConfig(epochs=cfg["epochs"], seed=seeds["train"]))
            except ValueError as exc:
                row.update(valid=False, reason=str(exc))
                out.append(row)
                continue
            if test:
                probs = np.array([classify_recording([model], s, cfg["step"]) for s, _ in test])
                m = metrics(evaluate(probs, [y for _, y in test]), probs, [y for _, y in test])
                row.update(accuracy=m.accuracy, macro_f1=m.macro_f1)
        out.append(row)
    cols = ["l", "k", "b", "d", "valid", "parameters", "accuracy", "macro_f1"]
    rows = [cols, *([r.get(c) for c in cols] for r in out)]
    return {"configs": out}, rows, 0


def cmd_emit_kb(cfg: RunConfig):
    from .kb.assertions import assert_dataset
    from .kb.ntriples import emit_ntriples

    _require(cfg, "root", "out_dir")
    kb = assert_dataset(cfg["root"])
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    n_onto = emit_ntriples(kb.tbox, None, out_dir / "ontology.nt", cfg["base"])
    n_data = emit_ntriples(None, kb.abox, out_dir / "triples.nt", cfg["base"])
    payload = {
        "ontology": {"file": "ontology.nt", "triples": n_onto, "concepts": len(kb.tbox.concepts), "roles": len(kb.tbox.roles)},
        "assertions": {"file": "triples.nt", "triples": n_data, "individuals": len(kb.abox.individuals), "assertions": len(kb.abox)},
    }
    rows = [("file", "triples"), ("ontology.nt", n_onto), ("triples.nt", n_data)]
    return payload, rows, 0


def cmd_explain(cfg: RunConfig):
    from .counterfactual import describe, explain_all
    from .kb.model import KnowledgeBase
    from .kb.ntriples import parse_ntriples

    _require(cfg, "kb", "predictions")
    kb_files = cfg["kb"] if isinstance(cfg["kb"], list) else [cfg["kb"]]
    tbox, abox = parse_ntriples(*kb_files, base=cfg["base"])
    kb = KnowledgeBase(tbox, abox)
    try:
        preds = json.loads(Path(cfg["predictions"]).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read predictions {cfg['predictions']}: {exc}") from exc
    if not isinstance(preds, dict):
        raise DataError("predictions file must hold a JSON object mapping individual -> class")
    descriptions = [describe(kb, ind, cls) for ind, cls in sorted(preds.items())]
    results, table = explain_all(descriptions, tbox, cfg["source_class"])
    payload = {
        "explanations": [r.to_dict() for r in results],
        "global": table.to_dict() if table else None,
    }
    rows = [r.split("\t") for r in (table.to_table().splitlines() if table else ["rank\tkind\tsource\ttarget\tcount\tmean_cost"])]
    return payload, rows, 0


COMMANDS = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "breath-features": cmd_breath_features,
    "train": cmd_train,
    "classify": cmd_classify,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "emit-kb": cmd_emit_kb,
    "explain": cmd_explain,
}


def _data_errors() -> tuple:
    from .classifier.io import ModelFileError
    from .dataset import DatasetError
    from .dsp import AudioError

    return (DataError, DatasetError, AudioError, ModelFileError, OSError, ValueError, KeyError)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * min(verbosity + 1, 2)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("respikit")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    """Parse ``argv``, dispatch, and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.verbose)
    try:
        cfg = resolve(args)
        log.info("resolved config: %s", cfg.to_json())
        payload, rows, status = COMMANDS[cfg.subcommand](cfg)
        _emit(cfg, payload, rows, stdout)
        return status
    except UsageError as exc:
        print(f"respikit {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    except _data_errors() as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"respikit {args.subcommand}: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:  # pragma: no cover
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
