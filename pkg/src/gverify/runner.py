"""Batch execution over a manifest and evaluation of the stored predictions."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .backend import PRESETS, FewShotExample, RunConfig, build_messages, call_model, extract_report
from .dataset import Instance, Manifest
from .evaluation import (DEFAULT_THRESHOLD, EmbeddingProvider, InstanceResult, RunSummary,
                         evaluate_instance, render_tables, summarize_run)
from .vision import load_image

log = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
TABLES_FILE = "tables.txt"


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    config: str
    status: str
    raw_text: Optional[str] = None
    error: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps({"instance_id": self.instance_id, "config": self.config,
                           "status": self.status, "raw_text": self.raw_text,
                           "error": self.error}, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_file(cls, path: Path) -> "Prediction":
        doc = json.loads(path.read_text(encoding="utf-8"))
        return cls(doc["instance_id"], doc["config"], doc["status"], doc.get("raw_text"), doc.get("error"))


def expand_configs(spec: str) -> list[str]:
    """``all`` or a comma-separated list of preset names."""
    if spec.strip() == "all":
        return list(PRESETS)
    names = [n.strip() for n in spec.split(",") if n.strip()]
    unknown = [n for n in names if n not in PRESETS]
    if unknown or not names:
        raise ValueError(f"unknown configs {unknown}; choose from {list(PRESETS)} or 'all'")
    return names


def prediction_path(out_dir, config_name: str, instance_id: str) -> Path:
    return Path(out_dir) / config_name / f"{instance_id}.json"


def run_instance(instance: Instance, config: RunConfig, examples: Sequence[FewShotExample]) -> Prediction:
    try:
        image = load_image(instance.image_path)
        messages = build_messages(config, instance.gcode, image,
                                  examples if config.shots == "few" else ())
        raw = call_model(messages, config)
    except Exception as exc:
        log.warning("%s/%s failed: %s", config.name, instance.id, exc)
        return Prediction(instance.id, config.name, "error", error=f"{type(exc).__name__}: {exc}")
    return Prediction(instance.id, config.name, "ok", raw_text=raw)


def run_batch(manifest: Manifest, configs: Sequence[RunConfig], out_dir,
              examples: Sequence[FewShotExample] = ()) -> list[Prediction]:
    """Run every instance under every config, writing ``<out>/<config>/<id>.json``.

    Instances run on a pool of ``max_parallel`` workers per config; failures
    are recorded per instance and never stop the run.
    """
    out_dir = Path(out_dir)
    results = []
    for config in configs:
        (out_dir / config.name).mkdir(parents=True, exist_ok=True)
        with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
            preds = list(pool.map(lambda inst: run_instance(inst, config, examples), manifest.instances))
        for pred in sorted(preds, key=lambda p: p.instance_id):
            with open(prediction_path(out_dir, config.name, pred.instance_id), "w",
                      encoding="utf-8", newline="") as fh:
                fh.write(pred.to_json())
            results.append(pred)
    return results


def _config_dirs(pred_dir: Path) -> list[str]:
    present = sorted(p.name for p in pred_dir.iterdir() if p.is_dir())
    return [n for n in PRESETS if n in present] + [n for n in present if n not in PRESETS]


def evaluate_config(pred_dir, config_name: str, manifest: Manifest, provider: EmbeddingProvider,
                    threshold: float = DEFAULT_THRESHOLD) -> RunSummary:
    records: list[InstanceResult] = []
    for inst in manifest.instances:
        path = prediction_path(pred_dir, config_name, inst.id)
        note = ""
        if not path.is_file():
            pred, note = None, "missing prediction, scored as schema-invalid"
        else:
            stored = Prediction.from_file(path)
            if stored.status != "ok" or stored.raw_text is None:
                pred, note = None, f"run failed ({stored.error}), scored as schema-invalid"
            else:
                pred = extract_report(stored.raw_text)
                if not hasattr(pred, "slots"):
                    note = "schema-invalid output"
        records.append(evaluate_instance(pred, inst.truth, provider, threshold, inst.id, note))
    return summarize_run(records, config_name)


def evaluate_predictions(pred_dir, manifest: Manifest, provider: EmbeddingProvider,
                         threshold: float = DEFAULT_THRESHOLD, out_dir=None) -> dict[str, RunSummary]:
    """Score every config folder under ``pred_dir`` and write summary.json and tables.txt."""
    pred_dir = Path(pred_dir)
    summaries = {name: evaluate_config(pred_dir, name, manifest, provider, threshold)
                 for name in _config_dirs(pred_dir)}
    out_dir = Path(out_dir) if out_dir is not None else pred_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "embeddings": provider.kind,
        "threshold": threshold,
        "configs": {name: s.to_dict() for name, s in summaries.items()},
    }
    for name, text in ((SUMMARY_FILE, json.dumps(doc, indent=2) + "\n"),
                       (TABLES_FILE, render_tables(summaries))):
        with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return summaries
