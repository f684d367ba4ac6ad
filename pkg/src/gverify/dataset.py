"""The 8-scenario x 2-instance evaluation catalog and the 7-example few-shot pack.

Programs are small hand-written lathe snippets. Faulty instances (``i1``)
carry exactly the scenario's error class; clean instances (``i2``) share the
scenario's indicator states and parse without issues. Screens are rendered
noise-free with :func:`gverify.vision.render_synthetic` (noisy screens are
slow to encode as PNG) and truths come from the oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .backend import FewShotExample
from .errors import ManifestError
from .gcode import IssueCategory
from .report import VerificationReport, parse_report, serialize_report
from .verifier import verify_oracle
from .vision import IndicatorStates, load_image, render_synthetic, save_image

MANIFEST_VERSION = "1"


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    scenario: int
    indicators: str
    categories: tuple[IssueCategory, ...]
    gcode: str


def _prog(*lines: str) -> str:
    return "\n".join(lines) + "\n"


C = IssueCategory

SCENARIOS: tuple[ScenarioSpec, ...] = (
    ScenarioSpec("S1-i1", 1, "T/F/F", (C.MODAL_CONFLICT,), _prog(
        "G18 G21 G90", "M3 S800", "G00 G01 X10.0 Z-5.0 F120", "G0 X20.0 Z2.0", "M5", "M30")),
    ScenarioSpec("S1-i2", 1, "T/F/F", (), _prog(
        "G18 G21 G90", "M3 S800", "G0 X20.0 Z2.0", "G1 X10.0 Z-5.0 F120", "M5", "M30")),
    ScenarioSpec("S2-i1", 2, "F/F/F", (C.INVALID_COMMAND,), _prog(
        "G21 G90", "M3 S1,200", "G0 X12.0 Z1.0", "G1 Z-8.0 F100", "M5")),
    ScenarioSpec("S2-i2", 2, "T/F/T", (), _prog(
        "G21 G90", "M3 S1200", "G0 Z1.0", "G1 Z-8.0 F100", "M5", "M30")),
    ScenarioSpec("S3-i1", 3, "T/T/F", (C.MODAL_CONFLICT, C.MISSING_FEED_VALUE), _prog(
        "G21 G90", "M3 S1000", "G0 G1 X12.0 Z1.0", "G1 Z-10.0 F", "M5")),
    ScenarioSpec("S3-i2", 3, "T/T/F", (), _prog(
        "G21 G90", "M3 S1000", "G0 X12.0", "G1 X6.0 F80", "M5", "M30")),
    ScenarioSpec("S4-i1", 4, "T/F/T", (C.NON_NUMERIC_COORDINATE,), _prog(
        "G21 G90", "M4 S900", "G0 Z2.0", "G1 Xl0.5 Z-3.0 F90", "M5")),
    ScenarioSpec("S4-i2", 4, "T/F/T", (), _prog(
        "G21 G90", "M4 S900", "G0 Z2.0", "G1 Z-3.0 F90", "M5", "M30")),
    ScenarioSpec("S5-i1", 5, "F/T/F", (C.MISSING_FEED_VALUE,), _prog(
        "G21 G90", "G0 X15.0", "G1 X8.0 F", "G0 X15.0", "M30")),
    ScenarioSpec("S5-i2", 5, "F/T/F", (), _prog(
        "G21 G90", "G0 X15.0", "G1 X8.0 F60", "G0 X15.0", "M30")),
    ScenarioSpec("S6-i1", 6, "F/T/T", (C.UNKNOWN_CODE,), _prog(
        "G21 G90", "G0 X5.0 Z2.0", "G29 X5.0 Z-4.0", "M3 S700", "M30")),
    ScenarioSpec("S6-i2", 6, "F/T/T", (), _prog(
        "G21 G90", "G0 X5.0 Z2.0", "G1 X5.0 Z-4.0 F75", "G0 X20.0", "M30")),
    ScenarioSpec("S7-i1", 7, "T/T/T", (C.EMPTY_MOTION_BLOCK,), _prog(
        "G21 G90", "M3 S1500", "G0 X10.0 Z1.0", "G01 F80", "M5", "M30")),
    ScenarioSpec("S7-i2", 7, "T/T/T", (), _prog(
        "G21 G90", "M3 S1500", "G0 X10.0 Z1.0", "G01 Z-12.0 F80", "M5", "M30")),
    ScenarioSpec("S8-i1", 8, "F/F/F", (C.UNSAFE_FEED,), _prog(
        "G21 G90", "M3 S600", "G0 X25.0 Z2.0", "G1 X3.0 Z-6.0 F2500", "M5")),
    ScenarioSpec("S8-i2", 8, "F/F/F", (), _prog(
        "G21 G90", "M3 S600", "G0 X25.0 Z2.0", "G1 X3.0 Z-6.0 F150", "M5")),
)

# (folder, label, indicators, program)
FEWSHOT_SPECS = (
    ("01-modal-conflict", "syntax error: modal conflict", "T/T/T", _prog(
        "G21 G90", "M3 S900", "G1 G2 X4.0 Z-2.0 F50", "M5")),
    ("02-missing-feed", "syntax error: feed F missing value", "T/T/T", _prog(
        "G21", "M3 S1100", "G1 Z-4.5 F", "M5")),
    ("03-unknown-code", "syntax error: unknown code", "T/T/T", _prog(
        "G21 G90", "M3 S750", "G73 X7.0 Z-1.0", "M5")),
    ("04-spindle-open-collet", "compliance: spindle started with open collet", "F/T/T", _prog(
        "G21 G90", "M3 S950", "G0 X9.0 Z3.0", "M5")),
    ("05-x-unreferenced", "compliance: X motion without REF X", "T/F/T", _prog(
        "G21 G90", "G0 X30.0", "G1 X18.0 F110", "M30")),
    ("06-refz-dark", "HMI fault: REF Z dark, valid program", "T/T/F", _prog(
        "G21 G90", "M3 S1300", "G0 X14.0", "G1 X11.0 F70", "M5")),
    ("07-fully-valid", "fully valid configuration", "T/T/T", _prog(
        "G18 G21 G90", "M3 S1000", "G0 X22.0 Z2.0", "G1 X22.0 Z-15.0 F90", "M5", "M30")),
)


@dataclass(frozen=True)
class Instance:
    id: str
    scenario: int
    indicators: IndicatorStates
    gcode: str
    image_path: Path
    truth: VerificationReport
    program_path: Optional[Path] = None
    truth_path: Optional[Path] = None


@dataclass(frozen=True)
class Manifest:
    version: str
    instances: tuple[Instance, ...]

    def by_id(self) -> dict[str, Instance]:
        return {inst.id: inst for inst in self.instances}


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps LF on every platform so trees are byte-identical
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def build_catalog(output_dir) -> Manifest:
    """Write ``<output_dir>/<id>/{program.nc,screen.png,truth.json}`` and the manifest."""
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    instances = []
    for spec in SCENARIOS:
        states = IndicatorStates.parse(spec.indicators)
        folder = root / spec.id
        folder.mkdir(parents=True, exist_ok=True)
        program_path, image_path, truth_path = (folder / "program.nc", folder / "screen.png",
                                                folder / "truth.json")
        _write_text(program_path, spec.gcode)
        save_image(render_synthetic(states), image_path)
        truth = verify_oracle(spec.gcode, states)
        _write_text(truth_path, serialize_report(truth) + "\n")
        instances.append(Instance(spec.id, spec.scenario, states, spec.gcode, image_path, truth,
                                  program_path, truth_path))
    manifest = Manifest(MANIFEST_VERSION, tuple(instances))
    save_manifest(manifest, root / "manifest.json")
    return manifest


def _rel(path: Path, base: Path) -> str:
    return Path(path).resolve().relative_to(base.resolve()).as_posix()


def save_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    base = path.parent
    entries = []
    for inst in manifest.instances:
        program = inst.program_path or inst.image_path.parent / "program.nc"
        truth = inst.truth_path or inst.image_path.parent / "truth.json"
        entries.append({
            "id": inst.id,
            "scenario": inst.scenario,
            "indicators": inst.indicators.short(),
            "program": _rel(program, base),
            "image": _rel(inst.image_path, base),
            "truth": _rel(truth, base),
        })
    doc = {"version": manifest.version, "instances": entries}
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def load_manifest(path) -> Manifest:
    """Load a manifest, resolving paths against its directory.

    Raises ManifestError for duplicate ids, missing files or malformed entries.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
    base = path.parent
    seen = set()
    instances = []
    for entry in doc.get("instances", []):
        iid = entry.get("id")
        if iid in seen:
            raise ManifestError(f"duplicate instance id {iid!r}")
        seen.add(iid)
        try:
            paths = {key: base / entry[key] for key in ("program", "image", "truth")}
            states = IndicatorStates.parse(entry["indicators"])
            scenario = int(entry["scenario"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"instance {iid!r}: malformed entry ({exc})") from exc
        for key, p in paths.items():
            if not p.is_file():
                raise ManifestError(f"instance {iid!r}: {key} file {p} does not exist")
        gcode = paths["program"].read_text(encoding="utf-8")
        truth = parse_report(paths["truth"].read_text(encoding="utf-8"))
        instances.append(Instance(iid, scenario, states, gcode, paths["image"], truth,
                                  paths["program"], paths["truth"]))
    return Manifest(str(doc.get("version", MANIFEST_VERSION)), tuple(instances))


def build_fewshot_pack(output_dir) -> list[FewShotExample]:
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    catalog_programs = {spec.gcode for spec in SCENARIOS}
    examples = []
    index = []
    for folder, label, flags, gcode in FEWSHOT_SPECS:
        if gcode in catalog_programs:
            raise AssertionError(f"few-shot example {folder} duplicates a catalog program")
        states = IndicatorStates.parse(flags)
        image = render_synthetic(states)
        report = verify_oracle(gcode, states)
        example = FewShotExample(gcode, image, report, label)
        d = root / folder
        d.mkdir(parents=True, exist_ok=True)
        _write_text(d / "program.nc", gcode)
        save_image(image, d / "screen.png")
        _write_text(d / "expected.json", serialize_report(report) + "\n")
        examples.append(example)
        index.append({"folder": folder, "label": label, "indicators": flags})
    _write_text(root / "pack.json", json.dumps({"version": MANIFEST_VERSION, "examples": index}, indent=2) + "\n")
    return examples


def load_fewshot_pack(directory) -> list[FewShotExample]:
    root = Path(directory)
    index_path = root / "pack.json"
    if not index_path.is_file():
        raise ManifestError(f"{root}: no pack.json index")
    doc = json.loads(index_path.read_text(encoding="utf-8"))
    examples = []
    for entry in doc["examples"]:
        d = root / entry["folder"]
        examples.append(FewShotExample(
            gcode=(d / "program.nc").read_text(encoding="utf-8"),
            image=load_image(d / "screen.png"),
            expected_report=parse_report((d / "expected.json").read_text(encoding="utf-8")),
            label=entry["label"],
        ))
    return examples
