"""Command-line entry point.

Exit codes: 0 clean, 2 defects found, 1 operational error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .backend import (DEFAULT_ENDPOINT, ENDPOINT_ENV, RunConfig, build_messages, call_model,
                      extract_report)
from .dataset import build_catalog, build_fewshot_pack, load_fewshot_pack, load_manifest
from .errors import GVerifyError
from .evaluation import LexicalEmbedding, RemoteEmbedding, render_tables
from .report import serialize_report
from .runner import evaluate_predictions, expand_configs, run_batch
from .vision import BBoxPct, debug_overlay, load_image, save_image

EXIT_OK, EXIT_ERROR, EXIT_DEFECT, EXIT_USAGE = 0, 1, 2, 64

VIEW_FLAGS = {"full": "full", "full+cluster": "full_plus_cluster"}

log = logging.getLogger("gverify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bbox(text: str) -> BBoxPct:
    try:
        return BBoxPct.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _threshold(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("threshold must be in (0, 1)")
    return value


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["oracle", "mock", "remote"])
    p.add_argument("--bbox", type=_bbox, help="cluster crop as left,top,width,height in percent")
    p.add_argument("--examples", type=Path, help="few-shot pack directory")
    p.add_argument("--recordings", type=Path, help="mock backend recordings directory")
    p.add_argument("--model", help="remote model name")
    p.add_argument("--endpoint", help=f"remote API base URL (default ${ENDPOINT_ENV} or {DEFAULT_ENDPOINT})")
    p.add_argument("--max-parallel", type=int)
    p.add_argument("--max-feed", type=float)
    p.add_argument("--config", type=Path, help="JSON file with RunConfig fields; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gverify", description="Verify lathe G-code against HMI screenshots.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="verify one program and screenshot")
    p.add_argument("gcode", type=Path)
    p.add_argument("image", type=Path)
    p.add_argument("--shots", choices=["zero", "few"])
    p.add_argument("--view", choices=sorted(VIEW_FLAGS))
    p.add_argument("--overlay", type=Path, help="write a debug overlay PNG of the cluster crop region")
    _add_run_flags(p)

    p = sub.add_parser("gen", help="generate the scenario catalog and/or few-shot pack")
    p.add_argument("output_dir", type=Path)
    p.add_argument("--catalog", action="store_true")
    p.add_argument("--fewshot", action="store_true")

    p = sub.add_parser("batch", help="run all manifest instances under preset configurations")
    p.add_argument("manifest", type=Path)
    p.add_argument("--configs", default="all", help="comma list of zs-full,zs-cluster,fs-full,fs-cluster or 'all'")
    p.add_argument("--out", type=Path, help="predictions directory (default: <manifest dir>/../predictions)")
    _add_run_flags(p)

    p = sub.add_parser("eval", help="score predictions against the manifest truths")
    p.add_argument("pred_dir", type=Path)
    p.add_argument("manifest", type=Path)
    p.add_argument("--embeddings", choices=["lexical", "remote"], default="lexical")
    p.add_argument("--embedding-model", default="text-embedding-3-small")
    p.add_argument("--endpoint")
    p.add_argument("--threshold", type=_threshold, default=0.80)
    p.add_argument("--out", type=Path, help="where to write summary files (default: pred_dir)")
    return parser


def _load_config_file(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if isinstance(doc.get("cluster_bbox"), str):
        doc["cluster_bbox"] = BBoxPct.parse(doc["cluster_bbox"])
    elif isinstance(doc.get("cluster_bbox"), list):
        doc["cluster_bbox"] = BBoxPct(*doc["cluster_bbox"])
    if doc.get("recordings_dir") is not None:
        doc["recordings_dir"] = Path(doc["recordings_dir"])
    return doc


def _run_settings(args) -> dict:
    settings = {"endpoint": os.environ.get(ENDPOINT_ENV, DEFAULT_ENDPOINT)}
    settings.update(_load_config_file(args.config))
    flag_map = {"backend": "backend", "bbox": "cluster_bbox", "recordings": "recordings_dir",
                "model": "model_name", "endpoint": "endpoint", "max_parallel": "max_parallel",
                "max_feed": "max_feed"}
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            settings[key] = value
    return settings


def cmd_verify(args) -> int:
    settings = _run_settings(args)
    if args.shots:
        settings["shots"] = args.shots
    if args.view:
        settings["view_mode"] = VIEW_FLAGS[args.view]
    config = RunConfig(**settings)
    if config.shots == "few" and args.examples is None:
        raise UsageError("--shots few needs --examples DIR")

    gcode = args.gcode.read_bytes().decode("utf-8")
    image = load_image(args.image)
    examples = load_fewshot_pack(args.examples) if config.shots == "few" else []
    if args.overlay is not None:
        save_image(debug_overlay(image, [config.cluster_bbox]), args.overlay)

    raw = call_model(build_messages(config, gcode, image, examples), config)
    result = extract_report(raw)
    if not hasattr(result, "slots"):
        sys.stderr.write(f"model output failed schema validation: {result.detail}\n")
        for violation in result.verdict.violations:
            sys.stderr.write(f"  {violation}\n")
        sys.stdout.write(raw + "\n")
        return EXIT_ERROR
    sys.stdout.write(serialize_report(result) + "\n")
    clean = result.gcode_validity.valid and result.compliance.consistent
    return EXIT_OK if clean else EXIT_DEFECT


def cmd_gen(args) -> int:
    do_catalog = args.catalog or not args.fewshot
    do_fewshot = args.fewshot or not args.catalog
    if do_catalog:
        manifest = build_catalog(args.output_dir / "catalog")
        print(f"catalog: {len(manifest.instances)} instances in {args.output_dir / 'catalog'}")
    if do_fewshot:
        pack = build_fewshot_pack(args.output_dir / "fewshot")
        print(f"fewshot: {len(pack)} examples in {args.output_dir / 'fewshot'}")
    return EXIT_OK


def cmd_batch(args) -> int:
    try:
        names = expand_configs(args.configs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    settings = _run_settings(args)
    manifest = load_manifest(args.manifest)
    configs = [RunConfig.preset(n, **settings) for n in names]

    examples = []
    if any(c.shots == "few" for c in configs):
        pack_dir = args.examples or args.manifest.parent.parent / "fewshot"
        if not (pack_dir / "pack.json").is_file():
            raise UsageError(f"few-shot configs need a pack; none at {pack_dir} (use --examples)")
        examples = load_fewshot_pack(pack_dir)

    out = args.out or args.manifest.parent.parent / "predictions"
    preds = run_batch(manifest, configs, out, examples)
    ok = sum(p.status == "ok" for p in preds)
    for p in preds:
        if p.status != "ok":
            print(f"{p.config}/{p.instance_id}: {p.error}", file=sys.stderr)
    print(f"{ok}/{len(preds)} predictions completed in {out}")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.embeddings == "remote":
        endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV, DEFAULT_ENDPOINT)
        provider = RemoteEmbedding(endpoint, args.embedding_model)
    else:
        provider = LexicalEmbedding()
    if not args.pred_dir.is_dir():
        raise UsageError(f"{args.pred_dir} is not a directory")
    summaries = evaluate_predictions(args.pred_dir, manifest, provider, args.threshold, args.out)
    out = args.out or args.pred_dir
    sys.stdout.write(render_tables(summaries))
    for name, summary in summaries.items():
        for note in summary.notes:
            print(f"[{name}] {note}")
    print(f"summary written to {out}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "gen": cmd_gen, "batch": cmd_batch, "eval": cmd_eval}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gverify: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GVerifyError, OSError, ValueError) as exc:
        print(f"gverify: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
