"""Scoring predicted reports against truth.

Structural metrics compare the booleans; semantic metrics align the
natural-language lists by embedding cosine similarity and count a pair as
equivalent only when its similarity is strictly above the threshold.
"""

from __future__ import annotations

import hashlib
import math
import re
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .backend import post_json, resolve_api_key
from .errors import DimensionError, GVerifyError, ProviderError, ZeroVectorError
from .report import VerificationReport

DEFAULT_THRESHOLD = 0.80
LEXICAL_DIMENSION = 512
# Keyed BLAKE2b; changing this key changes every lexical embedding.
LEXICAL_HASH_KEY = b"gverify-lexical-v1"

CATEGORIES = ("gcode_error", "hmi_error", "combined_error", "corrections")
CATEGORY_TITLES = {
    "gcode_error": "G-Code Error",
    "hmi_error": "HMI Error",
    "combined_error": "HMI and G-Code Error",
    "corrections": "Corrections",
}
STRUCTURAL_FIELDS = ("schema_valid", "collet_clamped", "refx", "refz", "gcode_validity", "compliance")
STRUCTURAL_TITLES = {
    "schema_valid": "Schema Validity",
    "collet_clamped": "Collet clamped",
    "refx": "Ref X",
    "refz": "Ref Z",
    "gcode_validity": "G-code Validity Accuracy",
    "compliance": "Compliance Accuracy",
}
CONFIG_COLUMNS = {"zs-full": "ZS Full", "zs-cluster": "ZS +Clust",
                  "fs-full": "FS Full", "fs-cluster": "FS +Clust"}


def category_items(report: VerificationReport) -> dict[str, tuple[str, ...]]:
    return {
        "gcode_error": report.gcode_validity.errors,
        "hmi_error": report.slots.hmi_issues,
        "combined_error": report.compliance.errors,
        "corrections": report.corrections,
    }


# -- vectors ---------------------------------------------------------------

def cosine(u, v) -> float:
    """Cosine similarity, computed with exactly rounded sums so results do not
    depend on the BLAS build."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = math.sqrt(math.fsum(u * u))
    nv = math.sqrt(math.fsum(v * v))
    if nu == 0 or nv == 0:
        raise ZeroVectorError("cosine of a zero vector is undefined")
    return max(-1.0, min(1.0, math.fsum(u * v) / (nu * nv)))


_TOKEN = re.compile(r"[^\W_]+")


def lexical_tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _bucket(token: str, dimension: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=LEXICAL_HASH_KEY).digest()
    return int.from_bytes(digest, "big") % dimension


def embed_lexical(text: str, dimension: int = LEXICAL_DIMENSION) -> np.ndarray:
    """Hashed term-frequency vector, L2-normalised; no tokens gives the zero vector."""
    vec = np.zeros(dimension, dtype=np.float64)
    for token in lexical_tokens(text):
        vec[_bucket(token, dimension)] += 1.0
    norm = math.sqrt(math.fsum(vec * vec))
    return vec / norm if norm else vec


class EmbeddingProvider:
    kind = "abstract"
    dimension = 0
    model_name = ""

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        raise NotImplementedError


class LexicalEmbedding(EmbeddingProvider):
    kind = "lexical"

    def __init__(self, dimension: int = LEXICAL_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, texts):
        return [embed_lexical(t, self.dimension) for t in texts]


class RemoteEmbedding(EmbeddingProvider):
    """OpenAI-style ``/embeddings`` client with a per-text cache."""

    kind = "remote"

    def __init__(self, endpoint: str, model_name: str = "text-embedding-3-small",
                 api_key: Optional[str] = None, timeout: float = 60.0, retries: int = 3,
                 backoff_base: float = 1.0, client=None, sleep=None):
        self.endpoint = endpoint.rstrip("/")
        self.model_name = model_name
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff_base = backoff_base
        self.client = client
        self.sleep = sleep
        self.dimension = 0
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts):
        missing = list(dict.fromkeys(t for t in texts if t not in self._cache))
        if missing:
            try:
                data = post_json(f"{self.endpoint}/embeddings",
                                 {"model": self.model_name, "input": missing},
                                 resolve_api_key(self.api_key), timeout=self.timeout,
                                 retries=self.retries, backoff_base=self.backoff_base,
                                 client=self.client, sleep=self.sleep or time.sleep)
                rows = sorted(data["data"], key=lambda r: r.get("index", 0))
                vectors = [np.asarray(r["embedding"], dtype=np.float64) for r in rows]
            except GVerifyError as exc:
                raise ProviderError(str(exc)) from exc
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderError(f"malformed embeddings response: {exc}") from exc
            if len(vectors) != len(missing):
                raise ProviderError(f"asked for {len(missing)} embeddings, got {len(vectors)}")
            for text, vec in zip(missing, vectors):
                norm = np.linalg.norm(vec)
                self._cache[text] = vec / norm if norm else vec
                self.dimension = vec.shape[0]
        return [self._cache[t] for t in texts]


# -- semantic matching -----------------------------------------------------

@dataclass(frozen=True)
class MatchPair:
    pred_index: int
    truth_index: int
    similarity: float
    matched: bool


@dataclass(frozen=True)
class SemanticScore:
    match_rate: float
    avg_similarity: float


def _similarity(u: np.ndarray, v: np.ndarray) -> float:
    try:
        return cosine(u, v)
    except ZeroVectorError:
        return 0.0


def similarity_matrix(pred: Sequence[str], truth: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    vectors = provider.embed(list(pred) + list(truth))
    pv, tv = vectors[:len(pred)], vectors[len(pred):]
    return np.array([[_similarity(p, t) for t in tv] for p in pv], dtype=np.float64).reshape(len(pred), len(truth))


def greedy_pairs(sims: np.ndarray, threshold: float) -> list[MatchPair]:
    """Repeatedly take the most similar unused pair; ties go to lower indices."""
    order = sorted(((float(sims[i, j]), i, j) for i in range(sims.shape[0]) for j in range(sims.shape[1])),
                   key=lambda c: (-c[0], c[1], c[2]))
    used_p, used_t = set(), set()
    pairs = []
    for sim, i, j in order:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        pairs.append(MatchPair(i, j, sim, sim > threshold))
    return pairs


def score_pairs(pairs: Iterable[MatchPair], n_pred: int, n_truth: int) -> SemanticScore:
    if n_pred == 0 and n_truth == 0:
        return SemanticScore(1.0, 1.0)
    matched = [p.similarity for p in pairs if p.matched]
    if not matched:
        return SemanticScore(0.0, 0.0)
    return SemanticScore(len(matched) / max(n_pred, n_truth), math.fsum(matched) / len(matched))


def semantic_match(pred_list: Sequence[str], truth_list: Sequence[str], provider: EmbeddingProvider,
                   threshold: float = DEFAULT_THRESHOLD) -> tuple[float, float, list[MatchPair]]:
    """Align two lists of sentences; returns (match_rate, avg similarity of matches, pairs).

    Both lists empty counts as full agreement; exactly one empty scores zero.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    if not pred_list or not truth_list:
        score = score_pairs((), len(pred_list), len(truth_list))
        return score.match_rate, score.avg_similarity, []
    pairs = greedy_pairs(similarity_matrix(pred_list, truth_list, provider), threshold)
    score = score_pairs(pairs, len(pred_list), len(truth_list))
    return score.match_rate, score.avg_similarity, pairs


# -- per-instance and run-level results --------------------------------------

@dataclass(frozen=True)
class StructuralRecord:
    instance_id: str
    schema_valid: bool
    collet_clamped: bool
    refx: bool
    refz: bool
    gcode_validity: bool
    compliance: bool


def structural_compare(pred, truth: VerificationReport, instance_id: str = "") -> StructuralRecord:
    """Field-wise correctness; anything that is not a report scores zero everywhere."""
    if not isinstance(pred, VerificationReport):
        return StructuralRecord(instance_id, False, False, False, False, False, False)
    return StructuralRecord(
        instance_id,
        True,
        pred.slots.collet_clamped == truth.slots.collet_clamped,
        pred.slots.refx == truth.slots.refx,
        pred.slots.refz == truth.slots.refz,
        pred.gcode_validity.valid == truth.gcode_validity.valid,
        pred.compliance.consistent == truth.compliance.consistent,
    )


@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    structural: StructuralRecord
    semantic: Mapping[str, SemanticScore]
    note: str = ""


def evaluate_instance(pred, truth: VerificationReport, provider: EmbeddingProvider,
                      threshold: float = DEFAULT_THRESHOLD, instance_id: str = "",
                      note: str = "") -> InstanceResult:
    structural = structural_compare(pred, truth, instance_id)
    if not isinstance(pred, VerificationReport):
        semantic = {c: SemanticScore(0.0, 0.0) for c in CATEGORIES}
    else:
        p_items, t_items = category_items(pred), category_items(truth)
        semantic = {}
        for cat in CATEGORIES:
            rate, avg, _ = semantic_match(p_items[cat], t_items[cat], provider, threshold)
            semantic[cat] = SemanticScore(rate, avg)
    return InstanceResult(instance_id, structural, semantic, note)


def display(value: Union[float, Decimal], places: int = 3) -> str:
    """Round half-up for display (0.6875 -> '0.688')."""
    d = value if isinstance(value, Decimal) else Decimal(repr(float(value)))
    return str(d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class StructuralMetrics:
    n_instances: int
    correct: Mapping[str, int]

    def accuracy(self, field_name: str) -> float:
        return self.correct[field_name] / self.n_instances

    def exact(self, field_name: str) -> Decimal:
        return Decimal(self.correct[field_name]) / Decimal(self.n_instances)

    def display(self, field_name: str) -> str:
        return display(self.exact(field_name))

    @property
    def schema_validity(self) -> float:
        return self.accuracy("schema_valid")

    @property
    def acc_collet(self) -> float:
        return self.accuracy("collet_clamped")

    @property
    def acc_refx(self) -> float:
        return self.accuracy("refx")

    @property
    def acc_refz(self) -> float:
        return self.accuracy("refz")

    @property
    def acc_gcode_validity(self) -> float:
        return self.accuracy("gcode_validity")

    @property
    def acc_compliance(self) -> float:
        return self.accuracy("compliance")


@dataclass(frozen=True)
class RunSummary:
    config_name: str
    structural: StructuralMetrics
    semantic: Mapping[str, SemanticScore]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        s = self.structural
        return {
            "config": self.config_name,
            "n_instances": s.n_instances,
            "structural": {f: {"correct": s.correct[f], "accuracy": s.display(f)} for f in STRUCTURAL_FIELDS},
            "semantic": {c: {"match_rate": display(self.semantic[c].match_rate),
                             "avg_similarity": display(self.semantic[c].avg_similarity)}
                         for c in CATEGORIES},
            "notes": list(self.notes),
        }


def summarize_run(records: Sequence[InstanceResult], config=None) -> RunSummary:
    """Aggregate per-instance results; semantic scores are macro-averaged over instances."""
    if not records:
        raise ValueError("no records to summarize")
    ids = [r.instance_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("instance ids must be unique")
    ordered = sorted(records, key=lambda r: r.instance_id)
    n = len(ordered)
    correct = {f: sum(bool(getattr(r.structural, f)) for r in ordered) for f in STRUCTURAL_FIELDS}
    semantic = {
        c: SemanticScore(math.fsum(r.semantic[c].match_rate for r in ordered) / n,
                         math.fsum(r.semantic[c].avg_similarity for r in ordered) / n)
        for c in CATEGORIES
    }
    notes = tuple(f"{r.instance_id}: {r.note}" for r in ordered if r.note)
    name = getattr(config, "name", None) or (config if isinstance(config, str) else "")
    return RunSummary(name, StructuralMetrics(n, correct), semantic, notes)


def _table(title: str, rows: list[tuple[str, list[str]]], columns: list[str],
           first: str = "Metric") -> str:
    head = [first] + columns
    body = [[label] + cells for label, cells in rows]
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]

    def fmt(row):
        return "  ".join(cell.ljust(widths[0]) if i == 0 else cell.rjust(widths[i])
                         for i, cell in enumerate(row)).rstrip()

    rule = "-" * len(fmt(head))
    return "\n".join([title, rule, fmt(head), rule] + [fmt(r) for r in body] + [rule])


def render_tables(summaries: Mapping[str, RunSummary]) -> str:
    """Plain-text structural, cosine-similarity and match-rate tables, one column per config."""
    names = [n for n in CONFIG_COLUMNS if n in summaries] + sorted(n for n in summaries if n not in CONFIG_COLUMNS)
    columns = [CONFIG_COLUMNS.get(n, n) for n in names]
    structural = [(STRUCTURAL_TITLES[f], [summaries[n].structural.display(f) for n in names])
                  for f in STRUCTURAL_FIELDS]
    cos = [(CATEGORY_TITLES[c], [display(summaries[n].semantic[c].avg_similarity) for n in names])
           for c in CATEGORIES]
    rate = [(CATEGORY_TITLES[c], [display(summaries[n].semantic[c].match_rate) for n in names])
            for c in CATEGORIES]
    return "\n\n".join([
        _table("Structural metrics", structural, columns),
        _table("Semantic cosine similarity", cos, columns, "Category"),
        _table("Semantic match rate", rate, columns, "Category"),
    ]) + "\n"
