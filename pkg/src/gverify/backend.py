"""Prompt construction and model backends (local oracle, recorded mock, remote chat API)."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import httpx
import numpy as np

from .errors import ApiError, ConfigError, MockMissError, ParseError, SchemaError, TransportError
from .gcode import ValidationLimits
from .report import SchemaVerdict, VerificationReport, parse_report, schema_text, serialize_report
from .verifier import verify_oracle
from .vision import DEFAULT_CLUSTER_BBOX, BBoxPct, crop_pct, encode_png, read_indicators

log = logging.getLogger(__name__)

USER_PROMPT = (
    "Inspect the attached HMI image and G-code using the system rules. output only one JSON "
    "object. Check three LEDs: COLLET CLAMPED, REF X, REF Z. If any LED is dark or unclear, "
    "set false and include the exact issue line. Ignore G-code spacing."
)

FEW_SHOT_GUIDE = (
    "Worked examples follow as earlier user and assistant turns. Each example shows the inputs "
    "and the correct JSON report for them. Apply the same reasoning to the final request."
)

DEFAULT_ENDPOINT = "https://api.openai.com/v1"
API_KEY_ENV = "GVERIFY_API_KEY"
ENDPOINT_ENV = "GVERIFY_ENDPOINT"

BACKENDS = ("oracle", "mock", "remote")
SHOTS = ("zero", "few")
VIEW_MODES = ("full", "full_plus_cluster")

PRESETS = {
    "zs-full": ("zero", "full"),
    "zs-cluster": ("zero", "full_plus_cluster"),
    "fs-full": ("few", "full"),
    "fs-cluster": ("few", "full_plus_cluster"),
}


def system_prompt_text() -> str:
    return resources.files("gverify").joinpath("assets/system_prompt.txt").read_text(encoding="utf-8")


@dataclass(frozen=True)
class TextPart:
    text: str
    tag: Optional[str] = None


@dataclass(frozen=True, eq=False)
class ImagePart:
    pixels: np.ndarray
    media_type: str = "image/png"
    tag: Optional[str] = None

    def png_bytes(self) -> bytes:
        return encode_png(self.pixels)

    def data_url(self) -> str:
        return f"data:{self.media_type};base64,{base64.b64encode(self.png_bytes()).decode('ascii')}"

    def pixel_digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.pixels.shape).encode())
        h.update(np.ascontiguousarray(self.pixels, dtype=np.uint8).tobytes())
        return h.hexdigest()


Part = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[Part, ...]

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ConfigError(f"unknown role {self.role!r}")
        images = [p for p in self.parts if isinstance(p, ImagePart)]
        if self.role == "system" and images:
            raise ConfigError("system messages carry text only")
        if images and not any(isinstance(p, TextPart) for p in self.parts):
            raise ConfigError("image parts need an accompanying text part")

    @property
    def text(self) -> str:
        return "\n".join(p.text for p in self.parts if isinstance(p, TextPart))

    def images(self) -> list[ImagePart]:
        return [p for p in self.parts if isinstance(p, ImagePart)]

    def to_wire(self) -> dict:
        if self.role != "user":
            return {"role": self.role, "content": self.text}
        content = []
        for part in self.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                content.append({"type": "image_url", "image_url": {"url": part.data_url()}})
        return {"role": self.role, "content": content}


@dataclass(frozen=True)
class RunConfig:
    backend: str = "oracle"
    shots: str = "zero"
    view_mode: str = "full"
    cluster_bbox: Optional[BBoxPct] = DEFAULT_CLUSTER_BBOX
    temperature: float = 0.0
    model_name: str = "gpt-4.1"
    max_parallel: int = 4
    endpoint: str = DEFAULT_ENDPOINT
    timeout: float = 60.0
    retries: int = 3
    backoff_base: float = 1.0
    recordings_dir: Optional[Path] = None
    max_feed: float = 500.0
    name: str = ""

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.shots not in SHOTS:
            raise ConfigError(f"shots must be one of {SHOTS}, got {self.shots!r}")
        if self.view_mode not in VIEW_MODES:
            raise ConfigError(f"view_mode must be one of {VIEW_MODES}, got {self.view_mode!r}")
        if self.view_mode == "full_plus_cluster" and self.cluster_bbox is None:
            raise ConfigError("full_plus_cluster needs a cluster_bbox")
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be positive")
        if self.retries < 0:
            raise ConfigError("retries must be non-negative")

    @classmethod
    def preset(cls, name: str, **overrides) -> "RunConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        shots, view = PRESETS[name]
        return cls(shots=shots, view_mode=view, name=name, **overrides)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def limits(self) -> ValidationLimits:
        return ValidationLimits(max_feed=self.max_feed)


@dataclass(frozen=True, eq=False)
class FewShotExample:
    gcode: str
    image: np.ndarray
    expected_report: VerificationReport
    label: str

    def __post_init__(self):
        text = serialize_report(self.expected_report, indent=None)
        # parse_report raises if the example answer is off-schema
        parse_report(text)


def _input_parts(gcode: str, image: np.ndarray, config: RunConfig, heading: str) -> list[Part]:
    parts: list[Part] = [
        TextPart(heading),
        TextPart("G-code:"),
        TextPart(gcode, tag="gcode"),
        TextPart("HMI screenshot (full view):"),
        ImagePart(image, tag="full"),
    ]
    if config.view_mode == "full_plus_cluster":
        parts.append(TextPart("Right-hand indicator cluster crop:"))
        parts.append(ImagePart(crop_pct(image, config.cluster_bbox), tag="cluster"))
    return parts


def build_messages(config: RunConfig, gcode: str, image: np.ndarray,
                   examples: Sequence[FewShotExample] = (),
                   schema: Optional[str] = None) -> list[ChatMessage]:
    """Assemble the system / example / request message sequence.

    Example images follow the run's view mode, so cluster runs show the
    crop for every example as well as for the request.
    """
    if config.shots == "few" and not examples:
        raise ConfigError("few-shot runs need at least one example")
    schema = schema_text() if schema is None else schema
    system = [system_prompt_text().rstrip("\n")]
    if config.shots == "few":
        system.append(FEW_SHOT_GUIDE)
    system.append("JSON schema for the output:\n" + schema.rstrip("\n"))
    messages = [ChatMessage("system", (TextPart("\n\n".join(system)),))]

    if config.shots == "few":
        for i, ex in enumerate(examples, start=1):
            heading = f"Example {i} ({ex.label})."
            messages.append(ChatMessage("user", tuple(_input_parts(ex.gcode, ex.image, config, heading))))
            messages.append(ChatMessage("assistant", (TextPart(serialize_report(ex.expected_report, indent=None)),)))

    messages.append(ChatMessage("user", tuple(_input_parts(gcode, image, config, USER_PROMPT))))
    return messages


def message_digest(messages: Sequence[ChatMessage]) -> str:
    """Content digest: text parts verbatim, images by decoded pixels."""
    h = hashlib.sha256()
    for msg in messages:
        h.update(f"<{msg.role}>".encode())
        for part in msg.parts:
            if isinstance(part, TextPart):
                h.update(b"T" + str(len(part.text)).encode() + b":" + part.text.encode("utf-8"))
            else:
                h.update(b"I:" + part.pixel_digest().encode())
    return h.hexdigest()


def recording_path(recordings_dir, digest: str) -> Path:
    return Path(recordings_dir) / f"{digest}.txt"


def record_response(recordings_dir, messages: Sequence[ChatMessage], text: str) -> Path:
    path = recording_path(recordings_dir, message_digest(messages))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _call_oracle(messages: Sequence[ChatMessage], config: RunConfig) -> str:
    request = messages[-1]
    gcode = next(p.text for p in request.parts if isinstance(p, TextPart) and p.tag == "gcode")
    full = next(p for p in request.images() if p.tag == "full")
    bbox = config.cluster_bbox or DEFAULT_CLUSTER_BBOX
    indicators = read_indicators(full.pixels, bbox)
    return serialize_report(verify_oracle(gcode, indicators, config.limits))


def _call_mock(messages: Sequence[ChatMessage], config: RunConfig) -> str:
    if config.recordings_dir is None:
        raise ConfigError("mock backend needs recordings_dir")
    digest = message_digest(messages)
    path = recording_path(config.recordings_dir, digest)
    if not path.is_file():
        raise MockMissError(digest)
    return path.read_text(encoding="utf-8")


def request_body(messages: Sequence[ChatMessage], config: RunConfig) -> dict:
    return {
        "model": config.model_name,
        "temperature": config.temperature,
        "messages": [m.to_wire() for m in messages],
    }


def post_json(url: str, body: dict, api_key: str, *, timeout: float, retries: int,
              backoff_base: float, client: Optional[httpx.Client] = None,
              sleep: Callable[[float], None] = time.sleep) -> dict:
    """POST a JSON body with bearer auth, retrying transport failures only.

    Waits ``backoff_base * 2**k`` seconds before retry ``k + 1``.
    """
    headers = {"Authorization": f"Bearer {api_key}"}
    owns_client = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        for attempt in range(retries + 1):
            try:
                resp = client.post(url, json=body, headers=headers)
                break
            except httpx.TransportError as exc:
                if attempt == retries:
                    raise TransportError(f"{url}: {exc!r} after {retries} retries") from exc
                delay = backoff_base * 2 ** attempt
                log.warning("transport error on %s (%r); retrying in %.1fs", url, exc, delay)
                sleep(delay)
    finally:
        if owns_client:
            client.close()
    if not resp.is_success:
        raise ApiError(resp.status_code, resp.text)
    try:
        return resp.json()
    except ValueError as exc:
        raise ApiError(resp.status_code, resp.text) from exc


def resolve_api_key(api_key: Optional[str] = None) -> str:
    key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
    if not key:
        raise ConfigError(f"remote calls need an API key in ${API_KEY_ENV}")
    return key


def _call_remote(messages, config: RunConfig, api_key: Optional[str],
                 client: Optional[httpx.Client], sleep: Callable[[float], None]) -> str:
    url = config.endpoint.rstrip("/") + "/chat/completions"
    data = post_json(url, request_body(messages, config), resolve_api_key(api_key),
                     timeout=config.timeout, retries=config.retries,
                     backoff_base=config.backoff_base, client=client, sleep=sleep)
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ApiError(200, json.dumps(data)[:2000]) from exc
    if not isinstance(content, str):
        raise ApiError(200, json.dumps(data)[:2000])
    return content


def call_model(messages: Sequence[ChatMessage], config: RunConfig, *,
               api_key: Optional[str] = None, client: Optional[httpx.Client] = None,
               sleep: Callable[[float], None] = time.sleep) -> str:
    if not messages or messages[0].role != "system":
        raise ConfigError("message sequence must start with a system message")
    if config.backend == "oracle":
        return _call_oracle(messages, config)
    if config.backend == "mock":
        return _call_mock(messages, config)
    return _call_remote(messages, config, api_key, client, sleep)


@dataclass(frozen=True)
class ExtractionFailure:
    verdict: SchemaVerdict
    raw_text: str
    detail: str


def extract_report(raw_text: str) -> Union[VerificationReport, ExtractionFailure]:
    try:
        return parse_report(raw_text)
    except SchemaError as exc:
        return ExtractionFailure(exc.verdict, raw_text, f"SchemaError: {exc}")
    except ParseError as exc:
        return ExtractionFailure(SchemaVerdict(False, (f"<root>: {exc}",)), raw_text, f"ParseError: {exc}")
    except Exception as exc:  # total by contract
        return ExtractionFailure(SchemaVerdict(False, (f"<root>: {exc}",)), raw_text, repr(exc))
