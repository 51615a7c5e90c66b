"""Service configuration: JSON file with environment-variable overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .vision import DetectorParams

DEFAULT_THRESHOLD = 2.0
DEFAULT_MAX_UPLOAD = 8 * 1024 * 1024  # request payload cap, bytes

ENV_LISTEN = "MF_LISTEN"
ENV_DATA_DIR = "MF_DATA_DIR"
ENV_TOKENS = "MF_TOKENS"
ENV_THRESHOLD = "MF_THRESHOLD"


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8700"
    data_dir: str = "./mf-data"
    tokens_file: str = ""
    threshold: float = DEFAULT_THRESHOLD
    top_n: int = 5
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    detector: DetectorParams = field(default_factory=DetectorParams)
    model_file: str = ""   # default: <data_dir>/model.mfem
    gallery_file: str = ""  # default: <data_dir>/gallery.json

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])

    def resolved_model_file(self) -> Path:
        return Path(self.model_file) if self.model_file else Path(self.data_dir) / "model.mfem"

    def resolved_gallery_file(self) -> Path:
        return Path(self.gallery_file) if self.gallery_file else Path(self.data_dir) / "gallery.json"


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServiceConfig:
    """Read the JSON config file (if any), then apply MF_* env overrides."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path:
        raw = json.loads(Path(path).read_text())
    detector_raw = raw.pop("detector", None)
    config = ServiceConfig(**raw)
    if detector_raw:
        config.detector = DetectorParams(
            scales=tuple(detector_raw.get("scales", DetectorParams().scales)),
            edge_percentile=detector_raw.get("edge_percentile", DetectorParams().edge_percentile),
            score_threshold=detector_raw.get("score_threshold", DetectorParams().score_threshold),
            nms_overlap=detector_raw.get("nms_overlap", DetectorParams().nms_overlap),
        )
    if env.get(ENV_LISTEN):
        config.listen = env[ENV_LISTEN]
    if env.get(ENV_DATA_DIR):
        config.data_dir = env[ENV_DATA_DIR]
    if env.get(ENV_TOKENS):
        config.tokens_file = env[ENV_TOKENS]
    if env.get(ENV_THRESHOLD):
        config.threshold = float(env[ENV_THRESHOLD])
    return config
