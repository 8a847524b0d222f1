"""Toolkit configuration.

One JSON document holds every threshold, weight and template. Loading is
strict: every key of the default document must be present, so the values
that produced an artifact are always explicit. ``default_config()`` returns
the shipped defaults.
"""

from __future__ import annotations

import copy
import json
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .loss import LossWeights
from .model import Task

PLACEHOLDERS = frozenset(
    {"view", "category", "box2d", "description", "distance", "attributes", "command", "boxes3d", "count", "caption"}
)


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"config key '{key}': {message}" if key else message)


@dataclass(frozen=True)
class Template:
    prompt: str
    answer: str


@dataclass(frozen=True)
class PipelineConfig:
    dedup_iou_thresh: float
    itm_thresh: float
    templates: Mapping[Task, Tuple[Template, ...]]
    seed: int
    categories: Tuple[str, ...]
    image_width: float
    image_height: float

    def __post_init__(self):
        for key in ("dedup_iou_thresh", "itm_thresh"):
            v = getattr(self, key)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"must be in (0, 1), got {v}", f"pipeline.{key}")
        for task in Task:
            if not self.templates.get(task):
                raise ConfigError("needs at least one template", f"pipeline.templates.{task.value}")
        for task, temps in self.templates.items():
            for i, t in enumerate(temps):
                for part in (t.prompt, t.answer):
                    _check_placeholders(part, f"pipeline.templates.{task.value}[{i}]")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ConfigError("image size must be positive", "image")


def _check_placeholders(text: str, key: str) -> None:
    try:
        names = [f for _, f, _, _ in string.Formatter().parse(text) if f is not None]
    except ValueError as exc:
        raise ConfigError(f"bad template {text!r}: {exc}", key) from None
    for name in names:
        if name not in PLACEHOLDERS:
            raise ConfigError(f"undefined placeholder {{{name}}} in {text!r}", key)


@dataclass(frozen=True)
class EvalConfig:
    pr_ks: Tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    map_dist_thresh: float = 0.5
    f1_iou_thresh_3d: float = 0.25
    f1_iou_thresh_2d: float = 0.5
    bleu_max_n: int = 4
    bleu_smoothing: float = 0.0
    rouge_beta: float = 1.2
    cider_max_n: int = 4
    cider_sigma: float = 6.0

    def __post_init__(self):
        ks = self.pr_ks
        if not ks or any(k <= 0 for k in ks) or list(ks) != sorted(ks):
            raise ConfigError(f"must be positive and sorted, got {list(ks)}", "eval.pr_ks")
        for key in ("f1_iou_thresh_3d", "f1_iou_thresh_2d"):
            if not 0.0 < getattr(self, key) < 1.0:
                raise ConfigError(f"must be in (0, 1), got {getattr(self, key)}", f"eval.{key}")
        for key in ("map_dist_thresh", "rouge_beta", "cider_sigma"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"must be positive, got {getattr(self, key)}", f"eval.{key}")
        for key in ("bleu_max_n", "cider_max_n"):
            if getattr(self, key) < 1:
                raise ConfigError(f"must be >= 1, got {getattr(self, key)}", f"eval.{key}")
        if self.bleu_smoothing < 0:
            raise ConfigError(f"must be >= 0, got {self.bleu_smoothing}", "eval.bleu_smoothing")


@dataclass(frozen=True)
class EndpointConfig:
    url: Optional[str] = None
    model: str = "gemini-pro"
    api_key_env: str = "DRIVEKIT_API_KEY"
    max_attempts: int = 3
    backoff_seconds: float = 1.0
    max_in_flight: int = 4
    timeout_seconds: float = 60.0

    def __post_init__(self):
        for key in ("max_attempts", "max_in_flight"):
            if getattr(self, key) < 1:
                raise ConfigError(f"must be >= 1, got {getattr(self, key)}", f"endpoint.{key}")
        if self.backoff_seconds < 0 or self.timeout_seconds <= 0:
            raise ConfigError("backoff must be >= 0 and timeout > 0", "endpoint")


@dataclass(frozen=True)
class Config:
    raw: Dict[str, Any]
    pipeline: PipelineConfig
    eval: EvalConfig
    loss: LossWeights
    endpoint: EndpointConfig

    @property
    def seed(self) -> int:
        return self.pipeline.seed

    def with_seed(self, seed: int) -> "Config":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return config_from_dict(raw)


def default_config_dict() -> Dict[str, Any]:
    text = resources.files("drivekit").joinpath("data/default_config.json").read_text(encoding="utf-8")
    return json.loads(text)


def default_config() -> Config:
    return config_from_dict(default_config_dict())


def _require(raw: Any, schema: Any, path: str) -> None:
    """Every key in the default document must exist in ``raw``."""
    if isinstance(schema, dict) and path != "pipeline.templates":
        if not isinstance(raw, dict):
            raise ConfigError("expected an object", path or "<root>")
        for key, sub in schema.items():
            name = f"{path}.{key}" if path else key
            if key not in raw:
                raise ConfigError("missing", name)
            _require(raw[key], sub, name)


def config_from_dict(raw: Dict[str, Any]) -> Config:
    _require(raw, default_config_dict(), "")
    try:
        p = raw["pipeline"]
        templates = {}
        for name, items in p["templates"].items():
            try:
                task = Task(name)
            except ValueError:
                raise ConfigError(f"unknown task kind {name!r}", f"pipeline.templates.{name}") from None
            templates[task] = tuple(Template(str(t["prompt"]), str(t["answer"])) for t in items)
        pipeline = PipelineConfig(
            dedup_iou_thresh=float(p["dedup_iou_thresh"]),
            itm_thresh=float(p["itm_thresh"]),
            templates=templates,
            seed=int(raw["seed"]),
            categories=tuple(raw["categories"]),
            image_width=float(raw["image"]["width"]),
            image_height=float(raw["image"]["height"]),
        )
        e = raw["eval"]
        ev = EvalConfig(
            pr_ks=tuple(float(k) for k in e["pr_ks"]),
            map_dist_thresh=float(e["map_dist_thresh"]),
            f1_iou_thresh_3d=float(e["f1_iou_thresh_3d"]),
            f1_iou_thresh_2d=float(e["f1_iou_thresh_2d"]),
            bleu_max_n=int(e["bleu_max_n"]),
            bleu_smoothing=float(e["bleu_smoothing"]),
            rouge_beta=float(e["rouge_beta"]),
            cider_max_n=int(e["cider_max_n"]),
            cider_sigma=float(e["cider_sigma"]),
        )
        lw = raw["loss"]
        try:
            loss = LossWeights(float(lw["lam"]), float(lw["gamma"]), float(lw["focal_alpha"]), float(lw["focal_gamma"]))
        except ValueError as exc:
            raise ConfigError(str(exc), "loss") from None
        ep = raw["endpoint"]
        endpoint = EndpointConfig(
            url=ep["url"],
            model=str(ep["model"]),
            api_key_env=str(ep["api_key_env"]),
            max_attempts=int(ep["max_attempts"]),
            backoff_seconds=float(ep["backoff_seconds"]),
            max_in_flight=int(ep["max_in_flight"]),
            timeout_seconds=float(ep["timeout_seconds"]),
        )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError("missing", str(exc.args[0])) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return Config(copy.deepcopy(raw), pipeline, ev, loss, endpoint)


def load_config(path: Union[str, Path, None]) -> Config:
    """Load a config file; ``None`` gives the shipped defaults."""
    if path is None:
        return default_config()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return config_from_dict(raw)
