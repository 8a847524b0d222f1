"""Line-delimited record formats for frames, task samples and predictions.

Every file is UTF-8 with one JSON object per line. Writers emit keys in a
fixed order and every float with exactly 6 decimals, so output is
byte-deterministic. Readers round floats to 6 decimals on the way in, which
makes ``parse(serialize(x)) == x`` hold for everything that came from a file.
See ``docs/formats.md`` for the field reference.
"""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, List, Optional, Sequence, Union

from .model import (
    DEFAULT_CATEGORIES,
    Box2D,
    Box3D,
    Frame,
    ObjectRecord,
    Prediction,
    ScoredBox2D,
    ScoredBox3D,
    TaskSample,
    ValidationError,
    normalize_yaw,
)

FLOAT_DECIMALS = 6


class FormatError(ValueError):
    """A line is not a well-formed record."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None,
                 source: str = "<input>"):
        self.line = line
        self.field = field
        self.source = source
        where = source if line is None else f"{source}:{line}"
        if field:
            message = f"field '{field}': {message}"
        super().__init__(f"{where}: {message}")


class RecordValidationError(ValidationError):
    """A well-formed record violates a type invariant."""

    def __init__(self, message: str, record_id: Optional[str], line: Optional[int], source: str = "<input>"):
        self.line = line
        self.source = source
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}", record_id=None)
        self.record_id = record_id


# ---------------------------------------------------------------------------
# writing


def _encode(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot serialize non-finite float {value}")
        return f"{value:.{FLOAT_DECIMALS}f}"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_record(obj: dict) -> str:
    """Encode one record as a single JSON line (no trailing newline)."""
    return _encode(obj)


def dumps_document(obj: dict) -> str:
    """Encode a multi-line JSON document (manifests, reports) deterministically."""
    return _encode_pretty(obj, 0) + "\n"


def _encode_pretty(value: Any, indent: int) -> str:
    pad = "  " * (indent + 1)
    if isinstance(value, dict) and value:
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode_pretty(v, indent + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(value, (list, tuple)) and value and any(isinstance(v, (dict, list, tuple)) for v in value):
        items = [pad + _encode_pretty(v, indent + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    return _encode(value)


def box2d_to_dict(b: Box2D) -> dict:
    return {"x1": float(b.x1), "y1": float(b.y1), "x2": float(b.x2), "y2": float(b.y2)}


def box3d_to_dict(b: Box3D) -> dict:
    return {"cx": float(b.cx), "cy": float(b.cy), "cz": float(b.cz),
            "l": float(b.l), "w": float(b.w), "h": float(b.h), "yaw": float(b.yaw)}


def _opt_float(v: Optional[float]) -> Optional[float]:
    return None if v is None else float(v)


def record_to_dict(r: ObjectRecord) -> dict:
    return {
        "object_id": r.object_id,
        "source": r.source.value,
        "view": r.view,
        "category": r.category,
        "description": r.description,
        "attributes": list(r.attributes),
        "distance": _opt_float(r.distance),
        "itm_score": _opt_float(r.itm_score),
        "box2d": box2d_to_dict(r.box2d),
        "box3d": None if r.box3d is None else box3d_to_dict(r.box3d),
    }


def frame_to_dict(f: Frame) -> dict:
    return {
        "scene_id": f.scene_id,
        "frame_id": f.frame_id,
        "planning_command": f.planning_command,
        "caption": f.caption,
        "images": dict(f.images),
        "records": [record_to_dict(r) for r in f.records],
    }


def sample_to_dict(s: TaskSample) -> dict:
    return {
        "sample_id": s.sample_id,
        "task": s.task.value,
        "view": s.view,
        "category": s.category,
        "prompt": s.prompt,
        "answer": s.answer,
        "target_boxes_2d": [box2d_to_dict(b) for b in s.target_boxes_2d],
        "target_boxes_3d": [box3d_to_dict(b) for b in s.target_boxes_3d],
    }


def prediction_to_dict(p: Prediction) -> dict:
    return {
        "sample_id": p.sample_id,
        "text": p.text,
        "boxes_2d": [{"box": box2d_to_dict(b.box), "confidence": float(b.confidence)} for b in p.boxes_2d],
        "boxes_3d": [{"box": box3d_to_dict(b.box), "category": b.category, "confidence": float(b.confidence)}
                     for b in p.boxes_3d],
    }


def _serialize(items, to_dict) -> str:
    return "".join(dumps_record(to_dict(x)) + "\n" for x in items)


def serialize_frames(frames: Iterable[Frame]) -> str:
    return _serialize(frames, frame_to_dict)


def serialize_samples(samples: Iterable[TaskSample]) -> str:
    return _serialize(samples, sample_to_dict)


def serialize_predictions(preds: Iterable[Prediction]) -> str:
    return _serialize(preds, prediction_to_dict)


# ---------------------------------------------------------------------------
# reading


class _Fields:
    """Typed access to one decoded JSON object, with located errors."""

    def __init__(self, data: Any, line: int, source: str, path: str = ""):
        if not isinstance(data, dict):
            raise FormatError("expected an object", line, path or None, source)
        self.data = data
        self.line = line
        self.source = source
        self.path = path

    def _name(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def _err(self, key: str, msg: str) -> FormatError:
        return FormatError(msg, self.line, self._name(key), self.source)

    def raw(self, key: str, optional: bool = False) -> Any:
        if key not in self.data:
            if optional:
                return None
            raise self._err(key, "missing")
        return self.data[key]

    def str(self, key: str, optional: bool = False) -> Optional[str]:
        v = self.raw(key, optional)
        if v is None and optional:
            return None
        if not isinstance(v, str):
            raise self._err(key, f"expected a string, got {type(v).__name__}")
        return v

    def num(self, key: str, optional: bool = False) -> Optional[float]:
        v = self.raw(key, optional)
        if v is None and optional:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self._err(key, f"expected a number, got {type(v).__name__}")
        v = float(v)
        if not math.isfinite(v):
            raise self._err(key, "expected a finite number")
        return round(v, FLOAT_DECIMALS)

    def list(self, key: str, optional: bool = False) -> list:
        v = self.raw(key, optional)
        if v is None and optional:
            return []
        if not isinstance(v, list):
            raise self._err(key, f"expected a list, got {type(v).__name__}")
        return v

    def obj(self, key: str, optional: bool = False) -> Optional["_Fields"]:
        v = self.raw(key, optional)
        if v is None and optional:
            return None
        return _Fields(v, self.line, self.source, self._name(key))

    def sub(self, value: Any, key: str) -> "_Fields":
        return _Fields(value, self.line, self.source, self._name(key))


def canonical_yaw(yaw: float) -> float:
    """Normalize to (-pi, pi] and round to the serialized precision, stably."""
    for _ in range(4):
        nxt = round(normalize_yaw(yaw), FLOAT_DECIMALS)
        if nxt == yaw:
            break
        yaw = nxt
    return yaw


def _box2d(f: _Fields) -> Box2D:
    return Box2D(f.num("x1"), f.num("y1"), f.num("x2"), f.num("y2"))


def _box3d(f: _Fields) -> Box3D:
    return Box3D(f.num("cx"), f.num("cy"), f.num("cz"), f.num("l"), f.num("w"), f.num("h"),
                 canonical_yaw(f.num("yaw")))


def _check_category(cat: str, categories: Optional[Sequence[str]], rid: str, line: int, source: str) -> None:
    if categories is not None and cat not in categories:
        raise RecordValidationError(f"{rid}: category {cat!r} not in the configured set", rid, line, source)


def _object_record(f: _Fields, categories, source: str) -> ObjectRecord:
    rid = f.str("object_id")
    box3d_f = f.obj("box3d", optional=True)
    attrs = f.list("attributes", optional=True)
    for i, a in enumerate(attrs):
        if not isinstance(a, str):
            raise f._err(f"attributes[{i}]", "expected a string")
    rec = _wrap(lambda: ObjectRecord(
        object_id=rid,
        source=f.str("source"),
        view=f.str("view"),
        box2d=_box2d(f.obj("box2d")),
        category=f.str("category"),
        description=f.str("description", optional=True) or "",
        attributes=tuple(attrs),
        box3d=None if box3d_f is None else _box3d(box3d_f),
        distance=f.num("distance", optional=True),
        itm_score=f.num("itm_score", optional=True),
    ), f, rid, source)
    _check_category(rec.category, categories, rid, f.line, source)
    return rec


def _lines(stream: Union[str, Iterable[str]]):
    if isinstance(stream, str):
        stream = stream.splitlines()
    for lineno, line in enumerate(stream, start=1):
        if line.strip():
            yield lineno, line


def _decode(line: str, lineno: int, source: str) -> Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc.msg} at column {exc.colno})", lineno, None, source) from None


def _wrap(build, f: _Fields, rid: str, source: str):
    try:
        return build()
    except (FormatError, RecordValidationError):
        raise
    except ValidationError as exc:
        raise RecordValidationError(f"{rid}: {exc}", rid, f.line, source) from exc
    except ValueError as exc:
        # enum coercion of unknown source/task names
        raise RecordValidationError(f"{rid}: {exc}", rid, f.line, source) from exc


def parse_frames(stream: Union[str, Iterable[str]], categories: Optional[Sequence[str]] = DEFAULT_CATEGORIES,
                 source: str = "<frames>") -> List[Frame]:
    """Parse a frame file, one frame per line, in input order.

    Raises ``FormatError`` for malformed lines (naming line and field) and
    ``RecordValidationError`` for invariant violations (naming the record).
    """
    frames = []
    for lineno, line in _lines(stream):
        f = _Fields(_decode(line, lineno, source), lineno, source)
        fid = f.str("frame_id")
        images = f.obj("images")
        for view, path in images.data.items():
            if not isinstance(path, str):
                raise images._err(view, "expected a string path")
        records = []
        for i, item in enumerate(f.list("records", optional=True)):
            rf = f.sub(item, f"records[{i}]")
            records.append(_object_record(rf, categories, source))
        frames.append(_wrap(lambda: Frame(
            scene_id=f.str("scene_id"),
            frame_id=fid,
            images=tuple(images.data.items()),
            planning_command=f.str("planning_command"),
            records=tuple(records),
            caption=f.str("caption", optional=True),
        ), f, fid, source))
    return frames


def parse_samples(stream: Union[str, Iterable[str]], source: str = "<samples>") -> List[TaskSample]:
    samples = []
    for lineno, line in _lines(stream):
        f = _Fields(_decode(line, lineno, source), lineno, source)
        sid = f.str("sample_id")
        samples.append(_wrap(lambda: TaskSample(
            sample_id=sid,
            task=f.str("task"),
            view=f.str("view"),
            prompt=f.str("prompt"),
            answer=f.str("answer"),
            target_boxes_2d=tuple(_box2d(f.sub(b, f"target_boxes_2d[{i}]"))
                                  for i, b in enumerate(f.list("target_boxes_2d", optional=True))),
            target_boxes_3d=tuple(_box3d(f.sub(b, f"target_boxes_3d[{i}]"))
                                  for i, b in enumerate(f.list("target_boxes_3d", optional=True))),
            category=f.str("category", optional=True),
        ), f, sid, source))
    return samples


def parse_predictions(stream: Union[str, Iterable[str]], source: str = "<predictions>") -> List[Prediction]:
    preds = []
    for lineno, line in _lines(stream):
        f = _Fields(_decode(line, lineno, source), lineno, source)
        sid = f.str("sample_id")

        def build():
            b2 = []
            for i, item in enumerate(f.list("boxes_2d", optional=True)):
                bf = f.sub(item, f"boxes_2d[{i}]")
                conf = bf.num("confidence", optional=True)
                b2.append(ScoredBox2D(_box2d(bf.obj("box")), 1.0 if conf is None else conf))
            b3 = []
            for i, item in enumerate(f.list("boxes_3d", optional=True)):
                bf = f.sub(item, f"boxes_3d[{i}]")
                conf = bf.num("confidence", optional=True)
                b3.append(ScoredBox3D(_box3d(bf.obj("box")), bf.str("category"), 1.0 if conf is None else conf))
            return Prediction(sid, f.str("text", optional=True), tuple(b3), tuple(b2))

        preds.append(_wrap(build, f, sid, source))
    return preds
