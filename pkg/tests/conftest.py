import json

import pytest

from drivekit.config import default_config
from drivekit.model import VIEWS, Box2D, Box3D, Frame, ObjectRecord, Source


def gt_record(oid="gt0", view="front", box=(100, 100, 300, 250), category="car", box3d=None, **kw):
    return ObjectRecord(
        object_id=oid, source=Source.GROUND_TRUTH, view=view, box2d=Box2D(*box), category=category,
        description=kw.pop("description", "a white car"), attributes=kw.pop("attributes", ("vehicle.moving",)),
        box3d=box3d or Box3D(10.0, 2.0, 0.0, 4.0, 2.0, 1.5, 0.1), distance=kw.pop("distance", 10.2), **kw)


def expert_record(oid="rt0", view="front", box=(100, 100, 300, 250), category="car", itm=0.9,
                  source=Source.REGION_TO_TEXT, **kw):
    return ObjectRecord(
        object_id=oid, source=source, view=view, box2d=Box2D(*box), category=category,
        description=kw.pop("description", "a parked white sedan"), itm_score=itm, **kw)


def make_frame(records=(), frame_id="f0", command="go_straight", caption=None):
    images = tuple((v, f"img/{v}/{frame_id}.jpg") for v in VIEWS)
    return Frame("s0", frame_id, images, command, tuple(records), caption)


@pytest.fixture
def config():
    return default_config()


@pytest.fixture
def config_path(tmp_path):
    from drivekit.config import default_config_dict
    path = tmp_path / "config.json"
    path.write_text(json.dumps(default_config_dict()))
    return path


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
