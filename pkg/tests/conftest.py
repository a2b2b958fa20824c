from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from walkguide.geometry import CameraModel, DepthMap  # noqa: E402

_criteria: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key in report.keywords:
        if key.startswith("criterion_"):
            _criteria.setdefault(int(key.split("_")[1]), []).append(report.passed)


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.keywords[f"criterion_{marker.args[0]}"] = True


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status} ({sum(results)}/{len(results)} checks)")


@pytest.fixture
def camera640():
    return CameraModel(fx_px=500.0, fy_px=500.0, cx_px=319.5, cy_px=239.5)


@pytest.fixture
def ramp_depth():
    """Depth rising linearly from 0 m at the bottom row to 20 m at the top row."""
    h, w = 480, 640
    rows = 20.0 * (h - 1 - np.arange(h)) / (h - 1)
    return DepthMap(np.repeat(rows[:, None], w, axis=1))
