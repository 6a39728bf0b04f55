import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ismg.field import BoundaryCondition, GridSpec

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FULL = os.environ.get("ISMG_FULL", "") not in ("", "0")


def pytest_collection_modifyitems(config, items):
    if FULL:
        return
    skip = pytest.mark.skip(reason="full-scale run; set ISMG_FULL=1")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


def walls(**sides):
    bc = {s: BoundaryCondition.wall() for s in "WESN"}
    bc.update(sides)
    return bc


def periodic_all():
    return {s: BoundaryCondition.periodic() for s in "WESN"}


# boundary layouts exercised by operator and solver tests
BC_LAYOUTS = {
    "walls": walls(),
    "open_top": walls(N=BoundaryCondition.symmetry()),
    "periodic": periodic_all(),
    "channel": {"W": BoundaryCondition.periodic(), "E": BoundaryCondition.periodic(),
                "S": BoundaryCondition.wall(), "N": BoundaryCondition.symmetry()},
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_spec(nx, ny, tile=4, layout="walls", h=1.0):
    return GridSpec(nx, ny, h, tile, dict(BC_LAYOUTS[layout]))


# acceptance criteria report: (criterion, passed, detail), printed after the run
ACCEPTANCE = []


def record_acceptance(criterion, passed, detail):
    line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
