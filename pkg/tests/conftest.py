import numpy as np
import pytest

from rissim.geometry import NodePlacement, build_layout
from rissim.radio import RadioContext


@pytest.fixture(scope="session")
def layout1():
    return build_layout(1, 500.0)


@pytest.fixture(scope="session")
def layout0():
    return build_layout(0, 500.0)


@pytest.fixture()
def ctx0(layout0):
    return RadioContext(layout=layout0, fc_ghz=2.6, seed=123)


def make_node(x, y, z, kind="UE", az=0.0, tilt=0.0, sector=0, node_id=0):
    return NodePlacement(position=np.array([x, y, z], dtype=float), kind=kind,
                         boresight_azimuth_deg=az, mech_tilt_deg=tilt,
                         sector_id=sector, node_id=node_id)


@pytest.fixture()
def node_factory():
    return make_node
