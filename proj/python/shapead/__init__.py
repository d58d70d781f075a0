"""Shape derivatives of moving-domain PDE models."""

import json

from ._shapead import (
    Error,
    Mesh,
    PironneauModel,
    TubeModel,
    annulus_mesh,
    channel_mesh,
    load_mesh,
    pironneau_directions,
    record_pironneau,
    record_tube,
    tube_test_directions,
)

__all__ = [
    "Error",
    "Mesh",
    "PironneauModel",
    "TubeModel",
    "annulus_mesh",
    "channel_mesh",
    "load_mesh",
    "mesh_report",
    "pironneau_directions",
    "record_pironneau",
    "record_tube",
    "taylor",
    "tube_test_directions",
]


def mesh_report(mesh):
    return json.loads(mesh.report())


def taylor(model, directions, h0, halvings=3, second_order=True):
    """Taylor remainders and rates as a dict."""
    return json.loads(model.taylor(directions, h0, halvings, second_order))
