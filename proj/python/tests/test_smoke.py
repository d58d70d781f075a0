import math

import numpy as np
import pytest

import shapead


def two_cell_square():
    markers = {(0, 1): 2, (1, 2): 1, (2, 3): 1, (0, 3): 1}
    return shapead.Mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)], markers)


def test_mesh_roundtrip():
    m = two_cell_square()
    assert m.num_vertices == 4 and m.num_cells == 2
    assert m.area() == pytest.approx(1.0, abs=1e-15)
    rep = shapead.mesh_report(m)
    assert rep["facets_per_tag"] == {"1": 3, "2": 1}


def test_tube_two_cells():
    # omega = k = 0: one L2 projection step, int |grad u|^2 = 16/7.
    for variant in ("frozen", "decomposed"):
        model = shapead.record_tube(variant, T=0.1, dt=0.1, k=0.0, omega=0.0, mesh=two_cell_square())
        assert model.J == pytest.approx(16.0 / 7.0 * 0.1, rel=1e-13)


def test_tube_derivatives():
    model = shapead.record_tube("frozen", T=0.03, n_angular=16, n_radial=4)
    assert model.num_controls == 4
    g = model.derivative()
    rng = np.random.default_rng(0)
    d = [rng.standard_normal(len(v)) for v in g]
    t = model.tlm(d)
    assert abs(sum(float(a @ b) for a, b in zip(g, d)) - t) <= 1e-10 * max(1.0, abs(t))

    rep = shapead.taylor(model, shapead.tube_test_directions(model), 1e-3, 3)
    assert rep["rates_ok"], rep


def test_pironneau_value():
    model = shapead.record_pironneau("riesz-descent", n_angular=32, n_radial=8)
    assert abs(model.J - 24.3019) <= 0.1 * 24.3019
    assert model.mesh.min_quality() > 0.0


def test_errors():
    with pytest.raises(shapead.Error):
        shapead.record_tube("sideways")
    with pytest.raises(shapead.Error):
        shapead.record_tube(T=0.001, dt=0.01)
