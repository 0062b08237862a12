import io

import numpy as np
import pytest

from cuspdiv import geometry, mesh as meshmod
from cuspdiv.geometry import CuspDomain
from cuspdiv.mesh import generate_graded_mesh, load_mesh, refine, save_mesh


@pytest.fixture(scope="module")
def mesh05():
    return generate_graded_mesh(CuspDomain(0.5), 0.15)


def test_mesh_area_accounts_for_tip_sliver(mesh05):
    dom = CuspDomain(0.5)
    # the omitted sliver {x < x_tip} has area 2a/(a+1) x_tip^((a+1)/a)
    sliver = dom.area() * mesh05.x_tip ** ((0.5 + 1.0) / 0.5)
    # chords of the convex arcs lie above the curve, so the polygon slightly
    # overshoots the truncated domain, by O(h^2)
    assert mesh05.area() > dom.area() - sliver - 1e-12
    assert mesh05.area() < dom.area() - sliver + 0.02


def test_min_angle_floor(mesh05):
    assert mesh05.min_angle() >= 15.0


def test_triangles_positively_oriented(mesh05):
    p = mesh05.vertices[mesh05.triangles]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    assert np.all(signed > 0.0)


def test_boundary_tags_lie_on_their_arcs(mesh05):
    dom = CuspDomain(0.5)
    for v0, v1, kind in mesh05.boundary_edges:
        for v in (v0, v1):
            x, y = mesh05.vertices[v]
            if kind == "upper-curve":
                assert abs(y - x**dom.gamma) < 1e-12
            elif kind == "lower-curve":
                assert abs(y + x**dom.gamma) < 1e-12
            elif kind == "right-edge":
                assert abs(x - 1.0) < 1e-12
            elif kind == "tip":
                assert abs(x - mesh05.x_tip) < 1e-12
            else:
                raise AssertionError(f"unknown boundary kind {kind}")


def test_boundary_edges_form_closed_loop(mesh05):
    degree = {}
    for v0, v1, _ in mesh05.boundary_edges:
        degree[v0] = degree.get(v0, 0) + 1
        degree[v1] = degree.get(v1, 0) + 1
    assert all(d == 2 for d in degree.values())


def test_refine_quadruples_and_snaps(mesh05):
    dom = CuspDomain(0.5)
    fine = refine(mesh05)
    assert fine.num_triangles == 4 * mesh05.num_triangles
    assert fine.h == mesh05.h / 2.0
    assert abs(fine.area() - mesh05.area()) < 5e-3  # curved snap adds area
    # boundary midpoints were moved onto the arcs
    for v0, v1, kind in fine.boundary_edges:
        x, y = fine.vertices[v1]
        if kind == "upper-curve":
            assert abs(y - x**dom.gamma) < 1e-12
    assert fine.min_angle() > 10.0


def test_save_load_round_trip(mesh05):
    buf = io.StringIO()
    save_mesh(mesh05, buf)
    buf.seek(0)
    back = load_mesh(buf)
    assert np.allclose(back.vertices, mesh05.vertices)
    assert np.array_equal(back.triangles, mesh05.triangles)
    assert back.boundary_edges == mesh05.boundary_edges
    assert back.alpha == mesh05.alpha
    assert back.x_tip == mesh05.x_tip


def test_x_tip_override():
    dom = CuspDomain(0.75)
    m = generate_graded_mesh(dom, 0.1, x_tip=0.02, min_angle_deg=13.0)
    assert abs(m.x_tip - 0.02) < 1e-15
    assert np.min(m.vertices[:, 0]) == pytest.approx(0.02)


def test_grading_default_follows_cusp_exponent(mesh05):
    assert mesh05.grading == pytest.approx(2.0)


def test_bad_parameters_rejected():
    dom = CuspDomain(0.5)
    with pytest.raises(ValueError):
        generate_graded_mesh(dom, 1.5)
    with pytest.raises(ValueError):
        generate_graded_mesh(dom, 0.1, grading=0.5)


def test_edges_unique_and_sorted(mesh05):
    e = mesh05.edges()
    assert np.all(e[:, 0] < e[:, 1])
    assert len(np.unique(e, axis=0)) == len(e)
    # Euler: V - E + T = 1 for a disk-like surface
    assert mesh05.num_vertices - len(e) + mesh05.num_triangles == 1
