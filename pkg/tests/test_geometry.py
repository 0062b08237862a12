import numpy as np
import pytest

from cuspdiv import geometry
from cuspdiv.geometry import CuspDomain


def dense_boundary_distance(domain, pts, n=400_000):
    """Reference distance by dense sampling of all three boundary arcs."""
    t = np.linspace(0.0, 1.0, n)
    curve = np.column_stack([t, t**domain.gamma])
    ye = np.linspace(-1.0, 1.0, n)
    edge = np.column_stack([np.ones_like(ye), ye])
    # vectorized over points, chunked over the arc to bound memory
    best = np.full(len(pts), np.inf)
    for arc in (curve, curve * [1.0, -1.0], edge):
        for lo in range(0, n, 50_000):
            seg = arc[lo:lo + 50_000]
            d = np.hypot(pts[:, None, 0] - seg[None, :, 0],
                         pts[:, None, 1] - seg[None, :, 1]).min(axis=1)
            best = np.minimum(best, d)
    return best


@pytest.mark.parametrize("alpha", [0.5, 0.75, 1.0])
def test_distance_matches_dense_sampling(alpha):
    dom = CuspDomain(alpha)
    rng = np.random.default_rng(3)
    x = rng.uniform(0.01, 0.99, 40)
    y = rng.uniform(-1.0, 1.0, 40) * x**dom.gamma
    pts = np.column_stack([x, y])
    d = geometry.distance(dom, pts)
    ref = dense_boundary_distance(dom, pts)
    assert np.max(np.abs(d - ref)) < 5e-6  # limited by the sampling density


def test_distance_zero_on_boundary():
    dom = CuspDomain(0.5)
    t = np.linspace(0.0, 1.0, 17)
    on = np.column_stack([t, t**dom.gamma])
    assert np.max(geometry.distance(dom, on)) < 1e-12
    assert geometry.distance(dom, np.array([1.0, 0.3])) < 1e-15
    assert geometry.distance(dom, np.array([0.0, 0.0])) < 1e-15


def test_distance_is_one_lipschitz():
    dom = CuspDomain(0.75)
    rng = np.random.default_rng(11)
    p = rng.uniform([-0.5, -1.0], [1.5, 1.0], size=(300, 2))
    q = p + rng.normal(scale=0.05, size=p.shape)
    dp = geometry.distance(dom, p)
    dq = geometry.distance(dom, q)
    gap = np.hypot(*(p - q).T)
    assert np.all(np.abs(dp - dq) <= gap + 1e-12)


def test_surrogate_bounds_distance():
    # c1 * (x^(1/a) - |y|) <= dist <= (x^(1/a) - |y|) inside Omega
    dom = CuspDomain(0.5)
    lo, hi = geometry.surrogate_equivalence_constant(dom, n=2000)
    assert 0.0 < lo <= hi <= 1.0 + 1e-12


def test_surrogate_rejects_outside_points():
    dom = CuspDomain(0.5)
    with pytest.raises(ValueError):
        geometry.surrogate_distance(dom, np.array([0.5, 0.9]))


def test_contains():
    dom = CuspDomain(0.5)
    assert geometry.contains(dom, np.array([0.5, 0.1]))
    assert not geometry.contains(dom, np.array([0.5, 0.3]))
    assert not geometry.contains(dom, np.array([-0.1, 0.0]))
    # the boundary itself is excluded (strict inequalities)
    assert not geometry.contains(dom, np.array([0.5, 0.25]))


def test_area_closed_form():
    for alpha in (0.5, 0.75, 1.0):
        dom = CuspDomain(alpha)
        # 2 * integral_0^1 x^(1/alpha) dx
        x = np.linspace(0.0, 1.0, 200_001)
        num = 2.0 * np.trapezoid(x**dom.gamma, x)
        assert abs(dom.area() - num) < 1e-8


def test_boundary_measure_straight_edge():
    # a ball centered on the right edge, small enough to miss the curves,
    # meets the boundary in a diameter: measure = 2r
    dom = CuspDomain(0.5)
    m = geometry.boundary_measure(dom, np.array([1.0, 0.0]), 0.05)
    assert abs(m - 0.1) < 1e-9


def test_boundary_measure_at_tip():
    # both curved arcs enter the ball at the cusp tip: measure ~ 2r for
    # small r (the arcs are nearly flat there), and certainly in [2r, 4r]
    dom = CuspDomain(0.5)
    for r in (0.01, 0.05):
        m = geometry.boundary_measure(dom, np.array([0.0, 0.0]), r)
        assert 2.0 * r <= m <= 4.0 * r


def test_boundary_measure_requires_boundary_center():
    dom = CuspDomain(0.5)
    with pytest.raises(ValueError):
        geometry.boundary_measure(dom, np.array([0.5, 0.0]), 0.1)


def test_invalid_alpha():
    with pytest.raises(ValueError):
        CuspDomain(0.0)
    with pytest.raises(ValueError):
        CuspDomain(1.2)
