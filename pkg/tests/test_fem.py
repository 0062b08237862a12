import math

import numpy as np
import pytest
from scipy import linalg as dla

from cuspdiv import fem, weights
from cuspdiv.fem import (
    P2Space,
    assemble,
    default_ball,
    discrete_infsup,
    harmonic_ratio,
    improved_poincare_constant,
    korn_best_constant,
    pressure_lr_norm,
    solve_div_right_inverse,
    solve_stokes,
)
from cuspdiv.geometry import CuspDomain
from cuspdiv.mesh import generate_graded_mesh


@pytest.fixture(scope="module")
def mesh075():
    return generate_graded_mesh(CuspDomain(0.75), 0.25)


@pytest.fixture(scope="module")
def system075(mesh075):
    return assemble(mesh075, 0.75)


def test_p2_space_dof_bookkeeping(mesh075):
    sp = P2Space(mesh075)
    assert sp.n_dofs == mesh075.num_vertices + len(mesh075.edges())
    coords = sp.dof_coords()
    for (a, b), k in sp.edge_index.items():
        mid = 0.5 * (mesh075.vertices[a] + mesh075.vertices[b])
        assert np.allclose(coords[k], mid)
    bd = sp.boundary_dofs()
    assert len(bd) == len(set(bd))
    assert np.all(bd < sp.n_dofs)


def test_assemble_rejects_small_alpha(mesh075):
    with pytest.raises(ValueError):
        assemble(mesh075, 0.5)


def test_assembled_blocks_symmetric_and_positive(system075):
    A, Mw = system075.A, system075.Mw
    assert abs(A - A.T).max() < 1e-12
    assert abs(Mw - Mw.T).max() < 1e-12
    Af, _ = system075.restrict()
    vals = dla.eigvalsh(Af.toarray())
    assert vals[0] > 0.0          # SPD once boundary values are imposed
    assert dla.eigvalsh(Mw.toarray())[0] > 0.0


def test_rigid_rotation_has_zero_strain(mesh075):
    # u = (-y, x) is linear, so its P2 interpolant is exact and eps(u) = 0
    sp = P2Space(mesh075)
    xy = sp.dof_coords()
    coeffs = np.concatenate([-xy[:, 1], xy[:, 0]])
    quad = fem._quad_data(mesh075)
    E = fem._assemble_eps(mesh075, sp, np.ones(quad[1].shape), quad)
    energy = float(coeffs @ (E @ coeffs))
    scale = float(coeffs @ coeffs)
    assert abs(energy) < 1e-12 * scale


def test_constant_field_h1_norm(mesh075):
    sp = P2Space(mesh075)
    coeffs = np.concatenate([np.ones(sp.n_dofs), np.zeros(sp.n_dofs)])
    norm = fem.field_h1_norm(mesh075, sp, coeffs)
    assert norm == pytest.approx(math.sqrt(mesh075.area()), rel=1e-12)


def test_div_right_inverse_constraint_and_optimality(mesh075, system075):
    f = lambda p: p[:, 0]
    u, info = solve_div_right_inverse(mesh075, 0.75, f, system=system075)
    assert info["constraint_residual"] < 1e-10
    assert info["h1_norm"] > 1e-3
    # stationarity of the Lagrangian in u: A u + B' lambda = 0 on free dofs
    Af, Bf = system075.restrict()
    uf = u.coeffs[system075.free]
    grad = Af @ uf + Bf.T @ info["multiplier"]
    assert np.linalg.norm(grad) < 1e-8 * np.linalg.norm(Af @ uf)


def test_div_right_inverse_of_weighted_constant_is_zero(mesh075, system075):
    # a constant source is exactly the deflated direction: the weighted-mean
    # correction absorbs it and the minimal-energy velocity vanishes
    f = lambda p: np.ones(len(p))
    u, info = solve_div_right_inverse(mesh075, 0.75, f, system=system075)
    assert info["h1_norm"] < 1e-10
    assert info["weighted_mean_correction"] == pytest.approx(1.0, abs=1e-10)


def test_bordered_solve_weight_scaling_invariance(system075):
    # scaling the constraint rows (B, Mw -> cB, cMw) must leave u unchanged
    # and scale the pressure multiplier by 1/c
    Af, Bf = system075.restrict()
    nv = system075.mesh.num_vertices
    c_vec = np.asarray(system075.Mw @ np.ones(nv))
    rng = np.random.default_rng(2)
    g = rng.standard_normal(nv)
    g -= c_vec * (c_vec @ g) / (c_vec @ c_vec)
    u1, q1, _ = fem._bordered_solve(Af, Bf, c_vec, np.zeros(Af.shape[0]), g)
    s = 7.5
    u2, q2, _ = fem._bordered_solve(Af, s * Bf, s * c_vec,
                                    np.zeros(Af.shape[0]), s * g)
    assert np.allclose(u1, u2, atol=1e-10 * max(np.linalg.norm(u1), 1.0))
    assert np.allclose(q1, s * q2, atol=1e-10 * max(np.linalg.norm(q1), 1.0))


def dense_infsup_oracle(system):
    """Schur-complement inf-sup via an SVD projector (independent path)."""
    Af, Bf = system.restrict()
    A = Af.toarray()
    B = Bf.toarray()
    Mw = system.Mw.toarray()
    S = B @ np.linalg.solve(A, B.T)
    S = 0.5 * (S + S.T)
    c = Mw @ np.ones(len(Mw))
    P = np.eye(len(c)) - np.outer(c, c) / (c @ c)
    U, s, _ = np.linalg.svd(P)
    T = U[:, : len(c) - 1]
    vals = dla.eigh(T.T @ S @ T, T.T @ Mw @ T, eigvals_only=True)
    return math.sqrt(vals[0])


def test_discrete_infsup_matches_dense_oracle(mesh075, system075):
    got = discrete_infsup(mesh075, 0.75, system=system075)
    ref = dense_infsup_oracle(system075)
    assert got == pytest.approx(ref, rel=1e-8)
    assert 0.0 < got < 1.5


def test_discrete_infsup_rejects_oversized_problem(mesh075, system075):
    with pytest.raises(ValueError):
        discrete_infsup(mesh075, 0.75, system=system075, dense_limit=1)


def test_stokes_identities(mesh075, system075):
    f = lambda p: np.column_stack([np.ones(len(p)), p[:, 0]])
    u, q, info = solve_stokes(mesh075, 0.75, f, system=system075)
    assert info["energy"] > 0.0
    assert info["energy_identity_defect"] < 1e-10
    assert info["div_residual"] < 1e-10
    # the deflation enforces zero weighted mean of q
    c = np.asarray(system075.Mw @ np.ones(mesh075.num_vertices))
    assert abs(c @ q.coeffs) < 1e-10 * max(np.linalg.norm(q.coeffs), 1e-30)
    p = info["pressure_at"](np.array([[0.7, 0.0], [0.4, 0.1]]))
    assert np.all(np.isfinite(p))


def test_pressure_lr_norm_unit_weight_case():
    # at alpha = 1 the weight power vanishes: ||q||_r of q = 1 is area^(1/r)
    mesh = generate_graded_mesh(CuspDomain(1.0), 0.25)
    q = np.ones(mesh.num_vertices)
    out = pressure_lr_norm(mesh, 1.0, q, 1.5)
    assert out["norm"] == pytest.approx(mesh.area() ** (1.0 / 1.5), rel=1e-12)
    assert out["slack"] >= -1e-12


def test_pressure_lr_norm_rejects_out_of_range_r(mesh075):
    q = np.ones(mesh075.num_vertices)
    # 2/(3 - 2 alpha) = 4/3 at alpha = 0.75
    with pytest.raises(ValueError):
        pressure_lr_norm(mesh075, 0.75, q, 1.34)
    with pytest.raises(ValueError):
        pressure_lr_norm(mesh075, 0.75, q, 0.9)


def test_korn_constant_finite_with_residual(mesh075):
    est = korn_best_constant(mesh075, 0.75, 0.75)
    assert est.constant > 1.0       # ||Du|| exceeds ||eps(u)|| for rotations
    assert est.constant < 50.0
    assert est.residual < 1e-8
    assert est.params["beta"] == 0.75


def test_poincare_constant_finite_with_residual(mesh075):
    est = improved_poincare_constant(mesh075, 0.75, 0.75)
    assert 0.0 < est.constant < 50.0
    assert est.residual < 1e-8


def test_default_ball_inside_domain():
    for alpha in (0.6, 0.75, 1.0):
        (cx, cy), r = default_ball(alpha)
        dom = CuspDomain(alpha)
        from cuspdiv import geometry
        assert r < geometry.distance(dom, np.array([cx, cy]))


def test_harmonic_ratio_matches_direct_computation():
    dom = CuspDomain(0.75)
    mu = 0.25
    grid = weights.tensor_grid(dom, n_x=30, n_tau=24, x_min=1e-8,
                               tau_min=1e-6)
    # k = 1: f in {x, y}, |grad f| = 1
    one = lambda p: np.ones(len(p))
    num, _ = weights.weighted_lp_norm(one, dom, 1.0 - mu, 2.0, grid,
                                      mode="exact", estimate_error=False)
    best = 0.0
    for comp in (0, 1):
        den, _ = weights.weighted_lp_norm(lambda p: p[:, comp], dom, -mu, 2.0,
                                          grid, mode="exact",
                                          estimate_error=False)
        best = max(best, num / den)
    assert harmonic_ratio(dom, mu, 1, grid=grid) == pytest.approx(best,
                                                                  rel=1e-12)
