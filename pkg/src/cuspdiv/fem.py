"""Finite-element realization (p = 2) of the weighted divergence machinery.

Taylor-Hood elements on graded triangulations: continuous piecewise-quadratic
velocities (optionally with zero boundary values) and continuous piecewise-
linear pressures.  The constraint form is b(v, q) = int div v q d^(2 alpha - 2),
with the distance-power weight evaluated at quadrature nodes; weighted
constant pressures are removed by deflation.  Korn / improved-Poincare
constants are estimated as generalized Rayleigh-quotient extremes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as dla
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from . import geometry
from .mesh import TriangulatedMesh

__all__ = [
    "DiscreteField",
    "SaddleSystem",
    "ConstantEstimate",
    "P2Space",
    "assemble",
    "solve_div_right_inverse",
    "discrete_infsup",
    "solve_stokes",
    "pressure_lr_norm",
    "korn_best_constant",
    "improved_poincare_constant",
    "harmonic_ratio",
    "default_ball",
]

# 7-point degree-5 rule on the reference triangle (barycentric, weights sum 1)
_B1, _B2 = 0.0597158717897698, 0.7974269853530873
_QL = np.array(
    [[1 / 3, 1 / 3, 1 / 3],
     [_B1, (1 - _B1) / 2, (1 - _B1) / 2],
     [(1 - _B1) / 2, _B1, (1 - _B1) / 2],
     [(1 - _B1) / 2, (1 - _B1) / 2, _B1],
     [_B2, (1 - _B2) / 2, (1 - _B2) / 2],
     [(1 - _B2) / 2, _B2, (1 - _B2) / 2],
     [(1 - _B2) / 2, (1 - _B2) / 2, _B2]]
)
_QW = np.array([0.225,
                0.1323941527885062, 0.1323941527885062, 0.1323941527885062,
                0.1259391805448271, 0.1259391805448271, 0.1259391805448271])


def _p2_shape(lam):
    """P2 basis at barycentric points lam (nq, 3) -> (nq, 6)."""
    l1, l2, l3 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
        4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1,
    ])


def _p2_grad(lam):
    """Reference gradients d/d(xi, eta) with xi = l2, eta = l3: (nq, 6, 2)."""
    l1, l2, l3 = lam[:, 0], lam[:, 1], lam[:, 2]
    z = np.zeros_like(l1)
    gx = np.stack([1 - 4 * l1, 4 * l2 - 1, z,
                   4 * (l1 - l2), 4 * l3, -4 * l3], axis=1)
    gy = np.stack([1 - 4 * l1, z, 4 * l3 - 1,
                   -4 * l2, 4 * l2, 4 * (l1 - l3)], axis=1)
    return np.stack([gx, gy], axis=2)


_P2_N = _p2_shape(_QL)            # (7, 6)
_P2_G = _p2_grad(_QL)             # (7, 6, 2)
_P1_N = _QL                       # (7, 3)
_P1_G = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])   # (3, 2) constant


class P2Space:
    """Continuous piecewise-quadratic scalar space: vertex + edge-midpoint dofs."""

    def __init__(self, mesh: TriangulatedMesh):
        self.mesh = mesh
        edges = mesh.edges()
        self.edge_index = {tuple(e): mesh.num_vertices + k
                           for k, e in enumerate(edges)}
        t = mesh.triangles
        local_edges = [(0, 1), (1, 2), (2, 0)]
        dofs = np.empty((len(t), 6), dtype=int)
        dofs[:, :3] = t
        for le, (a, b) in enumerate(local_edges):
            keys = np.sort(t[:, [a, b]], axis=1)
            dofs[:, 3 + le] = [self.edge_index[tuple(k)] for k in keys]
        self.tri_dofs = dofs
        self.n_dofs = mesh.num_vertices + len(edges)

    def dof_coords(self):
        mesh = self.mesh
        coords = np.empty((self.n_dofs, 2))
        coords[: mesh.num_vertices] = mesh.vertices
        for (a, b), k in self.edge_index.items():
            coords[k] = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        return coords

    def boundary_dofs(self):
        mesh = self.mesh
        idx = set()
        for v0, v1, _ in mesh.boundary_edges:
            idx.add(v0)
            idx.add(v1)
            idx.add(self.edge_index[(min(v0, v1), max(v0, v1))])
        return np.array(sorted(idx), dtype=int)


@dataclass
class DiscreteField:
    space: str                    # scalar-P1 | scalar-P2 | vector-P2
    coeffs: np.ndarray
    mesh: TriangulatedMesh


def _quad_data(mesh: TriangulatedMesh):
    """Physical quadrature points, scaled weights and Jacobian inverses."""
    p = mesh.vertices[mesh.triangles]           # (nt, 3, 2)
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (nt,2,2)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJT = np.empty_like(J)
    invJT[:, 0, 0] = J[:, 1, 1]
    invJT[:, 0, 1] = -J[:, 1, 0]
    invJT[:, 1, 0] = -J[:, 0, 1]
    invJT[:, 1, 1] = J[:, 0, 0]
    invJT /= detJ[:, None, None]
    # x_q = p0 + J (xi, eta)
    ref = _QL[:, 1:]                             # (7, 2)
    pts = p[:, None, 0, :] + np.einsum("tij,qj->tqi", J, ref)
    wq = 0.5 * np.abs(detJ)[:, None] * _QW[None, :]
    return pts, wq, invJT


def _distance_weight(mesh, pts, exponent):
    """d(x)^exponent at quadrature points, exact distance."""
    if exponent == 0.0:
        return np.ones(pts.shape[:2])
    dom = geometry.CuspDomain(mesh.alpha)
    d = geometry.distance(dom, pts.reshape(-1, 2)).reshape(pts.shape[:2])
    return d**exponent


def _scatter(rows, cols, vals, shape):
    m = sparse.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                          shape=shape)
    return m.tocsr()


def _p2_phys_grads(invJT):
    """Physical P2 gradients at quad points: (nt, 7, 6, 2)."""
    return np.einsum("tij,qnj->tqni", invJT, _P2_G)


def _assemble_p2(mesh, space, wq_vals, kind, quad=None):
    """Weighted scalar P2 matrix: kind 'mass' or 'stiffness'."""
    pts, wq, invJT = quad if quad is not None else _quad_data(mesh)
    w = wq * wq_vals
    if kind == "mass":
        local = np.einsum("tq,qm,qn->tmn", w, _P2_N, _P2_N)
    else:
        G = _p2_phys_grads(invJT)
        local = np.einsum("tq,tqmi,tqni->tmn", w, G, G)
    d = space.tri_dofs
    rows = np.repeat(d, 6, axis=1)
    cols = np.tile(d, (1, 6))
    return _scatter(rows, cols, local, (space.n_dofs, space.n_dofs))


def _assemble_eps(mesh, space, wq_vals, quad=None):
    """Vector-P2 matrix of int eps(u):eps(v) w, blocked [ux; uy]."""
    pts, wq, invJT = quad if quad is not None else _quad_data(mesh)
    w = wq * wq_vals
    G = _p2_phys_grads(invJT)                    # (nt, 7, 6, 2)
    gx, gy = G[..., 0], G[..., 1]
    # eps(u):eps(v) blocks for (ux, ux), (ux, uy), (uy, uy)
    xx = np.einsum("tq,tqm,tqn->tmn", w, gx, gx) \
        + 0.5 * np.einsum("tq,tqm,tqn->tmn", w, gy, gy)
    yy = np.einsum("tq,tqm,tqn->tmn", w, gy, gy) \
        + 0.5 * np.einsum("tq,tqm,tqn->tmn", w, gx, gx)
    xy = 0.5 * np.einsum("tq,tqm,tqn->tmn", w, gy, gx)
    n = space.n_dofs
    d = space.tri_dofs
    rows = np.repeat(d, 6, axis=1)
    cols = np.tile(d, (1, 6))
    blocks = [
        (rows, cols, xx), (rows + n, cols + n, yy),
        (rows, cols + n, xy), (rows + n, cols, xy.transpose(0, 2, 1)),
    ]
    r = np.concatenate([b[0].ravel() for b in blocks])
    c = np.concatenate([b[1].ravel() for b in blocks])
    v = np.concatenate([b[2].ravel() for b in blocks])
    return sparse.coo_matrix((v, (r, c)), shape=(2 * n, 2 * n)).tocsr()


def _assemble_div(mesh, vspace, wq_vals, quad=None):
    """B[q, v] = int div v phi_q w over P1 pressures x vector P2: (np, 2 nu)."""
    pts, wq, invJT = quad if quad is not None else _quad_data(mesh)
    w = wq * wq_vals
    G = _p2_phys_grads(invJT)
    bx = np.einsum("tq,qm,tqni->tmni", w, _P1_N, G[..., :1])[..., 0]
    by = np.einsum("tq,qm,tqni->tmni", w, _P1_N, G[..., 1:])[..., 0]
    n = vspace.n_dofs
    t = mesh.triangles
    rows = np.repeat(t, 6, axis=1)               # (nt, 18)
    cols = np.tile(vspace.tri_dofs, (1, 3))
    shape = (mesh.num_vertices, 2 * n)
    Bx = sparse.coo_matrix((bx.ravel(), (rows.ravel(), cols.ravel())), shape)
    By = sparse.coo_matrix(
        (by.ravel(), (rows.ravel(), (cols + n).ravel())), shape)
    return (Bx + By).tocsr()


def _assemble_p1_mass(mesh, wq_vals, quad=None):
    pts, wq, invJT = quad if quad is not None else _quad_data(mesh)
    w = wq * wq_vals
    local = np.einsum("tq,qm,qn->tmn", w, _P1_N, _P1_N)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1)
    cols = np.tile(t, (1, 3))
    nv = mesh.num_vertices
    return _scatter(rows, cols, local, (nv, nv))


def default_ball(alpha):
    """Largest inscribed disk centered at (0.7, 0), slightly shrunk."""
    dom = geometry.CuspDomain(alpha)
    r = geometry.distance(dom, np.array([0.7, 0.0]))
    return (0.7, 0.0), 0.95 * float(r)


def _ball_indicator(pts, ball):
    (cx, cy), r = ball
    return (np.hypot(pts[..., 0] - cx, pts[..., 1] - cy) <= r).astype(float)


@dataclass
class SaddleSystem:
    """Assembled weighted Taylor-Hood saddle-point blocks."""

    mesh: TriangulatedMesh
    alpha: float
    vspace: P2Space
    A: sparse.csr_matrix          # int Du : Dv on vector P2 (no BC applied)
    B: sparse.csr_matrix          # int div v q d^(2 alpha - 2)
    Mw: sparse.csr_matrix         # weighted P1 pressure mass
    free: np.ndarray = field(repr=False, default=None)   # zero-BC dofs

    def restrict(self):
        """A, B with zero boundary values imposed on the velocity."""
        fv = self.free
        return self.A[fv][:, fv], self.B[:, fv]


def assemble(mesh: TriangulatedMesh, alpha=None) -> SaddleSystem:
    """Assemble the weighted Stokes blocks; requires alpha > 1/2."""
    alpha = mesh.alpha if alpha is None else alpha
    if not alpha > 0.5:
        raise ValueError("alpha must exceed 1/2 for the weighted Stokes forms")
    vspace = P2Space(mesh)
    quad = _quad_data(mesh)
    ones = np.ones(quad[1].shape)
    wvals = _distance_weight(mesh, quad[0], 2.0 * alpha - 2.0)
    K = _assemble_p2(mesh, vspace, ones, "stiffness", quad)
    A = sparse.block_diag([K, K]).tocsr()
    B = _assemble_div(mesh, vspace, wvals, quad)
    Mw = _assemble_p1_mass(mesh, wvals, quad)
    bdofs = vspace.boundary_dofs()
    mask = np.ones(2 * vspace.n_dofs, dtype=bool)
    mask[bdofs] = False
    mask[bdofs + vspace.n_dofs] = False
    free = np.nonzero(mask)[0]
    return SaddleSystem(mesh, alpha, vspace, A, B, Mw, free)


def _bordered_solve(Af, Bf, c, rhs_u, rhs_p):
    """Solve the deflated saddle system.

    [Af  Bf' 0 ] [u ]   [rhs_u]
    [Bf  0   c ] [q ] = [rhs_p]
    [0   c'  0 ] [mu]   [0    ]

    c = Mw 1 deflates weighted-constant pressures; mu absorbs any weighted
    mean of the constraint right-hand side.
    """
    nu, npress = Af.shape[0], Bf.shape[0]
    c = c.reshape(-1, 1)
    K = sparse.bmat(
        [[Af, Bf.T, None],
         [Bf, None, sparse.csc_matrix(c)],
         [None, sparse.csc_matrix(c.T), None]], format="csc")
    rhs = np.concatenate([rhs_u, rhs_p, [0.0]])
    sol = splu(K).solve(rhs)
    return sol[:nu], sol[nu:nu + npress], float(sol[-1])


def _eval_p2_vector(mesh, vspace, coeffs, quad):
    """Values and gradients of a blocked vector-P2 field at quad points."""
    n = vspace.n_dofs
    d = vspace.tri_dofs
    ux, uy = coeffs[:n], coeffs[n:]
    G = _p2_phys_grads(quad[2])
    vals = np.stack([np.einsum("qm,tm->tq", _P2_N, ux[d]),
                     np.einsum("qm,tm->tq", _P2_N, uy[d])], axis=-1)
    grads = np.stack([np.einsum("tqmi,tm->tqi", G, ux[d]),
                      np.einsum("tqmi,tm->tqi", G, uy[d])], axis=-2)
    return vals, grads                          # (nt,7,2), (nt,7,2,2)


def field_h1_norm(mesh, vspace, coeffs) -> float:
    """Unweighted H^1 norm (sqrt of int |u|^2 + |Du|^2) of a vector field."""
    quad = _quad_data(mesh)
    vals, grads = _eval_p2_vector(mesh, vspace, coeffs, quad)
    dens = np.sum(vals**2, axis=-1) + np.sum(grads**2, axis=(-1, -2))
    return float(np.sqrt(np.sum(quad[1] * dens)))


def source_weighted_norm(mesh, f, gamma) -> float:
    """||f||_{L^2(Omega, gamma)} of a callable source by mesh quadrature."""
    quad = _quad_data(mesh)
    fv = np.asarray(f(quad[0].reshape(-1, 2)), dtype=float).reshape(
        quad[1].shape)
    w = _distance_weight(mesh, quad[0], 2.0 * gamma)
    return float(np.sqrt(np.sum(quad[1] * w * fv**2)))


def solve_div_right_inverse(mesh, alpha, f, system=None):
    """Minimal-energy zero-BC velocity with weighted-weak divergence f.

    Minimizes int |Du|^2 over zero-BC vector P2 subject to
    int (div u - f) q d^(2 alpha - 2) = 0 for all P1 pressures q with zero
    weighted mean.  Returns (u: DiscreteField, info dict) with the algebraic
    constraint residual and the Lagrange multiplier.
    """
    sys_ = assemble(mesh, alpha) if system is None else system
    Af, Bf = sys_.restrict()
    quad = _quad_data(mesh)
    wvals = _distance_weight(mesh, quad[0], 2.0 * alpha - 2.0)
    if callable(f):
        fv = np.asarray(f(quad[0].reshape(-1, 2)), dtype=float).reshape(
            quad[1].shape)
    else:
        raise TypeError("f must be callable on (n, 2) point arrays")
    w = quad[1] * wvals * fv
    g = np.zeros(mesh.num_vertices)
    np.add.at(g, mesh.triangles.ravel(),
              np.einsum("tq,qm->tm", w, _P1_N).ravel())

    c = np.asarray(sys_.Mw @ np.ones(mesh.num_vertices))
    uf, lam, mu = _bordered_solve(Af, Bf, c, np.zeros(Af.shape[0]), g)
    coeffs = np.zeros(2 * sys_.vspace.n_dofs)
    coeffs[sys_.free] = uf
    resid = Bf @ uf + mu * c - g
    scale = max(np.linalg.norm(g), 1e-30)
    info = {
        "constraint_residual": float(np.linalg.norm(resid)) / scale,
        "multiplier": lam,
        "weighted_mean_correction": mu,
        "h1_norm": field_h1_norm(mesh, sys_.vspace, coeffs),
    }
    return DiscreteField("vector-P2", coeffs, mesh), info


def discrete_infsup(mesh, alpha, system=None, dense_limit=4000):
    """Discrete weighted inf-sup constant.

    sqrt of the smallest eigenvalue of the pressure Schur complement
    B A^-1 B' against the weighted mass M_w, restricted to pressures of zero
    weighted mean (one deflated direction).  Dense eigensolve on the Schur
    complement; pressure spaces beyond dense_limit unknowns are rejected.
    """
    sys_ = assemble(mesh, alpha) if system is None else system
    Af, Bf = sys_.restrict()
    npress = Bf.shape[0]
    if npress > dense_limit:
        raise ValueError(
            f"pressure space too large for the dense Schur path ({npress})")
    lu = splu(Af.tocsc())
    Bd = np.asarray(Bf.todense())
    X = np.empty((Af.shape[0], npress))
    for lo in range(0, npress, 512):
        X[:, lo:lo + 512] = lu.solve(Bd[lo:lo + 512].T)
    S = Bd @ X
    S = 0.5 * (S + S.T)
    Mw = np.asarray(sys_.Mw.todense())
    c = Mw @ np.ones(npress)
    T = _elimination_basis(c)
    Sr = T.T @ S @ T
    Mr = T.T @ Mw @ T
    vals = dla.eigh(Sr, Mr, eigvals_only=True)
    lam = float(vals[0])
    if lam <= 0.0:
        raise RuntimeError("Schur complement not positive on deflated space")
    return float(np.sqrt(lam))


def _elimination_basis(c):
    """Dense basis of {x : c.x = 0} eliminating the largest-|c| coordinate."""
    n = len(c)
    k = int(np.argmax(np.abs(c)))
    if c[k] == 0.0:
        raise ValueError("deflation vector vanishes")
    T = np.zeros((n, n - 1))
    cols = [i for i in range(n) if i != k]
    for j, i in enumerate(cols):
        T[i, j] = 1.0
        T[k, j] = -c[i] / c[k]
    return T


def _constrained_max_ratio(M, S, c, seed=0):
    """max x'Mx / x'Sx over {c.x = 0} for sparse PSD S with kernel = constants.

    Computed as 1 / lambda_min of the pencil (S, M) restricted to the
    constraint subspace; LOBPCG iterates in the M-orthogonal complement of
    M^-1 c, with a shifted-stiffness preconditioner.  The constraint removes
    the kernel of S (the constraint functional does not vanish on constants),
    so the restricted pencil is definite.
    """
    from scipy.sparse.linalg import lobpcg

    n = S.shape[0]
    Mlu = splu(M.tocsc())
    Y = Mlu.solve(c)[:, None]
    prec = splu((S + 1e-3 * M).tocsc())
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 4))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        vals, vecs = lobpcg(S, X, B=M, Y=Y,
                            M=lambda z: prec.solve(z),
                            largest=False, tol=1e-8, maxiter=300)
    k = int(np.argmin(vals))
    mu, x = float(vals[k]), vecs[:, k]
    r = S @ x - mu * (M @ x)
    resid = float(np.linalg.norm(r) / max(np.linalg.norm(S @ x), 1e-30))
    if mu <= 0.0:
        raise RuntimeError("restricted pencil not positive definite")
    return 1.0 / mu, resid


def solve_stokes(mesh, alpha, f, system=None):
    """Weighted mixed Stokes solve: a(u,v) + b(v,q) = (f, v), b(u, r) = 0.

    Returns (u, q, info); the physical pressure is p = q d^(2 alpha - 2),
    exposed through info["pressure_at"](points).  info carries the energy
    identity defect and the weighted divergence residual.
    """
    sys_ = assemble(mesh, alpha) if system is None else system
    Af, Bf = sys_.restrict()
    quad = _quad_data(mesh)
    pts = quad[0].reshape(-1, 2)
    fv = np.asarray(f(pts), dtype=float).reshape(quad[1].shape + (2,))
    n = sys_.vspace.n_dofs
    F = np.zeros(2 * n)
    contrib_x = np.einsum("tq,tq,qm->tm", quad[1], fv[..., 0], _P2_N)
    contrib_y = np.einsum("tq,tq,qm->tm", quad[1], fv[..., 1], _P2_N)
    np.add.at(F, sys_.vspace.tri_dofs.ravel(), contrib_x.ravel())
    np.add.at(F, (sys_.vspace.tri_dofs + n).ravel(), contrib_y.ravel())
    Ff = F[sys_.free]

    c = np.asarray(sys_.Mw @ np.ones(mesh.num_vertices))
    uf, q, mu = _bordered_solve(Af, Bf, c, Ff, np.zeros(mesh.num_vertices))
    coeffs = np.zeros(2 * n)
    coeffs[sys_.free] = uf

    energy = float(uf @ (Af @ uf))
    work = float(Ff @ uf)
    div_resid = np.linalg.norm(Bf @ uf + mu * c) / max(
        np.linalg.norm(Ff), 1e-30)
    dom = geometry.CuspDomain(alpha)

    def pressure_at(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        qv = _eval_p1(mesh, q, points)
        d = geometry.distance(dom, points)
        return qv * d ** (2.0 * alpha - 2.0)

    info = {
        "energy": energy,
        "energy_identity_defect": abs(energy - work) / max(abs(work), 1e-30),
        "div_residual": float(div_resid),
        "pressure_at": pressure_at,
        "q_weighted_norm": float(np.sqrt(q @ (sys_.Mw @ q))),
        "q_unweighted_mean": float(
            _assemble_p1_mass(mesh, np.ones(quad[1].shape), quad)
            @ q @ np.ones(mesh.num_vertices)) if False else 0.0,
    }
    # unweighted mean of q, recorded as a diagnostic
    M1 = _assemble_p1_mass(mesh, np.ones(quad[1].shape), quad)
    info["q_unweighted_mean"] = float(np.ones(mesh.num_vertices) @ (M1 @ q))
    return DiscreteField("vector-P2", coeffs, mesh), \
        DiscreteField("scalar-P1", q, mesh), info


def _eval_p1(mesh, coeffs, points):
    """Evaluate a P1 field at arbitrary points (barycentric point location).

    Brute-force per-point search restricted by a bounding-box prefilter;
    intended for diagnostics, not inner loops.
    """
    p = mesh.vertices[mesh.triangles]
    out = np.empty(len(points))
    for i, pt in enumerate(points):
        d0 = pt - p[:, 0]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        xi = (J[:, 1, 1] * d0[:, 0] - J[:, 1, 0] * d0[:, 1]) / det
        eta = (-J[:, 0, 1] * d0[:, 0] + J[:, 0, 0] * d0[:, 1]) / det
        lam = np.column_stack([1 - xi - eta, xi, eta])
        ok = np.all(lam >= -1e-9, axis=1)
        if not np.any(ok):
            k = int(np.argmax(np.min(lam, axis=1)))
        else:
            k = int(np.nonzero(ok)[0][0])
        out[i] = float(lam[k] @ coeffs[mesh.triangles[k]])
    return out


def pressure_lr_norm(mesh, alpha, q, r):
    """||p||_{L^r(Omega)} for p = q d^(2 alpha - 2), plus its Hoelder bound.

    Requires 1 <= r < 2/(3 - 2 alpha).  Returns a dict with the norm, the
    bound ||p||_{L^2(Omega, 1-alpha)} (int d^(2(alpha-1) r/(2-r)))^((2-r)/(2r))
    and the slack; the bound is only formed for r < 2.
    """
    if not (1.0 <= r < 2.0 / (3.0 - 2.0 * alpha)):
        raise ValueError(
            f"r must lie in [1, {2.0 / (3.0 - 2.0 * alpha):.6f}) "
            f"for alpha={alpha}")
    quad = _quad_data(mesh)
    qv = np.einsum("qm,tm->tq", _P1_N, np.asarray(q)[mesh.triangles])
    d = _distance_weight(mesh, quad[0], 1.0)
    p = qv * d ** (2.0 * alpha - 2.0)
    norm = float(np.sum(quad[1] * np.abs(p) ** r) ** (1.0 / r))
    # Hoelder: ||p||_r <= ||p d^(1-alpha)||_2 * ||d^(alpha-1)||_{2r/(2-r)}
    w2 = float(np.sqrt(np.sum(quad[1] * (p * d ** (1.0 - alpha)) ** 2)))
    ex = 2.0 * (alpha - 1.0) * r / (2.0 - r)
    mass = float(np.sum(quad[1] * d**ex))
    bound = w2 * mass ** ((2.0 - r) / (2.0 * r))
    return {"norm": norm, "bound": bound, "slack": bound - norm}


@dataclass
class ConstantEstimate:
    params: dict
    mesh_level: int
    constant: float
    residual: float


def _gen_max_eig(Gm, Dm, dense_limit=3500):
    """Largest lam with G x = lam D x (G, D sparse symmetric, D SPD)."""
    n = Gm.shape[0]
    if n <= dense_limit:
        vals, vecs = dla.eigh(np.asarray(Gm.todense()),
                              np.asarray(Dm.todense()))
        lam, x = float(vals[-1]), vecs[:, -1]
    else:
        vals, vecs = eigsh(Gm, k=1, M=Dm, which="LA", maxiter=5000)
        lam, x = float(vals[0]), vecs[:, 0]
    r = Gm @ x - lam * (Dm @ x)
    resid = float(np.linalg.norm(r) / max(np.linalg.norm(Gm @ x), 1e-30))
    return lam, resid


def korn_best_constant(mesh, alpha, beta, ball=None, level=0):
    """Best constant of the weighted Korn inequality as a Rayleigh maximum.

    Maximizes ||Du||^2_{L^2(Omega,1-beta)} over
    ||eps(u)||^2_{L^2(Omega,alpha-beta)} + ||u||^2_{L^2(B)} on vector P2
    fields (no boundary condition); returns sqrt of the max eigenvalue.
    """
    if ball is None:
        ball = default_ball(alpha)
    vspace = P2Space(mesh)
    quad = _quad_data(mesh)
    w_grad = _distance_weight(mesh, quad[0], 2.0 * (1.0 - beta))
    w_eps = _distance_weight(mesh, quad[0], 2.0 * (alpha - beta))
    K = _assemble_p2(mesh, vspace, w_grad, "stiffness", quad)
    G = sparse.block_diag([K, K]).tocsr()
    E = _assemble_eps(mesh, vspace, w_eps, quad)
    ind = _ball_indicator(quad[0], ball)
    Mb = _assemble_p2(mesh, vspace, ind, "mass", quad)
    MB = sparse.block_diag([Mb, Mb]).tocsr()
    lam, resid = _gen_max_eig(G, (E + MB).tocsr())
    return ConstantEstimate(
        {"alpha": alpha, "beta": beta, "ball": ball},
        level, float(np.sqrt(lam)), resid)


def improved_poincare_constant(mesh, alpha, beta, ball=None, level=0):
    """Best constant of the improved Poincare inequality.

    Maximizes ||f||^2_{L^2(Omega,1-beta)} / ||grad f||^2_{L^2(Omega,1+alpha-beta)}
    over scalar P2 fields with int_B f phi = 0 for a fixed normalized bump
    phi supported in the ball (one linear constraint, eliminated exactly).
    """
    if ball is None:
        ball = default_ball(alpha)
    (cx, cy), r = ball
    space = P2Space(mesh)
    quad = _quad_data(mesh)
    w_m = _distance_weight(mesh, quad[0], 2.0 * (1.0 - beta))
    w_s = _distance_weight(mesh, quad[0], 2.0 * (1.0 + alpha - beta))
    M = _assemble_p2(mesh, space, w_m, "mass", quad)
    S = _assemble_p2(mesh, space, w_s, "stiffness", quad)
    # tent bump on the ball, normalized to unit integral by quadrature
    bump = np.maximum(0.0, 1.0 - np.hypot(quad[0][..., 0] - cx,
                                          quad[0][..., 1] - cy) / r)
    total = float(np.sum(quad[1] * bump))
    if total <= 0.0:
        raise ValueError("bump ball does not intersect the quadrature nodes")
    bump /= total
    c = np.zeros(space.n_dofs)
    np.add.at(c, space.tri_dofs.ravel(),
              np.einsum("tq,qm->tm", quad[1] * bump, _P2_N).ravel())
    if space.n_dofs <= 3500:
        T = _elimination_basis(c)
        Mr = T.T @ (M @ T)
        Sr = T.T @ (S @ T)
        vals, vecs = dla.eigh(Mr, Sr)
        lam, x = float(vals[-1]), vecs[:, -1]
        r = Mr @ x - lam * (Sr @ x)
        resid = float(np.linalg.norm(r) / max(np.linalg.norm(Mr @ x), 1e-30))
    else:
        lam, resid = _constrained_max_ratio(M, S, c)
    return ConstantEstimate(
        {"alpha": alpha, "beta": beta, "ball": ball},
        level, float(np.sqrt(lam)), resid)


def harmonic_ratio(domain, mu, kmax, grid=None):
    """max over {Re z^k, Im z^k : 1 <= k <= kmax} of the gradient ratio.

    Ratio = ||grad f||_{L^2(Omega, 1-mu)} / ||f||_{L^2(Omega, -mu)} with both
    norms by tensor quadrature and the exact distance weight.  For mu near
    1/2 the denominator is a divergent integral; the fixed quadrature
    truncation keeps all family members comparable, which is what the
    boundedness-in-k diagnostic uses.
    """
    from .weights import tensor_grid, weighted_lp_norm

    if grid is None:
        grid = tensor_grid(domain, n_x=30, n_tau=24, x_min=1e-8, tau_min=1e-6)
    ratios = []
    for k in range(1, kmax + 1):
        for part in (np.real, np.imag):
            def f(pts, k=k, part=part):
                z = pts[:, 0] + 1j * pts[:, 1]
                return part(z**k)

            def gmag(pts, k=k):
                z = pts[:, 0] + 1j * pts[:, 1]
                return k * np.abs(z) ** (k - 1)

            num, _ = weighted_lp_norm(gmag, domain, 1.0 - mu, 2.0, grid,
                                      mode="exact", estimate_error=False)
            den, _ = weighted_lp_norm(f, domain, -mu, 2.0, grid,
                                      mode="exact", estimate_error=False)
            if den > 0.0:
                ratios.append(num / den)
    return float(max(ratios))
