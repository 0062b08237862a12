"""Distance-power weights d^mu, Muckenhaupt A_p diagnostics, weighted L^p
norms by tensor quadrature, and the closed-form blow-up norms on the cusp
domain.

The weighted norm is ||u||_{L^p(Omega, gamma)} = ||u d^gamma||_{L^p(Omega)}.
Two distance modes are supported: the exact Euclidean distance to the
boundary and the tip-adapted surrogate x**(1/alpha) - |y|, under which the
singular-family norms below have exact closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry

__all__ = [
    "WeightSpec",
    "QuadratureGrid",
    "tensor_grid",
    "fs_quadrature_grid",
    "ys_quadrature_grid",
    "ball_grid",
    "ApEstimate",
    "ap_ratio",
    "build_ball_plan",
    "default_sampling",
    "estimate_ap_constant",
    "weighted_lp_norm",
    "fs_family",
    "ys_family",
    "fs_norm_closed_form",
    "ys_norm_closed_form",
]


def _pprime(p: float) -> float:
    if not p > 1.0:
        raise ValueError("p must exceed 1")
    return p / (p - 1.0)


@dataclass(frozen=True)
class WeightSpec:
    """The weight d^mu with d either the exact or the surrogate distance."""

    mu: float
    mode: str = "exact"

    def __post_init__(self):
        if self.mode not in ("exact", "surrogate"):
            raise ValueError(f"unknown weight mode {self.mode!r}")

    def distance_values(self, domain, pts, distance_fn=None):
        if distance_fn is not None:
            return np.asarray(distance_fn(pts), dtype=float)
        if self.mode == "surrogate":
            return np.atleast_1d(geometry.surrogate_distance(domain, pts))
        return np.atleast_1d(geometry.distance(domain, pts))

    def evaluate(self, domain, pts, distance_fn=None):
        d = self.distance_values(domain, pts, distance_fn)
        if self.mu == 0.0:
            return np.ones_like(d)
        return d**self.mu


@dataclass
class QuadratureGrid:
    """Positive-weight quadrature nodes over a planar region.

    refiner, when set, returns a strictly finer grid of the same region and
    is used for one-step error estimation.
    """

    nodes: np.ndarray           # (n, 2)
    weights: np.ndarray         # (n,)
    refiner: object = field(default=None, repr=False)

    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def refined(self) -> "QuadratureGrid":
        if self.refiner is None:
            raise RuntimeError("grid does not support refinement")
        return self.refiner()


def _gauss_panels(breaks, order):
    """Gauss-Legendre nodes/weights over consecutive panels of `breaks`."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * xg[None, :]
    weights = 0.5 * (b - a) * wg[None, :]
    return nodes.ravel(), weights.ravel()


def tensor_grid(domain, *, order=10, n_x=40, n_tau=30,
                x_min=1e-12, tau_min=1e-10) -> QuadratureGrid:
    """Tensor quadrature over Omega in the graded coordinates (x, tau).

    Substituting y = tau * x**(1/alpha) maps Omega to (0,1) x (-1,1) with
    Jacobian x**(1/alpha).  The x-panels are geometric toward the tip down to
    x_min, the tau-panels geometric toward +-1 down to margin tau_min, so
    power singularities at the tip and at the curved boundary are integrated
    with scale-independent per-panel accuracy.  Truncation omits the slivers
    {x < x_min} and {1 - |tau| < tau_min}.
    """
    g = domain.gamma
    # geometric breakpoints 1, 1/2, ..., down to x_min (log-equispaced)
    xb = np.geomspace(1.0, x_min, n_x + 1)
    xn, xw = _gauss_panels(xb[::-1].copy(), order)
    ub = np.geomspace(1.0, tau_min, n_tau + 1)      # u = 1 - tau, tau > 0
    tb = 1.0 - ub                                    # 0 ... 1 - tau_min
    tn_pos, tw_pos = _gauss_panels(tb, order)
    tn = np.concatenate([-tn_pos[::-1], tn_pos])
    tw = np.concatenate([tw_pos[::-1], tw_pos])

    X, T = np.meshgrid(xn, tn, indexing="ij")
    WX, WT = np.meshgrid(xw, tw, indexing="ij")
    nodes = np.column_stack([X.ravel(), (T * X**g).ravel()])
    weights = (WX * WT * X**g).ravel()

    def refine():
        return tensor_grid(domain, order=order + 4, n_x=2 * n_x,
                           n_tau=2 * n_tau, x_min=x_min, tau_min=tau_min)

    return QuadratureGrid(nodes, weights, refine)


def fs_quadrature_grid(domain, beta, p, s, *, tol=1e-3, order=12):
    """Grid resolving the norm integrand of the singular family f_s.

    In graded coordinates the integrand is x**E * (1-|tau|)**(q1-1) with
    E + 1 = p'(A - s) and q1 = 1 - beta*p'; the truncation points are chosen
    so that the omitted tails are below tol relative to the total.
    """
    pp = _pprime(p)
    A = fs_norm_closed_form(domain.alpha, beta, p, 0.0)["A"]
    e1 = pp * (A - s)
    if e1 <= 0.0:
        raise ValueError("s >= A: norm integrand not integrable")
    q1 = 1.0 - beta * pp
    if q1 <= 0.0:
        raise ValueError("beta * p' must be below 1")
    x_min = float(np.clip(math.exp(math.log(0.2 * tol) / e1), 1e-240, 0.3))
    u_min = float(np.clip(math.exp(math.log(0.2 * tol) / min(q1, 1.0)) * 1e-2,
                          1e-240, 0.3))
    # ~3 geometric panels per decade keeps per-panel Gauss error ~1e-9
    n_x = max(24, int(3.3 * math.log10(1.0 / x_min)))
    n_tau = max(16, int(3.3 * math.log10(1.0 / u_min)))
    return tensor_grid(domain, order=order, n_x=n_x, n_tau=n_tau,
                       x_min=x_min, tau_min=u_min)


def ys_quadrature_grid(domain, p, s, *, tol=1e-3, order=12):
    """Grid resolving |y * x**(-s-1)|**p' whose x-exponent is p'(B-s) - 1."""
    pp = _pprime(p)
    B = ys_norm_closed_form(domain.alpha, p, 0.0)["B"]
    e1 = pp * (B - s)
    if e1 <= 0.0:
        raise ValueError("s >= B: norm integrand not integrable")
    x_min = float(np.clip(math.exp(math.log(0.2 * tol) / e1), 1e-240, 0.3))
    n_x = max(24, int(3.3 * math.log10(1.0 / x_min)))
    return tensor_grid(domain, order=order, n_x=n_x, n_tau=20,
                       x_min=x_min, tau_min=1e-8)


def weighted_lp_norm(f, domain, gamma, p, grid, *, mode="surrogate",
                     estimate_error=True):
    """||f d^gamma||_{L^p(Omega)} by quadrature.

    Returns (value, rel_err) where rel_err compares against one refinement
    step of the grid (0.0 when the grid does not support refinement or
    estimate_error is False).
    """
    if not p > 1.0:
        raise ValueError("p must exceed 1")

    def evaluate(g):
        # accumulate log |f d^gamma|^p w: the pointwise power |f|^p (or f
        # itself for strongly singular families) can overflow near the tip
        # although every weighted contribution is tiny, so families may
        # expose log |f| directly via a log_abs attribute
        if hasattr(f, "log_abs"):
            logc = p * np.asarray(f.log_abs(g.nodes), dtype=float)
        else:
            fv = np.abs(np.asarray(f(g.nodes), dtype=float))
            if not np.all(np.isfinite(fv)):
                raise ValueError("integrand is not finite at quadrature nodes")
            pos = fv > 0.0
            logc = np.where(pos, p * np.log(np.where(pos, fv, 1.0)), -np.inf)
        if gamma != 0.0:
            d = WeightSpec(0.0, mode).distance_values(domain, g.nodes)
            logc = logc + gamma * p * np.log(d)
        with np.errstate(divide="ignore"):   # quadrature weights may underflow
            logw = np.log(g.weights)
        return float(np.sum(np.exp(logc + logw))) ** (1.0 / p)

    value = evaluate(grid)
    if not estimate_error or grid.refiner is None:
        return value, 0.0
    fine = evaluate(grid.refined())
    rel = abs(fine - value) / fine if fine > 0 else 0.0
    return fine, rel


# ---------------------------------------------------------------------------
# singular family of the optimality construction
# ---------------------------------------------------------------------------

def fs_family(alpha, beta, p, s, mode="surrogate"):
    """The field f_s(x, y) = x**(-s/(p-1)) * d(x, y)**(-p' beta)."""
    pp = _pprime(p)
    if beta * pp >= 1.0:
        raise ValueError("beta * p' must be below 1")
    A = fs_norm_closed_form(alpha, beta, p, 0.0)["A"]
    if s >= A:
        raise ValueError(f"s must be below A = {A}")
    domain = geometry.CuspDomain(alpha)
    spec = WeightSpec(-pp * beta, mode)

    def f(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        with np.errstate(over="ignore"):
            vals = pts[:, 0] ** (-s / (p - 1.0))
            if beta != 0.0:
                vals = vals * spec.evaluate(domain, pts)
        return vals

    def log_abs(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        la = (-s / (p - 1.0)) * np.log(pts[:, 0])
        if beta != 0.0:
            d = spec.distance_values(domain, pts)
            la = la + (-pp * beta) * np.log(d)
        return la

    f.log_abs = log_abs
    return f


def ys_family(alpha, p, s):
    """The conjugate field y * x**(-s-1), evaluated overflow-safely.

    Written as (y / x**(1/alpha)) * x**(1/alpha - s - 1) so that tip nodes
    with extremely small x do not overflow before the bounded combination is
    formed.
    """
    g = 1.0 / alpha

    def log_abs(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        with np.errstate(divide="ignore"):
            return np.log(np.abs(y)) - (s + 1.0) * np.log(x)

    def f(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        with np.errstate(over="ignore"):
            return np.sign(pts[:, 1]) * np.exp(log_abs(pts))

    f.log_abs = log_abs
    return f


def fs_norm_closed_form(alpha, beta, p, s):
    """Exact surrogate-mode value of ||f_s||^p_{L^p(Omega, beta)}.

    A = (1 - beta p' + alpha) / (alpha p'); the norm to the p-th power equals
    2 / ((1 - beta p') p' (A - s)), the factor 2 accounting for both halves
    of Omega.  Returns value = inf when s >= A (norm divergent).
    """
    pp = _pprime(p)
    if beta * pp >= 1.0:
        raise ValueError("beta * p' must be below 1")
    A = (1.0 - beta * pp + alpha) / (alpha * pp)
    if s >= A:
        return {"A": A, "value": math.inf}
    return {"A": A, "value": 2.0 / ((1.0 - beta * pp) * pp * (A - s))}


def ys_norm_closed_form(alpha, p, s):
    """Exact value of ||y x**(-s-1)||^{p'}_{L^{p'}(Omega)}.

    B = (1 - (alpha-1) p' + alpha) / (alpha p'); the norm to the p'-th power
    equals (2/(p'+1)) / (p' (B - s)).  Returns inf when s >= B.
    """
    pp = _pprime(p)
    B = (1.0 - (alpha - 1.0) * pp + alpha) / (alpha * pp)
    if s >= B:
        return {"B": B, "value": math.inf}
    return {"B": B, "value": (2.0 / (pp + 1.0)) / (pp * (B - s))}


# ---------------------------------------------------------------------------
# Muckenhaupt A_p machinery
# ---------------------------------------------------------------------------

_G2 = 0.5 / np.sqrt(3.0)   # 2x2 Gauss offsets on a unit cell


def ball_grid(distance_fn, center, r, delta_min, *,
              open_frac=0.25, rim_frac=1.0 / 128.0) -> QuadratureGrid:
    """Adaptive quadrature grid over the ball B(center, r).

    Square cells are split while larger than open_frac times the distance of
    their center to F (so d^mu is smooth per cell), down to the absolute
    floor delta_min; cells meeting the ball rim are additionally split to
    rim_frac * r to control the staircase error of the ball indicator.  Each
    final cell carries a 2x2 Gauss rule restricted to the ball.
    """
    cx, cy = float(center[0]), float(center[1])
    cells = np.array([[cx - r, cy - r, 2.0 * r]])
    done = []
    while len(cells):
        x0, y0, s = cells[:, 0], cells[:, 1], cells[:, 2]
        mx, my = x0 + s / 2.0, y0 + s / 2.0
        rad = np.hypot(mx - cx, my - cy)
        half_diag = s * (_SQ2 / 2.0)
        keep = rad - half_diag <= r              # discard cells outside B
        d = np.asarray(distance_fn(np.column_stack([mx, my])), dtype=float)
        stop = np.maximum(delta_min, d * open_frac)
        rim = np.abs(rad - r) <= half_diag
        stop = np.where(rim, np.maximum(delta_min,
                                        np.minimum(stop, rim_frac * r)), stop)
        split = keep & (s > stop)
        done.append(cells[keep & ~split])
        parents = cells[split]
        if len(parents) == 0:
            break
        h = parents[:, 2:3] / 2.0
        offs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        cells = np.concatenate(
            [np.column_stack([parents[:, 0] + ox * h[:, 0],
                              parents[:, 1] + oy * h[:, 0], h[:, 0]])
             for ox, oy in offs]
        )
    cells = np.concatenate(done)
    x0, y0, s = cells[:, 0], cells[:, 1], cells[:, 2]
    offs = np.array([[-_G2, -_G2], [_G2, -_G2], [-_G2, _G2], [_G2, _G2]])
    nodes = np.concatenate(
        [np.column_stack([x0 + (0.5 + ox) * s, y0 + (0.5 + oy) * s])
         for ox, oy in offs]
    )
    weights = np.concatenate([s * s / 4.0] * 4)
    inside = np.hypot(nodes[:, 0] - cx, nodes[:, 1] - cy) <= r
    nodes, weights = nodes[inside], weights[inside]

    def refine():
        return ball_grid(distance_fn, center, r, delta_min / 2.0,
                         open_frac=open_frac, rim_frac=rim_frac / 2.0)

    return QuadratureGrid(nodes, weights, refine)


_SQ2 = float(np.sqrt(2.0))


def ap_ratio(center, r, weight: WeightSpec, p, grid, *, domain=None,
             distance_fn=None) -> float:
    """(avg_B w) * (avg_B w^{-1/(p-1)})**(p-1) with quadrature averages.

    The averages share one node set, so the ratio is exactly 1 for mu = 0
    and at least 1 in general (discrete Jensen inequality).
    """
    if len(grid.weights) == 0:
        raise ValueError("ball does not intersect the quadrature support")
    d = weight.distance_values(domain, grid.nodes, distance_fn)
    d = np.maximum(d, 1e-300)
    total = grid.total_weight()
    avg_w = grid.integrate(d**weight.mu) / total
    avg_wm = grid.integrate(d ** (-weight.mu / (p - 1.0))) / total
    return float(avg_w * avg_wm ** (p - 1.0))


@dataclass
class ApEstimate:
    value: float                 # supremum of the per-ball ratios
    per_ball: list               # dicts: center_x, center_y, radius, ratio
    trend: float                 # ratio growth factor per radius decade

    def admissible_flat(self, tol=2.0) -> bool:
        return max(self.trend, 1.0 / self.trend) < tol


def default_sampling(alpha):
    """32 boundary centers (tip included) + 32 interior, radii 2^-2..2^-10."""
    dom = geometry.CuspDomain(alpha)
    t = np.linspace(0.0, 1.0, 14) ** 2
    upper = np.column_stack([t, t**dom.gamma])          # includes the tip
    lower = np.column_stack([t[1:], -t[1:] ** dom.gamma])
    ye = np.linspace(-0.8, 0.8, 5)
    edge = np.column_stack([np.ones_like(ye), ye])
    boundary = np.vstack([upper, lower, edge])
    xi = np.linspace(0.05, 0.95, 16)
    interior = np.vstack(
        [np.column_stack([xi, np.zeros_like(xi)]),
         np.column_stack([xi, 0.5 * xi**dom.gamma])]
    )
    return {
        "boundary_centers": boundary,
        "interior_centers": interior,
        "radii": 2.0 ** -np.arange(2, 11, dtype=float),
        "resolution": 2048,
    }


def build_ball_plan(domain, sampling=None, distance_fn=None):
    """Precompute quadrature weights and node distances for every plan ball.

    The grids depend only on geometry and resolution, so one plan serves any
    number of weight exponents; the per-ball records carry the distance
    values at the nodes, making each subsequent ratio a pair of vector
    powers.
    """
    if sampling is None:
        sampling = default_sampling(domain.alpha)
    if distance_fn is None:
        distance_fn = lambda pts: geometry.distance(domain, pts)
    delta_min = 1.0 / float(sampling["resolution"])
    radii = np.asarray(sampling["radii"], dtype=float)
    centers = np.vstack([sampling["boundary_centers"],
                         sampling["interior_centers"]])
    balls = []
    for c in centers:
        for r in radii:
            grid = ball_grid(distance_fn, c, r, delta_min)
            d = np.maximum(np.asarray(distance_fn(grid.nodes), dtype=float),
                           1e-300)
            balls.append({"center": (float(c[0]), float(c[1])),
                          "radius": float(r), "weights": grid.weights,
                          "d": d})
    return {"sampling": sampling, "balls": balls}


def estimate_ap_constant(domain, weight: WeightSpec, p,
                         sampling=None, distance_fn=None,
                         plan=None) -> ApEstimate:
    """Sampled A_p constant of d^mu over boundary- and interior-centered balls.

    The supremum over a finite plan is a lower bound for the true A_p
    constant; the trend (growth of the per-radius supremum per radius
    decade) is the diagnostic separating admissible exponents (flat) from
    inadmissible ones (divergent with scale/resolution).
    """
    if plan is None:
        plan = build_ball_plan(domain, sampling, distance_fn)
    delta_min = 1.0 / float(plan["sampling"]["resolution"])
    records = []
    for ball in plan["balls"]:
        qw, d = ball["weights"], ball["d"]
        total = float(np.sum(qw))
        avg_w = float(np.dot(qw, d**weight.mu)) / total
        avg_wm = float(np.dot(qw, d ** (-weight.mu / (p - 1.0)))) / total
        records.append({"center_x": ball["center"][0],
                        "center_y": ball["center"][1],
                        "radius": ball["radius"],
                        "ratio": avg_w * avg_wm ** (p - 1.0),
                        # balls barely larger than the quadrature floor are
                        # kept in the table but excluded from the headline
                        # supremum and trend
                        "resolved": ball["radius"] >= 64.0 * delta_min})
    used = [rec for rec in records if rec["resolved"]] or records
    radii = sorted({rec["radius"] for rec in used})
    sup_per_radius = [max(rec["ratio"] for rec in used
                          if rec["radius"] == r) for r in radii]
    slope = (np.polyfit(np.log10(radii), np.log10(sup_per_radius), 1)[0]
             if len(radii) >= 2 else 0.0)
    return ApEstimate(
        value=float(max(rec["ratio"] for rec in used)),
        per_ball=records,
        trend=float(10.0**slope),
    )
